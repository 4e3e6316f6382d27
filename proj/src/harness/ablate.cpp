#include "harness/ablate.hpp"

#include <algorithm>
#include <sstream>

namespace dtg::harness {

std::vector<std::pair<std::string, model::Toggles>> ablation_rows() {
  return {
      {"baseline", model::Toggles{false, false, false}},
      {"ts", model::Toggles{true, false, false}},
      {"ts+vm", model::Toggles{true, true, false}},
      {"ts+vm+c", model::Toggles{true, true, true}},
  };
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw Error("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

metrics::MetricReport median_report(const std::vector<metrics::MetricReport>& reports) {
  const auto gather = [&](auto field) {
    std::vector<double> v;
    for (const metrics::MetricReport& r : reports) v.push_back(field(r));
    return median_of(std::move(v));
  };
  metrics::MetricReport out;
  out.bleu1 = gather([](const auto& r) { return r.bleu1; });
  out.bleu2 = gather([](const auto& r) { return r.bleu2; });
  out.bleu3 = gather([](const auto& r) { return r.bleu3; });
  out.bleu4 = gather([](const auto& r) { return r.bleu4; });
  out.meteor_lite = gather([](const auto& r) { return r.meteor_lite; });
  out.rouge_l = gather([](const auto& r) { return r.rouge_l; });
  out.cider = gather([](const auto& r) { return r.cider; });
  out.compute_avg();
  for (double mu : {0.3, 0.5, 0.7}) {
    std::vector<double> v;
    for (const metrics::MetricReport& r : reports) {
      const auto it = r.r_at_1.find(mu);
      if (it != r.r_at_1.end()) v.push_back(it->second);
    }
    if (!v.empty()) out.r_at_1[mu] = median_of(std::move(v));
  }
  return out;
}

}  // namespace

std::vector<AblationRow> ablate(const model::RunConfig& base, const data::Corpus& train_set,
                                const data::Corpus& test_set,
                                const std::vector<std::uint64_t>& seeds,
                                const AblateOptions& opts) {
  if (seeds.empty()) throw Error("ablate: no seeds given");

  data::Corpus stage2_set = train_set;
  if (opts.generation_dialogs >= 0 &&
      static_cast<std::size_t>(opts.generation_dialogs) < stage2_set.size())
    stage2_set.resize(opts.generation_dialogs);

  std::vector<AblationRow> rows;
  for (const auto& [name, toggles] : ablation_rows()) {
    AblationRow row;
    row.name = name;
    row.toggles = toggles;
    rows.push_back(std::move(row));
  }

  for (std::uint64_t seed : seeds) {
    // Stage 1 (grounding) ignores the toggles, so train it once per seed and
    // let every row continue from the same grounded model.
    model::RunConfig gcfg = base;
    gcfg.seed = seed;
    gcfg.train.generation_epochs = 0;
    TrainResult grounded = train(gcfg, train_set, TrainOptions{});

    for (std::size_t r = 0; r < rows.size(); ++r) {
      model::RunConfig cfg = base;
      cfg.toggles = rows[r].toggles;
      cfg.seed = seed;
      cfg.train.grounding_epochs = 0;
      TrainOptions topts;
      topts.start_from = &grounded.checkpoint;
      TrainResult tr = train(cfg, stage2_set, topts);
      EvalResult ev = evaluate(cfg, tr.checkpoint.params, test_set, EvalOptions{});
      rows[r].per_seed.push_back(ev.report);
    }
  }
  for (AblationRow& row : rows) row.median = median_report(row.per_seed);
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "row,ts,vm,c,cider,bleu4,meteor_lite,rouge_l\n";
  os.precision(6);
  os << std::fixed;
  for (const AblationRow& r : rows)
    os << r.name << ',' << (r.toggles.ts ? 1 : 0) << ',' << (r.toggles.vm ? 1 : 0) << ','
       << (r.toggles.c ? 1 : 0) << ',' << r.median.cider << ',' << r.median.bleu4 << ','
       << r.median.meteor_lite << ',' << r.median.rouge_l << '\n';
  return os.str();
}

}  // namespace dtg::harness
