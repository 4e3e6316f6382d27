#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "harness/evaluate.hpp"
#include "harness/train.hpp"

namespace dtg::harness {

// One toggle row of the component ablation, with per-seed reports and the
// per-metric median across seeds.
struct AblationRow {
  std::string name;
  model::Toggles toggles;
  std::vector<metrics::MetricReport> per_seed;
  metrics::MetricReport median;
};

// The four canonical rows: none, TS, TS+VM, TS+VM+C.
std::vector<std::pair<std::string, model::Toggles>> ablation_rows();

double median_of(std::vector<double> values);

struct AblateOptions {
  // Rows only differ in stage 2, so the grounding stage is trained once per
  // seed and every row warm-starts from it. generation_dialogs caps the
  // corpus used for stage 2 (-1 = the full train set).
  int generation_dialogs = -1;
};

// Trains and evaluates every row for every seed on the given splits. The base
// config supplies everything except the toggles and the seed.
std::vector<AblationRow> ablate(const model::RunConfig& base, const data::Corpus& train_set,
                                const data::Corpus& test_set,
                                const std::vector<std::uint64_t>& seeds,
                                const AblateOptions& opts = {});

// CSV: row name, toggle flags, then median CIDEr / BLEU-4 / METEOR-lite / ROUGE-L.
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace dtg::harness
