#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <json.hpp>
#include <map>

#include "model/turnselect.hpp"

namespace dtg::metrics {

namespace {

using NGram = std::vector<int>;
using Counts = std::map<NGram, int>;

Counts ngram_counts(const Sentence& s, int n) {
  Counts out;
  if (static_cast<int>(s.size()) < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++out[NGram(s.begin() + i, s.begin() + i + n)];
  return out;
}

constexpr double kBleuEps = 1e-9;

}  // namespace

void MetricReport::compute_avg() {
  avg = (bleu1 + bleu2 + bleu3 + bleu4 + meteor_lite + rouge_l + cider) / 7.0;
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["bleu1"] = bleu1;
  j["bleu2"] = bleu2;
  j["bleu3"] = bleu3;
  j["bleu4"] = bleu4;
  j["meteor_lite"] = meteor_lite;
  j["rouge_l"] = rouge_l;
  j["cider"] = cider;
  j["avg"] = avg;
  nlohmann::json r = nlohmann::json::object();
  for (const auto& [mu, rec] : r_at_1) {
    char key[16];
    std::snprintf(key, sizeof key, "%.1f", mu);
    r[key] = rec;
  }
  j["r_at_1"] = r;
  return j.dump();
}

double bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs, int max_n) {
  if (hyps.empty() || hyps.size() != refs.size()) throw Error("bleu: empty or mismatched corpus");
  if (max_n < 1 || max_n > 4) throw Error("bleu: n must be in [1,4]");
  std::vector<long> clipped(max_n, 0), total(max_n, 0);
  long hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    hyp_len += static_cast<long>(hyps[i].size());
    ref_len += static_cast<long>(refs[i].size());
    for (int n = 1; n <= max_n; ++n) {
      const Counts hc = ngram_counts(hyps[i], n);
      const Counts rc = ngram_counts(refs[i], n);
      for (const auto& [gram, count] : hc) {
        total[n - 1] += count;
        auto it = rc.find(gram);
        if (it != rc.end()) clipped[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (hyp_len == 0) return 0.0;
  double log_prec = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const double p = total[n - 1] > 0 && clipped[n - 1] > 0
                         ? static_cast<double>(clipped[n - 1]) / total[n - 1]
                         : kBleuEps;
    log_prec += std::log(p);
  }
  const double bp = hyp_len >= ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
  return bp * std::exp(log_prec / max_n);
}

double rouge_l(const Sentence& hyp, const Sentence& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  const std::size_t n = hyp.size(), m = ref.size();
  std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      lcs[i][j] = hyp[i - 1] == ref[j - 1] ? lcs[i - 1][j - 1] + 1
                                           : std::max(lcs[i - 1][j], lcs[i][j - 1]);
  const double l = lcs[n][m];
  if (l == 0.0) return 0.0;
  const double p = l / n, r = l / m;
  constexpr double beta = 1.2;
  return (1.0 + beta * beta) * p * r / (r + beta * beta * p);
}

double rouge_l_corpus(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  if (hyps.empty() || hyps.size() != refs.size()) throw Error("rouge_l: mismatched corpus");
  double s = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) s += rouge_l(hyps[i], refs[i]);
  return s / hyps.size();
}

double meteor_lite(const Sentence& hyp, const Sentence& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  // greedy left-to-right alignment preferring run continuation
  std::vector<bool> used(ref.size(), false);
  int matches = 0, chunks = 0;
  int prev_ref = -2;  // -2: previous hyp token unmatched
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    int pick = -1;
    if (prev_ref >= 0 && prev_ref + 1 < static_cast<int>(ref.size()) && !used[prev_ref + 1] &&
        ref[prev_ref + 1] == hyp[i]) {
      pick = prev_ref + 1;
    } else {
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (!used[j] && ref[j] == hyp[i]) {
          pick = static_cast<int>(j);
          break;
        }
      }
    }
    if (pick < 0) {
      prev_ref = -2;
      continue;
    }
    used[pick] = true;
    ++matches;
    if (pick != prev_ref + 1) ++chunks;
    prev_ref = pick;
  }
  if (matches == 0) return 0.0;
  const double p = static_cast<double>(matches) / hyp.size();
  const double r = static_cast<double>(matches) / ref.size();
  const double f_mean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(chunks) / matches;
  const double penalty = 0.5 * frag * frag * frag;
  return f_mean * (1.0 - penalty);
}

double meteor_lite_corpus(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  if (hyps.empty() || hyps.size() != refs.size()) throw Error("meteor_lite: mismatched corpus");
  double s = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) s += meteor_lite(hyps[i], refs[i]);
  return s / hyps.size();
}

double cider(const std::vector<Sentence>& hyps, const std::vector<std::vector<Sentence>>& refs) {
  if (hyps.empty() || hyps.size() != refs.size()) throw Error("cider: mismatched corpus");
  const double num_docs = static_cast<double>(hyps.size());
  std::size_t total_refs = 0;
  for (const auto& r : refs) total_refs += r.size();
  if (total_refs < 2)
    std::cerr << "[dtg] warning: cider over a single-document corpus, IDF is degenerate\n";

  double score = 0.0;
  for (int n = 1; n <= 4; ++n) {
    // document frequency over the reference corpus only
    Counts df;
    for (const auto& ref_set : refs) {
      Counts seen;
      for (const Sentence& r : ref_set)
        for (const auto& [gram, cnt] : ngram_counts(r, n)) seen[gram] = 1;
      for (const auto& [gram, one] : seen) df[gram] += one;
    }
    auto idf = [&](const NGram& g) {
      auto it = df.find(g);
      const double dfe = it == df.end() ? 1.0 : std::max(1.0, static_cast<double>(it->second));
      return std::log(num_docs / dfe);
    };
    auto cosine = [](const std::map<NGram, double>& a, const std::map<NGram, double>& b) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (const auto& [g, v] : a) {
        na += v * v;
        auto it = b.find(g);
        if (it != b.end()) dot += v * it->second;
      }
      for (const auto& [g, v] : b) nb += v * v;
      if (na == 0.0 || nb == 0.0) return 0.0;
      return dot / (std::sqrt(na) * std::sqrt(nb));
    };
    auto weigh = [&](const Counts& c, bool with_idf) {
      std::map<NGram, double> out;
      for (const auto& [g, cnt] : c) out[g] = cnt * (with_idf ? idf(g) : 1.0);
      return out;
    };

    double sim_n = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      const Counts hc = ngram_counts(hyps[i], n);
      double s = 0.0;
      for (const Sentence& r : refs[i]) {
        const Counts rc = ngram_counts(r, n);
        auto hv = weigh(hc, true);
        auto rv = weigh(rc, true);
        double c = cosine(hv, rv);
        if (c == 0.0) {
          // degenerate IDF (every gram ubiquitous): fall back to raw tf cosine
          bool zero_norm = true;
          for (const auto& [g, v] : hv) zero_norm = zero_norm && v == 0.0;
          bool r_zero = true;
          for (const auto& [g, v] : rv) r_zero = r_zero && v == 0.0;
          if ((zero_norm && !hv.empty()) || (r_zero && !rv.empty()))
            c = cosine(weigh(hc, false), weigh(rc, false));
        }
        s += c;
      }
      sim_n += refs[i].empty() ? 0.0 : s / refs[i].size();
    }
    score += sim_n / num_docs;
  }
  return score / 4.0;
}

double recall_at_iou(const std::vector<dtg::model::Interval>& predictions,
                     const std::vector<dtg::model::Interval>& labels, double mu) {
  if (predictions.size() != labels.size()) throw Error("recall_at_iou: length mismatch");
  if (predictions.empty()) throw Error("recall_at_iou: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (dtg::model::interval_iou(predictions[i], labels[i]) >= mu) ++hits;
  return static_cast<double>(hits) / predictions.size();
}

MetricReport score_corpus(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  MetricReport r;
  r.bleu1 = bleu(hyps, refs, 1);
  r.bleu2 = bleu(hyps, refs, 2);
  r.bleu3 = bleu(hyps, refs, 3);
  r.bleu4 = bleu(hyps, refs, 4);
  r.rouge_l = rouge_l_corpus(hyps, refs);
  r.meteor_lite = meteor_lite_corpus(hyps, refs);
  std::vector<std::vector<Sentence>> ref_sets;
  ref_sets.reserve(refs.size());
  for (const Sentence& s : refs) ref_sets.push_back({s});
  r.cider = cider(hyps, ref_sets);
  r.compute_avg();
  return r;
}

}  // namespace dtg::metrics
