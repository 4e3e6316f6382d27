#pragma once

#include <map>
#include <string>
#include <vector>

#include "model/grounding.hpp"

namespace dtg::metrics {

using Sentence = std::vector<int>;

struct MetricReport {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double meteor_lite = 0;
  double rouge_l = 0;
  double cider = 0;
  double avg = 0;  // arithmetic mean of the seven text metrics
  std::map<double, double> r_at_1;  // IoU threshold -> recall

  void compute_avg();
  std::string to_json() const;
};

// Corpus-level BLEU-n: aggregated clipped counts, one brevity penalty,
// epsilon-smoothed zero counts.
double bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs, int max_n);

// Sentence-level LCS F-measure with beta = 1.2.
double rouge_l(const Sentence& hyp, const Sentence& ref);
double rouge_l_corpus(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs);

// CIDEr (not CIDEr-D), no x10 scaling; IDF from the reference corpus.
double cider(const std::vector<Sentence>& hyps, const std::vector<std::vector<Sentence>>& refs);

// Exact-match METEOR core: F_mean = 10PR/(R+9P), fragmentation penalty
// 0.5*(chunks/matches)^3. Not comparable with official METEOR.
double meteor_lite(const Sentence& hyp, const Sentence& ref);
double meteor_lite_corpus(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs);

double recall_at_iou(const std::vector<dtg::model::Interval>& predictions,
                     const std::vector<dtg::model::Interval>& labels, double mu);

// Full text-metric suite over parallel hypothesis/reference lists.
MetricReport score_corpus(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs);

}  // namespace dtg::metrics
