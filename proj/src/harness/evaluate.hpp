#pragma once

#include <string>
#include <vector>

#include "harness/pipeline.hpp"
#include "metrics/metrics.hpp"

namespace dtg::harness {

struct EvalOptions {
  bool oracle = false;  // inject ground-truth intervals instead of predictions
};

// Grounding output for one (video, turn) pair, in frame coordinates.
struct GroundingRow {
  std::string video_id;
  int turn_idx = 0;  // 0-based
  double tau_s = 0;
  double tau_e = 0;
};

// Runs the grounding head on every turn of every dialog.
std::vector<GroundingRow> ground_corpus(const model::RunConfig& cfg, model::ModelParams& params,
                                        const data::Corpus& split);

struct EvalResult {
  metrics::MetricReport report;
  std::vector<std::vector<int>> hyps;  // beam-search answers, specials stripped
  std::vector<std::vector<int>> refs;  // gold final-turn answers
  std::vector<model::Interval> pred_intervals;  // every turn, corpus order
  std::vector<model::Interval> gt_intervals;    // parallel to pred_intervals
};

// ground -> select -> answer on the final turn of each dialog, text metrics
// against the gold answers, and R@1 at IoU {0.3, 0.5, 0.7} over all turns.
EvalResult evaluate(const model::RunConfig& cfg, model::ModelParams& params,
                    const data::Corpus& split, const EvalOptions& opts);

// Beam-search answer for one turn of one dialog (used by the answer command).
std::vector<int> answer_turn(const model::RunConfig& cfg, model::ModelParams& params,
                             const data::SyntheticDialog& d, int turn_idx, bool oracle);

}  // namespace dtg::harness
