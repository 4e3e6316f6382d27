#pragma once

#include <optional>
#include <random>

#include "model/turnselect.hpp"

namespace dtg::model {

// Ground-truth clip, a slightly-enlarged positive, and a disjoint negative.
struct ClipSampleSet {
  Interval gt;
  Interval positive;
  Interval negative;
  bool negative_fallback = false;  // gt covered too much of the video to place one
};

// positive = gt widened by margin_ratio * m per side (clamped); negative = a
// same-length interval with IoU(negative, gt) < 0.1, uniformly sampled; when
// no such placement exists, the half of the video overlapping gt least.
ClipSampleSet sample_clips(const Interval& gt, int m, double margin_ratio, std::mt19937_64& rng);

struct ContrastiveLosses {
  diff::Var l_pos;   // MSE(pool(use), pool(positive))
  diff::Var l_neg;   // 1 - MSE(pool(use), pool(negative))
  diff::Var total;   // l_pos + beta * l_neg
};

ContrastiveLosses contrastive_loss(diff::Tape& t, diff::Var pooled_use, diff::Var pooled_pos,
                                   diff::Var pooled_neg, double beta);

// L_final = L_generate + delta * L_contrastive
diff::Var final_loss(diff::Tape& t, diff::Var l_generate, diff::Var l_contrastive, double delta);

// Optional text-side contrast: positive = selection plus one extra turn,
// negative = the remaining unselected turns. Skipped (nullopt) when the
// history has no spare turns.
struct TurnContrastPair {
  std::vector<int> positive_turns;
  std::vector<int> negative_turns;
};

std::optional<TurnContrastPair> sample_turn_contrast(const std::vector<TurnRecord>& history,
                                                     const TurnSelection& selection);

}  // namespace dtg::model
