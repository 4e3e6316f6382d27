#include "model/contrastive.hpp"

#include <algorithm>
#include <set>

namespace dtg::model {

using diff::Tape;
using diff::Var;

ClipSampleSet sample_clips(const Interval& gt, int m, double margin_ratio, std::mt19937_64& rng) {
  if (margin_ratio <= 0.0) throw Error("sample_clips: margin_ratio must be > 0");
  if (m < 2) throw Error("sample_clips: need at least 2 frames");
  const double last = static_cast<double>(m - 1);
  ClipSampleSet out;
  out.gt = gt;
  const double margin = margin_ratio * m;
  out.positive.start = std::clamp(gt.start - margin, 0.0, last);
  out.positive.end = std::clamp(gt.end + margin, 0.0, last);

  const double len = gt.length();
  const double max_start = last - len;
  std::uniform_real_distribution<double> dist(0.0, max_start);
  bool placed = false;
  for (int attempt = 0; attempt < 200 && max_start > 0.0; ++attempt) {
    const double s = dist(rng);
    Interval cand{s, s + len};
    if (interval_iou(cand, gt) < 0.1) {
      out.negative = cand;
      placed = true;
      break;
    }
  }
  if (!placed) {
    // gt covers nearly the whole video; fall back to the half it overlaps least
    Interval left{0.0, last / 2.0};
    Interval right{last / 2.0, last};
    auto overlap = [&](const Interval& h) {
      return std::max(0.0, std::min(h.end, gt.end) - std::max(h.start, gt.start));
    };
    out.negative = overlap(left) <= overlap(right) ? left : right;
    out.negative_fallback = true;
  }
  return out;
}

ContrastiveLosses contrastive_loss(Tape& t, Var pooled_use, Var pooled_pos, Var pooled_neg,
                                   double beta) {
  if (beta < 0.0) throw Error("contrastive_loss: beta must be >= 0");
  ContrastiveLosses out;
  out.l_pos = t.mse(pooled_use, pooled_pos);
  Var one = t.constant(diff::Tensor::scalar(1.0));
  out.l_neg = t.sub(one, t.mse(pooled_use, pooled_neg));
  out.total = t.add(out.l_pos, t.scale(out.l_neg, beta));
  return out;
}

Var final_loss(Tape& t, Var l_generate, Var l_contrastive, double delta) {
  if (delta < 0.0) throw Error("final_loss: delta must be >= 0");
  return t.add(l_generate, t.scale(l_contrastive, delta));
}

std::optional<TurnContrastPair> sample_turn_contrast(const std::vector<TurnRecord>& history,
                                                     const TurnSelection& selection) {
  std::set<int> chosen(selection.chosen.begin(), selection.chosen.end());
  std::vector<int> unselected;
  for (const TurnRecord& r : history)
    if (!chosen.count(r.turn_index)) unselected.push_back(r.turn_index);
  if (unselected.size() < 2) return std::nullopt;  // need one extra plus >=1 negative
  // extra positive turn: the most recent unselected one
  std::sort(unselected.begin(), unselected.end());
  const int extra = unselected.back();
  unselected.pop_back();
  TurnContrastPair pair;
  pair.positive_turns = selection.chosen;
  pair.positive_turns.push_back(extra);
  std::sort(pair.positive_turns.begin(), pair.positive_turns.end());
  pair.negative_turns = unselected;
  return pair;
}

}  // namespace dtg::model
