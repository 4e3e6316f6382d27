#pragma once

#include <vector>

#include "model/encoders.hpp"

namespace dtg::model {

// Continuous [start, end] region in frame coordinates.
struct Interval {
  double start = 0.0;
  double end = 0.0;
  double length() const { return end - start; }
};

struct GroundingLabel {
  int ts = 0;
  int te = 0;

  // Y[j] = 1 exactly for j in [ts, te]
  std::vector<double> frame_labels(int m) const;
};

// Start/end distributions over the m frame positions (tape nodes, shape {1,m}).
struct BoundaryDistribution {
  diff::Var start;
  diff::Var end;
};

// Conv1D (width 3, d -> 1) + sigmoid over the video block of the cross-modal
// feature. Returns per-frame relevance probabilities, shape {m}.
diff::Var predict_mask(diff::Tape& t, diff::ParamBinder& p, diff::Var cross_feature, int n, int m);

BoundaryDistribution predict_boundaries(diff::Tape& t, diff::ParamBinder& p,
                                        diff::Var cross_feature, int n, int m,
                                        const std::vector<double>& frame_mask);

diff::Var frame_loss(diff::Tape& t, diff::Var mask_probs, const std::vector<double>& labels);
diff::Var clip_loss(diff::Tape& t, const BoundaryDistribution& b, int ts, int te);
diff::Var grounding_loss(diff::Tape& t, diff::Var clip, diff::Var frame, double lambda);

int argmax_index(const std::vector<double>& v);

// tau_s = (minIdx(mask > alpha) + argmax p_s)/2, tau_e analogous; falls back to
// the boundary argmaxes when no mask entry clears alpha, swaps on inversion,
// clamps to [0, m-1].
Interval derive_timestamps(const std::vector<double>& mask_probs, int argmax_start,
                           int argmax_end, double alpha);

}  // namespace dtg::model
