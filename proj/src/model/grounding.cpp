#include "model/grounding.hpp"

#include <algorithm>

namespace dtg::model {

using diff::Tape;
using diff::Var;

std::vector<double> GroundingLabel::frame_labels(int m) const {
  if (ts > te) throw Error("grounding label: ts > te");
  if (ts < 0 || te >= m) throw Error("grounding label: boundary out of range");
  std::vector<double> y(m, 0.0);
  for (int j = ts; j <= te; ++j) y[j] = 1.0;
  return y;
}

namespace {

Var video_block(Tape& t, Var cross_feature, int n, int m) {
  const auto& v = t.value(cross_feature);
  if (v.rank() != 2 || v.rows() != n + m || m < 1)
    throw Error("grounding: cross feature missing video block");
  return t.slice_rows(cross_feature, n, m);
}

}  // namespace

Var predict_mask(Tape& t, diff::ParamBinder& p, Var cross_feature, int n, int m) {
  Var mv = video_block(t, cross_feature, n, m);
  Var logits = t.conv1d_same(mv, p("mask_conv_k"), p("mask_conv_b"));
  return t.sigmoid(t.reshape(logits, {m}));
}

BoundaryDistribution predict_boundaries(Tape& t, diff::ParamBinder& p, Var cross_feature, int n,
                                        int m, const std::vector<double>& frame_mask) {
  if (m < 2) throw Error("predict_boundaries: need at least 2 frames");
  Var mv = video_block(t, cross_feature, n, m);
  const diff::Tensor mask = attn_mask_from_key(1, frame_mask);
  Var s = t.masked_softmax(
      t.reshape(t.add_rowvec(t.matmul(mv, p("start_w")), p("start_b")), {1, m}), mask);
  Var e = t.masked_softmax(
      t.reshape(t.add_rowvec(t.matmul(mv, p("end_w")), p("end_b")), {1, m}), mask);
  return {s, e};
}

Var frame_loss(Tape& t, Var mask_probs, const std::vector<double>& labels) {
  return t.bce_sum(mask_probs, labels);
}

Var clip_loss(Tape& t, const BoundaryDistribution& b, int ts, int te) {
  return t.scale(t.add(t.ce_index(b.start, ts), t.ce_index(b.end, te)), 0.5);
}

Var grounding_loss(Tape& t, Var clip, Var frame, double lambda) {
  if (lambda < 0.0) throw Error("grounding_loss: lambda must be >= 0");
  return t.add(t.scale(clip, lambda), frame);
}

int argmax_index(const std::vector<double>& v) {
  if (v.empty()) throw Error("argmax of empty vector");
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

Interval derive_timestamps(const std::vector<double>& mask_probs, int argmax_start,
                           int argmax_end, double alpha) {
  if (alpha <= 0.0 || alpha >= 1.0) throw Error("derive_timestamps: alpha must be in (0,1)");
  const int m = static_cast<int>(mask_probs.size());
  int lo = -1, hi = -1;
  for (int j = 0; j < m; ++j) {
    if (mask_probs[j] > alpha) {  // strictly greater; equality excludes the frame
      if (lo < 0) lo = j;
      hi = j;
    }
  }
  Interval out;
  if (lo < 0) {
    out.start = argmax_start;
    out.end = argmax_end;
  } else {
    out.start = 0.5 * (lo + argmax_start);
    out.end = 0.5 * (hi + argmax_end);
  }
  if (out.start > out.end) std::swap(out.start, out.end);
  out.start = std::clamp(out.start, 0.0, static_cast<double>(m - 1));
  out.end = std::clamp(out.end, 0.0, static_cast<double>(m - 1));
  return out;
}

}  // namespace dtg::model
