#pragma once

#include "data/synthdata.hpp"
#include "model/contrastive.hpp"
#include "model/generation.hpp"

namespace dtg::harness {

// History size used by the no-turn-selection baseline ("nearest three turns").
constexpr int kNearestBaseline = 3;

// QA token lists of the nearest n history turns before turn_idx, chronological.
std::vector<std::vector<int>> nearest_history(const data::SyntheticDialog& d, int turn_idx, int n);

struct GroundingForward {
  diff::Var cross;  // cross-modal feature M, (n+m) x d
  diff::Var mask;   // temporal mask probabilities, {m}
  model::BoundaryDistribution boundaries;
  int n = 0;
  int m = 0;
};

GroundingForward grounding_forward(diff::Tape& t, diff::ParamBinder& p,
                                   const model::ModelConfig& cfg, const data::SyntheticDialog& d,
                                   int turn_idx);

struct GroundingPrediction {
  std::vector<double> mask_probs;
  int argmax_start = 0;
  int argmax_end = 0;
  model::Interval interval;
};

GroundingPrediction predict_interval(diff::Tape& t, const GroundingForward& fwd, double alpha);

struct GroundingLossOut {
  diff::Var total;
  double l_frame = 0;
  double l_clip = 0;
};

GroundingLossOut grounding_losses(diff::Tape& t, const GroundingForward& fwd,
                                  const data::DialogTurn& turn, double lambda);

// History turn records for turn_idx; intervals are ground truth unless a
// per-turn predicted list is supplied.
std::vector<model::TurnRecord> history_records(const data::SyntheticDialog& d, int turn_idx,
                                               const std::vector<model::Interval>* predicted);

// TS toggle: top-k IoU selection when on, nearest-3 baseline when off.
model::TurnSelection choose_turns(const model::RunConfig& cfg,
                                  const std::vector<model::TurnRecord>& history,
                                  const model::Interval& current);

// VM toggle: the given interval when on, the full video when off.
model::Interval effective_interval(const model::RunConfig& cfg, const model::Interval& predicted,
                                   int m);

struct GenerationForward {
  diff::Var t_use;
  diff::Var v_use;
  diff::Var m_use;
  std::vector<double> key_mask;     // over m_use rows
  std::vector<double> video_mask;   // frame-level gating actually applied
  model::AssembledInputs assembled;
  int n = 0;       // text rows in m_use
  int m_rows = 0;  // video rows in m_use
};

GenerationForward generation_forward(diff::Tape& t, diff::ParamBinder& p,
                                     const model::RunConfig& cfg, const data::SyntheticDialog& d,
                                     int turn_idx, const model::TurnSelection& selection,
                                     const model::Interval& interval);

diff::Var pooled_representation(diff::Tape& t, const GenerationForward& fwd);

// Re-encodes the video under a different frame mask and crosses it with the
// already-encoded text block; returns the pooled representation.
diff::Var pooled_video_variant(diff::Tape& t, diff::ParamBinder& p, const model::RunConfig& cfg,
                               const data::SyntheticDialog& d, const GenerationForward& base,
                               const std::vector<double>& variant_mask);

// Same idea on the text side: different history turns, same encoded video.
diff::Var pooled_text_variant(diff::Tape& t, diff::ParamBinder& p, const model::RunConfig& cfg,
                              const data::SyntheticDialog& d, int turn_idx,
                              const std::vector<int>& turn_indices,
                              const GenerationForward& base);

std::vector<int> gold_sequence(const data::DialogTurn& turn);

}  // namespace dtg::harness
