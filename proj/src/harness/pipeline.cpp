#include "harness/pipeline.hpp"

#include <algorithm>

namespace dtg::harness {

using data::DialogTurn;
using data::SyntheticDialog;
using diff::ParamBinder;
using diff::Tape;
using diff::Var;
using model::Interval;
using model::ModelConfig;
using model::RunConfig;
using model::TurnRecord;
using model::TurnSelection;

std::vector<std::vector<int>> nearest_history(const SyntheticDialog& d, int turn_idx, int n) {
  std::vector<std::vector<int>> out;
  const int lo = std::max(0, turn_idx - n);
  for (int i = lo; i < turn_idx; ++i) {
    std::vector<int> qa = d.turns[i].q;
    qa.push_back(model::kSep);
    qa.insert(qa.end(), d.turns[i].a.begin(), d.turns[i].a.end());
    out.push_back(std::move(qa));
  }
  return out;
}

GroundingForward grounding_forward(Tape& t, ParamBinder& p, const ModelConfig& cfg,
                                   const SyntheticDialog& d, int turn_idx) {
  if (turn_idx < 0 || turn_idx >= static_cast<int>(d.turns.size()))
    throw Error("grounding_forward: turn index out of range");
  const std::vector<int> text_ids =
      model::build_text_input(cfg, d.turns[turn_idx].q, nearest_history(d, turn_idx, kNearestBaseline));
  model::Encoded text = model::encode_text(t, p, cfg, text_ids);
  const std::vector<double> full(d.m, 1.0);
  model::Encoded video = model::encode_video(t, p, cfg, d.features, full);

  GroundingForward fwd;
  fwd.n = static_cast<int>(text_ids.size());
  fwd.m = d.m;
  std::vector<double> key = text.key_mask;
  key.insert(key.end(), video.key_mask.begin(), video.key_mask.end());
  fwd.cross = model::cross_encode(t, p, cfg, model::concat_features(t, text.h, video.h), key);
  fwd.mask = model::predict_mask(t, p, fwd.cross, fwd.n, fwd.m);
  fwd.boundaries = model::predict_boundaries(t, p, fwd.cross, fwd.n, fwd.m, full);
  return fwd;
}

GroundingPrediction predict_interval(Tape& t, const GroundingForward& fwd, double alpha) {
  GroundingPrediction out;
  out.mask_probs = t.value(fwd.mask).values;
  out.argmax_start = model::argmax_index(t.value(fwd.boundaries.start).values);
  out.argmax_end = model::argmax_index(t.value(fwd.boundaries.end).values);
  out.interval = model::derive_timestamps(out.mask_probs, out.argmax_start, out.argmax_end, alpha);
  return out;
}

GroundingLossOut grounding_losses(Tape& t, const GroundingForward& fwd, const DialogTurn& turn,
                                  double lambda) {
  model::GroundingLabel label{turn.ts, turn.te};
  Var frame = model::frame_loss(t, fwd.mask, label.frame_labels(fwd.m));
  Var clip = model::clip_loss(t, fwd.boundaries, turn.ts, turn.te);
  GroundingLossOut out;
  out.total = model::grounding_loss(t, clip, frame, lambda);
  out.l_frame = t.value(frame).item();
  out.l_clip = t.value(clip).item();
  return out;
}

std::vector<TurnRecord> history_records(const SyntheticDialog& d, int turn_idx,
                                        const std::vector<Interval>* predicted) {
  if (predicted && static_cast<int>(predicted->size()) < turn_idx)
    throw Error("history_records: missing predicted intervals");
  std::vector<TurnRecord> out;
  for (int i = 0; i < turn_idx; ++i) {
    TurnRecord r;
    r.turn_index = i + 1;
    r.question = d.turns[i].q;
    r.answer = d.turns[i].a;
    r.interval = predicted ? (*predicted)[i]
                           : Interval{static_cast<double>(d.turns[i].ts),
                                      static_cast<double>(d.turns[i].te)};
    out.push_back(std::move(r));
  }
  return out;
}

TurnSelection choose_turns(const RunConfig& cfg, const std::vector<TurnRecord>& history,
                           const Interval& current) {
  if (cfg.toggles.ts) return model::select_turns(history, current, cfg.model.k);
  // baseline: the nearest three turns, chronological
  TurnSelection sel;
  const int total = static_cast<int>(history.size());
  for (int i = std::max(0, total - kNearestBaseline); i < total; ++i) {
    sel.chosen.push_back(history[i].turn_index);
    sel.ious.push_back(model::interval_iou(history[i].interval, current));
    sel.supplemented.push_back(true);
  }
  return sel;
}

Interval effective_interval(const RunConfig& cfg, const Interval& predicted, int m) {
  if (cfg.toggles.vm) return predicted;
  return Interval{0.0, static_cast<double>(m - 1)};
}

GenerationForward generation_forward(Tape& t, ParamBinder& p, const RunConfig& cfg,
                                     const SyntheticDialog& d, int turn_idx,
                                     const TurnSelection& selection, const Interval& interval) {
  const std::vector<TurnRecord> history = history_records(d, turn_idx, nullptr);
  GenerationForward fwd;
  fwd.assembled = model::assemble_inputs(cfg.model, d.turns[turn_idx].q, history, selection,
                                         interval, d.m, cfg.train.slice_video);
  model::Encoded text = model::encode_text(t, p, cfg.model, fwd.assembled.text_ids);
  fwd.t_use = text.h;
  fwd.n = static_cast<int>(fwd.assembled.text_ids.size());

  if (cfg.train.slice_video) {
    const int lo = fwd.assembled.slice_start, len = fwd.assembled.slice_len;
    diff::Tensor sliced = diff::Tensor::zeros({len, d.features.cols()});
    for (int r = 0; r < len; ++r)
      for (int c = 0; c < d.features.cols(); ++c) sliced.at(r, c) = d.features.at(lo + r, c);
    const std::vector<double> ones(len, 1.0);
    model::Encoded video = model::encode_video(t, p, cfg.model, sliced, ones);
    fwd.v_use = video.h;
    fwd.m_rows = len;
    fwd.video_mask = ones;
  } else {
    model::Encoded video = model::encode_video(t, p, cfg.model, d.features, fwd.assembled.video_mask);
    fwd.v_use = video.h;
    fwd.m_rows = d.m;
    fwd.video_mask = fwd.assembled.video_mask;
  }
  fwd.key_mask = text.key_mask;
  fwd.key_mask.insert(fwd.key_mask.end(), fwd.video_mask.begin(), fwd.video_mask.end());
  fwd.m_use = model::cross_encode(t, p, cfg.model, model::concat_features(t, fwd.t_use, fwd.v_use),
                                  fwd.key_mask);
  return fwd;
}

Var pooled_representation(Tape& t, const GenerationForward& fwd) {
  return t.mean_pool_rows(fwd.m_use, fwd.key_mask);
}

Var pooled_video_variant(Tape& t, ParamBinder& p, const RunConfig& cfg, const SyntheticDialog& d,
                         const GenerationForward& base, const std::vector<double>& variant_mask) {
  model::Encoded video = model::encode_video(t, p, cfg.model, d.features, variant_mask);
  std::vector<double> key(base.key_mask.begin(), base.key_mask.begin() + base.n);
  key.insert(key.end(), variant_mask.begin(), variant_mask.end());
  Var m = model::cross_encode(t, p, cfg.model, model::concat_features(t, base.t_use, video.h), key);
  return t.mean_pool_rows(m, key);
}

Var pooled_text_variant(Tape& t, ParamBinder& p, const RunConfig& cfg, const SyntheticDialog& d,
                        int turn_idx, const std::vector<int>& turn_indices,
                        const GenerationForward& base) {
  const std::vector<TurnRecord> history = history_records(d, turn_idx, nullptr);
  TurnSelection sel;
  sel.chosen = turn_indices;
  sel.ious.assign(turn_indices.size(), 0.0);
  sel.supplemented.assign(turn_indices.size(), false);
  model::AssembledInputs asm_in =
      model::assemble_inputs(cfg.model, d.turns[turn_idx].q, history, sel,
                             Interval{0.0, static_cast<double>(d.m - 1)}, d.m, false);
  model::Encoded text = model::encode_text(t, p, cfg.model, asm_in.text_ids);
  std::vector<double> key = text.key_mask;
  key.insert(key.end(), base.video_mask.begin(), base.video_mask.end());
  Var m = model::cross_encode(t, p, cfg.model, model::concat_features(t, text.h, base.v_use), key);
  return t.mean_pool_rows(m, key);
}

std::vector<int> gold_sequence(const DialogTurn& turn) {
  std::vector<int> gold;
  gold.push_back(model::kBos);
  gold.insert(gold.end(), turn.a.begin(), turn.a.end());
  gold.push_back(model::kEos);
  return gold;
}

}  // namespace dtg::harness
