#pragma once

#include <functional>
#include <optional>

#include "model/turnselect.hpp"

namespace dtg::model {

// Inputs for the generation pass: the assembled text and the video gating.
// The video stays a full-length buffer gated by an attention mask by default;
// slice mode physically narrows it instead.
struct AssembledInputs {
  std::vector<int> text_ids;
  std::vector<double> video_mask;  // length m, {0,1}
  int slice_start = 0;
  int slice_len = -1;  // -1 when masking mode
};

// 1 exactly at frames floor(start)..ceil(end), clamped to [0, m-1].
std::vector<double> video_attention_mask(const Interval& interval, int m);

AssembledInputs assemble_inputs(const ModelConfig& cfg, const std::vector<int>& question,
                                const std::vector<TurnRecord>& history,
                                const TurnSelection& selection, const Interval& interval, int m,
                                bool slice_video);

// Uni-directional decoder over the given prefix with cross-attention into
// memory. Returns logits, one row per input position.
diff::Var decoder_forward(diff::Tape& t, diff::ParamBinder& p, const ModelConfig& cfg,
                          diff::Var memory, const std::vector<double>& memory_key,
                          const std::vector<int>& input_ids);

struct DecodeOut {
  diff::Var logits;   // (len-1) x vocab
  diff::Var loss;     // mean token-level CE, teacher forcing
};

// gold must begin with BOS and end with EOS; sequences beyond the decoder cap
// are truncated with a warning.
DecodeOut decode_train(diff::Tape& t, diff::ParamBinder& p, const ModelConfig& cfg,
                       diff::Var memory, const std::vector<double>& memory_key,
                       std::vector<int> gold);

// Log-probabilities over the vocabulary for the next token after `prefix`
// (prefix includes BOS).
using StepScorer = std::function<std::vector<double>(const std::vector<int>& prefix)>;

struct BeamHypothesis {
  std::vector<int> tokens;  // includes BOS, and EOS when finished naturally
  double logp = 0.0;
  int generated = 0;
  bool finished = false;

  double normalized() const { return generated > 0 ? logp / generated : logp; }
};

// Returns the finished hypothesis with the best length-normalized score.
// beam_size=1 is exactly greedy decoding.
std::vector<int> beam_search(const StepScorer& scorer, int vocab, int beam_size, int max_len);

StepScorer make_decoder_scorer(diff::Tape& t, diff::ParamBinder& p, const ModelConfig& cfg,
                               diff::Var memory, const std::vector<double>& memory_key);

}  // namespace dtg::model
