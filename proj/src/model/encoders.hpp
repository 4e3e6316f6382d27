#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffcore/adam.hpp"
#include "diffcore/tape.hpp"
#include "model/config.hpp"

namespace dtg::model {

// All learnable tensors of the model, keyed by name in a ParamStore.
struct ModelParams {
  ModelConfig cfg;
  diff::ParamStore store;

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
};

// Encoder output plus the key mask downstream attention must honor
// (0 at PAD text positions / masked video frames).
struct Encoded {
  diff::Var h;
  std::vector<double> key_mask;
};

// rows x cols {0,1} attention mask where every query row sees key j iff key[j]==1.
diff::Tensor attn_mask_from_key(int rows, const std::vector<double>& key);

// Multi-head attention block. q_in: n x d, kv_in: m x d, mask: n x m.
diff::Var attention(diff::Tape& t, diff::ParamBinder& p, const std::string& prefix,
                    diff::Var q_in, diff::Var kv_in, const diff::Tensor& mask, int heads);

// Post-LN transformer layer: x + self-attention, then x + feed-forward.
diff::Var encoder_layer(diff::Tape& t, diff::ParamBinder& p, const std::string& prefix,
                        diff::Var x, const diff::Tensor& attn_mask, int heads);

// [BOS] question [SEP] turn_1 ... [SEP], with question/history length caps.
// Each history turn is its question and answer tokens, SEP-joined.
std::vector<int> build_text_input(const ModelConfig& cfg, const std::vector<int>& question,
                                  const std::vector<std::vector<int>>& history_turns);

Encoded encode_text(diff::Tape& t, diff::ParamBinder& p, const ModelConfig& cfg,
                    const std::vector<int>& ids);

Encoded encode_video(diff::Tape& t, diff::ParamBinder& p, const ModelConfig& cfg,
                     const diff::Tensor& features, const std::vector<double>& frame_mask);

// Row-wise concatenation [T; V]; both blocks stay addressable by row index.
diff::Var concat_features(diff::Tape& t, diff::Var text, diff::Var video);

diff::Var cross_encode(diff::Tape& t, diff::ParamBinder& p, const ModelConfig& cfg,
                       diff::Var combined, const std::vector<double>& key_mask);

}  // namespace dtg::model
