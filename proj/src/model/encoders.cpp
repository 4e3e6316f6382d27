#include "model/encoders.hpp"

#include <cmath>

namespace dtg::model {

using diff::ParamBinder;
using diff::ParamStore;
using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {

constexpr double kInitStd = 0.02;

void init_linear(ParamStore& s, std::mt19937_64& rng, const std::string& name, int in, int out) {
  s.create(name + "_w", Tensor::randn(rng, {in, out}, kInitStd));
  s.create(name + "_b", Tensor::zeros({out}));
}

void init_layer_norm(ParamStore& s, const std::string& name, int d) {
  s.create(name + "_g", Tensor::full({d}, 1.0));
  s.create(name + "_b", Tensor::zeros({d}));
}

void init_attention(ParamStore& s, std::mt19937_64& rng, const std::string& pfx, int d) {
  for (const char* part : {"wq", "wk", "wv", "wo"})
    s.create(pfx + "." + part, Tensor::randn(rng, {d, d}, kInitStd));
  for (const char* part : {"bq", "bk", "bv", "bo"}) s.create(pfx + "." + part, Tensor::zeros({d}));
}

void init_encoder_stack(ParamStore& s, std::mt19937_64& rng, const std::string& pfx, int layers,
                        int d) {
  for (int i = 0; i < layers; ++i) {
    const std::string lp = pfx + "." + std::to_string(i);
    init_attention(s, rng, lp + ".self", d);
    init_layer_norm(s, lp + ".ln1", d);
    init_layer_norm(s, lp + ".ln2", d);
    init_linear(s, rng, lp + ".ff1", d, 4 * d);
    init_linear(s, rng, lp + ".ff2", 4 * d, d);
  }
}

Var linear(Tape& t, ParamBinder& p, const std::string& name, Var x) {
  return t.add_rowvec(t.matmul(x, p(name + "_w")), p(name + "_b"));
}

Var feed_forward(Tape& t, ParamBinder& p, const std::string& lp, Var x) {
  return linear(t, p, lp + ".ff2", t.relu(linear(t, p, lp + ".ff1", x)));
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams mp;
  mp.cfg = cfg;
  std::mt19937_64 rng(seed);
  ParamStore& s = mp.store;
  const int d = cfg.d;

  const int max_text = 2 + cfg.question_cap + cfg.history_cap + 2;
  s.create("tok_emb", Tensor::randn(rng, {cfg.vocab_size, d}, kInitStd));
  s.create("pos_text", Tensor::randn(rng, {max_text, d}, kInitStd));
  s.create("pos_video", Tensor::randn(rng, {cfg.video_cap, d}, kInitStd));
  s.create("pos_dec", Tensor::randn(rng, {cfg.decoder_cap, d}, kInitStd));
  init_linear(s, rng, "vid_proj", cfg.d_v, d);

  init_encoder_stack(s, rng, "text", cfg.text_layers, d);
  init_encoder_stack(s, rng, "video", cfg.video_layers, d);
  init_encoder_stack(s, rng, "cross", cfg.cross_layers, d);

  // decoder: self-attention + cross-attention + feed-forward per layer
  for (int i = 0; i < cfg.decoder_layers; ++i) {
    const std::string lp = "dec." + std::to_string(i);
    init_attention(s, rng, lp + ".self", d);
    init_attention(s, rng, lp + ".cross", d);
    init_layer_norm(s, lp + ".ln1", d);
    init_layer_norm(s, lp + ".ln2", d);
    init_layer_norm(s, lp + ".ln3", d);
    init_linear(s, rng, lp + ".ff1", d, 4 * d);
    init_linear(s, rng, lp + ".ff2", 4 * d, d);
  }
  init_linear(s, rng, "dec_out", d, cfg.vocab_size);

  // grounding heads: conv1d mask head, linear start/end span heads
  s.create("mask_conv_k", Tensor::randn(rng, {3, d, 1}, kInitStd));
  s.create("mask_conv_b", Tensor::zeros({1}));
  init_linear(s, rng, "start", d, 1);
  init_linear(s, rng, "end", d, 1);
  return mp;
}

Tensor attn_mask_from_key(int rows, const std::vector<double>& key) {
  Tensor mask = Tensor::zeros({rows, static_cast<int>(key.size())});
  for (int i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < key.size(); ++j)
      mask.values[static_cast<std::size_t>(i) * key.size() + j] = key[j];
  return mask;
}

Var attention(Tape& t, ParamBinder& p, const std::string& prefix, Var q_in, Var kv_in,
              const Tensor& mask, int heads) {
  const int d = t.value(q_in).cols();
  if (d % heads != 0) throw Error("attention: d not divisible by head count");
  const int dh = d / heads;
  Var q = t.add_rowvec(t.matmul(q_in, p(prefix + ".wq")), p(prefix + ".bq"));
  Var k = t.add_rowvec(t.matmul(kv_in, p(prefix + ".wk")), p(prefix + ".bk"));
  Var v = t.add_rowvec(t.matmul(kv_in, p(prefix + ".wv")), p(prefix + ".bv"));
  std::vector<Var> ctx;
  ctx.reserve(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    Var qh = t.col_slice(q, h * dh, dh);
    Var kh = t.col_slice(k, h * dh, dh);
    Var vh = t.col_slice(v, h * dh, dh);
    Var scores = t.scale(t.matmul_nt(qh, kh), scale);
    Var weights = t.masked_softmax(scores, mask);
    ctx.push_back(t.matmul(weights, vh));
  }
  return t.add_rowvec(t.matmul(t.concat_cols(ctx), p(prefix + ".wo")), p(prefix + ".bo"));
}

Var encoder_layer(Tape& t, ParamBinder& p, const std::string& prefix, Var x,
                  const Tensor& attn_mask, int heads) {
  Var a = attention(t, p, prefix + ".self", x, x, attn_mask, heads);
  Var h = t.layer_norm(t.add(x, a), p(prefix + ".ln1_g"), p(prefix + ".ln1_b"));
  Var f = feed_forward(t, p, prefix, h);
  return t.layer_norm(t.add(h, f), p(prefix + ".ln2_g"), p(prefix + ".ln2_b"));
}

std::vector<int> build_text_input(const ModelConfig& cfg, const std::vector<int>& question,
                                  const std::vector<std::vector<int>>& history_turns) {
  if (question.empty()) throw Error("empty question");
  std::vector<int> ids;
  ids.push_back(kBos);
  for (std::size_t i = 0; i < question.size() && i < static_cast<std::size_t>(cfg.question_cap); ++i)
    ids.push_back(question[i]);
  ids.push_back(kSep);
  std::vector<int> hist;
  for (std::size_t i = 0; i < history_turns.size(); ++i) {
    if (i) hist.push_back(kSep);
    for (int tok : history_turns[i]) hist.push_back(tok);
  }
  // keep the most recent history when over the cap
  if (static_cast<int>(hist.size()) > cfg.history_cap)
    hist.erase(hist.begin(), hist.end() - cfg.history_cap);
  if (!hist.empty()) {
    ids.insert(ids.end(), hist.begin(), hist.end());
    ids.push_back(kSep);
  }
  return ids;
}

Encoded encode_text(Tape& t, ParamBinder& p, const ModelConfig& cfg, const std::vector<int>& ids) {
  if (ids.empty()) throw Error("encode_text: empty token sequence");
  const int n = static_cast<int>(ids.size());
  std::vector<double> key(n, 1.0);
  for (int i = 0; i < n; ++i) {
    if (ids[i] < 0 || ids[i] >= cfg.vocab_size) throw Error("encode_text: token id out of range");
    if (ids[i] == kPad) key[i] = 0.0;
  }
  std::vector<int> pos(n);
  for (int i = 0; i < n; ++i) pos[i] = i;
  Var x = t.add(t.embedding(p("tok_emb"), ids), t.embedding(p("pos_text"), pos));
  const Tensor mask = attn_mask_from_key(n, key);
  for (int l = 0; l < cfg.text_layers; ++l)
    x = encoder_layer(t, p, "text." + std::to_string(l), x, mask, cfg.heads);
  // PAD rows contribute nothing to pooled statistics downstream
  x = t.mul_rowmask(x, key);
  return {x, key};
}

Encoded encode_video(Tape& t, ParamBinder& p, const ModelConfig& cfg, const Tensor& features,
                     const std::vector<double>& frame_mask) {
  if (features.rank() != 2 || features.shape[1] != cfg.d_v)
    throw Error("encode_video: feature dimension mismatch, expected d_v=" +
                std::to_string(cfg.d_v));
  const int m = features.shape[0];
  if (m < 1) throw Error("encode_video: empty video");
  if (m > cfg.video_cap) throw Error("encode_video: video longer than cap");
  if (static_cast<int>(frame_mask.size()) != m) throw Error("encode_video: mask length mismatch");
  std::vector<int> pos(m);
  for (int i = 0; i < m; ++i) pos[i] = i;
  Var x = t.add(linear(t, p, "vid_proj", t.constant(features)), t.embedding(p("pos_video"), pos));
  const Tensor mask = attn_mask_from_key(m, frame_mask);
  for (int l = 0; l < cfg.video_layers; ++l)
    x = encoder_layer(t, p, "video." + std::to_string(l), x, mask, cfg.heads);
  return {x, frame_mask};
}

Var concat_features(Tape& t, Var text, Var video) {
  if (t.value(text).cols() != t.value(video).cols())
    throw Error("concat_features: hidden size mismatch");
  return t.concat_rows(text, video);
}

Var cross_encode(Tape& t, ParamBinder& p, const ModelConfig& cfg, Var combined,
                 const std::vector<double>& key_mask) {
  const int rows = t.value(combined).rows();
  if (static_cast<int>(key_mask.size()) != rows) throw Error("cross_encode: key mask length mismatch");
  bool any = false;
  for (double v : key_mask) any = any || v == 1.0;
  if (!any) throw Error("cross_encode: all-zero key mask");
  const Tensor mask = attn_mask_from_key(rows, key_mask);
  Var x = combined;
  for (int l = 0; l < cfg.cross_layers; ++l)
    x = encoder_layer(t, p, "cross." + std::to_string(l), x, mask, cfg.heads);
  return x;
}

}  // namespace dtg::model
