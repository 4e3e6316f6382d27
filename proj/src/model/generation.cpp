#include "model/generation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace dtg::model {

using diff::ParamBinder;
using diff::Tape;
using diff::Tensor;
using diff::Var;

std::vector<double> video_attention_mask(const Interval& interval, int m) {
  if (m < 1) throw Error("video_attention_mask: empty video");
  int lo = static_cast<int>(std::floor(interval.start));
  int hi = static_cast<int>(std::ceil(interval.end));
  lo = std::clamp(lo, 0, m - 1);
  hi = std::clamp(hi, 0, m - 1);
  if (lo > hi) std::swap(lo, hi);
  std::vector<double> mask(m, 0.0);
  for (int j = lo; j <= hi; ++j) mask[j] = 1.0;
  return mask;
}

AssembledInputs assemble_inputs(const ModelConfig& cfg, const std::vector<int>& question,
                                const std::vector<TurnRecord>& history,
                                const TurnSelection& selection, const Interval& interval, int m,
                                bool slice_video) {
  if (question.empty()) throw Error("assemble_inputs: empty question");
  std::vector<std::vector<int>> turns;
  for (int idx : selection.chosen) {
    const TurnRecord* rec = nullptr;
    for (const TurnRecord& r : history)
      if (r.turn_index == idx) rec = &r;
    if (!rec) throw Error("assemble_inputs: selected turn not in history");
    std::vector<int> qa = rec->question;
    qa.push_back(kSep);
    qa.insert(qa.end(), rec->answer.begin(), rec->answer.end());
    turns.push_back(std::move(qa));
  }
  AssembledInputs out;
  out.text_ids = build_text_input(cfg, question, turns);
  out.video_mask = video_attention_mask(interval, m);
  if (slice_video) {
    int lo = 0;
    while (lo < m && out.video_mask[lo] == 0.0) ++lo;
    int hi = m - 1;
    while (hi >= 0 && out.video_mask[hi] == 0.0) --hi;
    out.slice_start = lo;
    out.slice_len = hi - lo + 1;
  }
  return out;
}

Var decoder_forward(Tape& t, ParamBinder& p, const ModelConfig& cfg, Var memory,
                    const std::vector<double>& memory_key, const std::vector<int>& input_ids) {
  const int len = static_cast<int>(input_ids.size());
  if (len < 1) throw Error("decoder_forward: empty input");
  if (len > cfg.decoder_cap) throw Error("decoder_forward: input beyond decoder cap");
  std::vector<int> pos(len);
  for (int i = 0; i < len; ++i) pos[i] = i;
  Var x = t.add(t.embedding(p("tok_emb"), input_ids), t.embedding(p("pos_dec"), pos));

  Tensor causal = Tensor::zeros({len, len});
  for (int i = 0; i < len; ++i)
    for (int j = 0; j <= i; ++j) causal.at(i, j) = 1.0;
  const Tensor cross_mask = attn_mask_from_key(len, memory_key);

  for (int l = 0; l < cfg.decoder_layers; ++l) {
    const std::string lp = "dec." + std::to_string(l);
    Var a = attention(t, p, lp + ".self", x, x, causal, cfg.heads);
    x = t.layer_norm(t.add(x, a), p(lp + ".ln1_g"), p(lp + ".ln1_b"));
    Var c = attention(t, p, lp + ".cross", x, memory, cross_mask, cfg.heads);
    x = t.layer_norm(t.add(x, c), p(lp + ".ln2_g"), p(lp + ".ln2_b"));
    Var f = t.add_rowvec(
        t.matmul(t.relu(t.add_rowvec(t.matmul(x, p(lp + ".ff1_w")), p(lp + ".ff1_b"))),
                 p(lp + ".ff2_w")),
        p(lp + ".ff2_b"));
    x = t.layer_norm(t.add(x, f), p(lp + ".ln3_g"), p(lp + ".ln3_b"));
  }
  return t.add_rowvec(t.matmul(x, p("dec_out_w")), p("dec_out_b"));
}

DecodeOut decode_train(Tape& t, ParamBinder& p, const ModelConfig& cfg, Var memory,
                       const std::vector<double>& memory_key, std::vector<int> gold) {
  if (gold.size() < 2 || gold.front() != kBos || gold.back() != kEos)
    throw Error("decode_train: gold must begin with BOS and end with EOS");
  if (static_cast<int>(gold.size()) > cfg.decoder_cap + 1) {
    std::cerr << "[dtg] warning: gold answer truncated to decoder cap " << cfg.decoder_cap
              << "\n";
    gold.resize(cfg.decoder_cap);
    gold.back() = kEos;
  }
  const std::vector<int> input(gold.begin(), gold.end() - 1);
  const std::vector<int> targets(gold.begin() + 1, gold.end());
  Var logits = decoder_forward(t, p, cfg, memory, memory_key, input);

  const int len = static_cast<int>(targets.size());
  const Tensor ones = Tensor::full({len, cfg.vocab_size}, 1.0);
  Var probs = t.masked_softmax(logits, ones);
  Var total;
  int counted = 0;
  for (int i = 0; i < len; ++i) {
    if (targets[i] == kPad) continue;  // PAD positions excluded from the loss
    Var row = t.reshape(t.slice_rows(probs, i, 1), {cfg.vocab_size});
    Var ce = t.ce_index(row, targets[i]);
    total = counted == 0 ? ce : t.add(total, ce);
    ++counted;
  }
  if (counted == 0) throw Error("decode_train: no unpadded target tokens");
  return {logits, t.scale(total, 1.0 / counted)};
}

std::vector<int> beam_search(const StepScorer& scorer, int vocab, int beam_size, int max_len) {
  if (beam_size < 1) throw Error("beam_search: beam_size must be >= 1");
  if (max_len < 1) throw Error("beam_search: max_len must be >= 1");
  std::vector<BeamHypothesis> live{{{kBos}, 0.0, 0, false}};
  std::vector<BeamHypothesis> finished;

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<BeamHypothesis> candidates;
    for (const BeamHypothesis& h : live) {
      const std::vector<double> logp = scorer(h.tokens);
      if (static_cast<int>(logp.size()) != vocab)
        throw Error("beam_search: scorer returned wrong vocabulary size");
      for (int tok = 0; tok < vocab; ++tok) {
        BeamHypothesis next = h;
        next.tokens.push_back(tok);
        next.logp += logp[tok];
        next.generated += 1;
        next.finished = (tok == kEos);
        candidates.push_back(std::move(next));
      }
    }
    // deterministic order: score desc, then token sequence asc
    std::sort(candidates.begin(), candidates.end(),
              [](const BeamHypothesis& a, const BeamHypothesis& b) {
                if (a.logp != b.logp) return a.logp > b.logp;
                return a.tokens < b.tokens;
              });
    if (static_cast<int>(candidates.size()) > beam_size) candidates.resize(beam_size);
    live.clear();
    for (BeamHypothesis& c : candidates) {
      if (c.finished)
        finished.push_back(std::move(c));
      else
        live.push_back(std::move(c));
    }
  }
  // hypotheses that hit the length cap compete as-is
  for (BeamHypothesis& h : live) finished.push_back(std::move(h));
  if (finished.empty()) throw Error("beam_search: no hypotheses");
  const BeamHypothesis* best = &finished[0];
  for (const BeamHypothesis& h : finished) {
    if (h.normalized() > best->normalized() ||
        (h.normalized() == best->normalized() && h.tokens < best->tokens))
      best = &h;
  }
  return best->tokens;
}

StepScorer make_decoder_scorer(Tape& t, ParamBinder& p, const ModelConfig& cfg, Var memory,
                               const std::vector<double>& memory_key) {
  return [&t, &p, cfg, memory, memory_key](const std::vector<int>& prefix) {
    std::vector<int> input = prefix;
    if (static_cast<int>(input.size()) > cfg.decoder_cap)
      input.erase(input.begin(), input.end() - cfg.decoder_cap);
    Var logits = decoder_forward(t, p, cfg, memory, memory_key, input);
    const Tensor& lv = t.value(logits);
    const int vocab = lv.cols();
    const int last = lv.rows() - 1;
    std::vector<double> out(vocab);
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < vocab; ++j) mx = std::max(mx, lv.at(last, j));
    double s = 0.0;
    for (int j = 0; j < vocab; ++j) s += std::exp(lv.at(last, j) - mx);
    const double lse = mx + std::log(s);
    for (int j = 0; j < vocab; ++j) out[j] = lv.at(last, j) - lse;
    return out;
  };
}

}  // namespace dtg::model
