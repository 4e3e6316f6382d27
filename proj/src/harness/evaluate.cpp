#include "harness/evaluate.hpp"

#include <atomic>
#include <future>
#include <thread>

namespace dtg::harness {

namespace {

using data::SyntheticDialog;
using diff::ParamBinder;
using diff::Tape;
using model::Interval;
using model::RunConfig;

std::vector<Interval> predict_dialog_intervals(const RunConfig& cfg, model::ModelParams& params,
                                               const SyntheticDialog& d) {
  std::vector<Interval> out;
  for (int ti = 0; ti < static_cast<int>(d.turns.size()); ++ti) {
    Tape t;
    ParamBinder p(t, params.store);
    GroundingForward fwd = grounding_forward(t, p, cfg.model, d, ti);
    out.push_back(predict_interval(t, fwd, cfg.model.alpha).interval);
  }
  return out;
}

std::vector<int> strip_specials(const std::vector<int>& tokens) {
  std::vector<int> out;
  for (int id : tokens)
    if (id >= model::kNumSpecial) out.push_back(id);
  return out;
}

std::vector<int> beam_answer(const RunConfig& cfg, model::ModelParams& params,
                             const SyntheticDialog& d, int turn_idx,
                             const std::vector<Interval>* predicted) {
  const Interval current =
      predicted ? (*predicted)[turn_idx]
                : Interval{static_cast<double>(d.turns[turn_idx].ts),
                           static_cast<double>(d.turns[turn_idx].te)};
  const std::vector<model::TurnRecord> history = history_records(d, turn_idx, predicted);
  const model::TurnSelection sel = choose_turns(cfg, history, current);
  const Interval eff = effective_interval(cfg, current, d.m);
  Tape t;
  ParamBinder p(t, params.store);
  GenerationForward fwd = generation_forward(t, p, cfg, d, turn_idx, sel, eff);
  model::StepScorer scorer =
      model::make_decoder_scorer(t, p, cfg.model, fwd.m_use, fwd.key_mask);
  const std::vector<int> tokens = model::beam_search(scorer, cfg.model.vocab_size,
                                                     cfg.model.beam_size, cfg.model.decoder_cap);
  return strip_specials(tokens);
}

struct DialogEval {
  std::vector<int> hyp;
  std::vector<int> ref;
  std::vector<Interval> pred;
  std::vector<Interval> gt;
};

DialogEval evaluate_dialog(const RunConfig& cfg, model::ModelParams& params,
                           const SyntheticDialog& d, bool oracle) {
  DialogEval out;
  out.pred = predict_dialog_intervals(cfg, params, d);
  for (const data::DialogTurn& turn : d.turns)
    out.gt.push_back(Interval{static_cast<double>(turn.ts), static_cast<double>(turn.te)});
  const int last = static_cast<int>(d.turns.size()) - 1;
  out.hyp = beam_answer(cfg, params, d, last, oracle ? nullptr : &out.pred);
  out.ref = d.turns[last].a;
  return out;
}

}  // namespace

std::vector<GroundingRow> ground_corpus(const RunConfig& cfg, model::ModelParams& params,
                                        const data::Corpus& split) {
  std::vector<GroundingRow> rows;
  for (const SyntheticDialog& d : split) {
    const std::vector<Interval> pred = predict_dialog_intervals(cfg, params, d);
    for (int ti = 0; ti < static_cast<int>(pred.size()); ++ti)
      rows.push_back(GroundingRow{d.video_id, ti, pred[ti].start, pred[ti].end});
  }
  return rows;
}

std::vector<int> answer_turn(const RunConfig& cfg, model::ModelParams& params,
                             const data::SyntheticDialog& d, int turn_idx, bool oracle) {
  if (turn_idx < 0 || turn_idx >= static_cast<int>(d.turns.size()))
    throw Error("answer: turn index out of range");
  if (oracle) return beam_answer(cfg, params, d, turn_idx, nullptr);
  const std::vector<Interval> pred = predict_dialog_intervals(cfg, params, d);
  return beam_answer(cfg, params, d, turn_idx, &pred);
}

EvalResult evaluate(const RunConfig& cfg, model::ModelParams& params, const data::Corpus& split,
                    const EvalOptions& opts) {
  if (split.empty()) throw Error("evaluate: empty split");
  const int n = static_cast<int>(split.size());
  std::vector<DialogEval> per_dialog(n);

  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::future<void>> futures;
  std::atomic<int> next{0};
  for (unsigned w = 0; w < workers; ++w)
    futures.push_back(std::async(std::launch::async, [&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1))
        per_dialog[i] = evaluate_dialog(cfg, params, split[i], opts.oracle);
    }));
  for (auto& f : futures) f.get();

  EvalResult result;
  for (const DialogEval& de : per_dialog) {
    result.hyps.push_back(de.hyp);
    result.refs.push_back(de.ref);
    result.pred_intervals.insert(result.pred_intervals.end(), de.pred.begin(), de.pred.end());
    result.gt_intervals.insert(result.gt_intervals.end(), de.gt.begin(), de.gt.end());
  }
  result.report = metrics::score_corpus(result.hyps, result.refs);
  for (double mu : {0.3, 0.5, 0.7})
    result.report.r_at_1[mu] =
        metrics::recall_at_iou(result.pred_intervals, result.gt_intervals, mu);
  return result;
}

}  // namespace dtg::harness
