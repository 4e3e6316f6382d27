#include "harness/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace dtg::harness {

namespace {

using data::Corpus;
using data::SyntheticDialog;
using diff::ParamBinder;
using diff::Tape;
using diff::Var;
using model::Interval;
using model::RunConfig;

struct Sample {
  int dialog = 0;
  int turn = 0;
};

struct SampleLoss {
  Var total;
  double l_frame = 0;
  double l_clip = 0;
  double l_generate = 0;
  double l_pos = 0;
  double l_neg = 0;
};

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void rng_from_string(std::mt19937_64& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
  if (!is) throw Error("checkpoint carries an unreadable rng state");
}

SampleLoss grounding_sample(Tape& t, ParamBinder& p, const RunConfig& cfg,
                            const SyntheticDialog& d, int turn_idx) {
  GroundingForward fwd = grounding_forward(t, p, cfg.model, d, turn_idx);
  GroundingLossOut gl = grounding_losses(t, fwd, d.turns[turn_idx], cfg.model.lambda);
  SampleLoss out;
  out.total = gl.total;
  out.l_frame = gl.l_frame;
  out.l_clip = gl.l_clip;
  return out;
}

// Generation training teacher-forces the grounding result: the ground-truth
// interval stands in for the stage-1 prediction (toggles still apply, so VM
// off widens it to the full video and TS off falls back to the nearest turns).
SampleLoss generation_sample(Tape& t, ParamBinder& p, const RunConfig& cfg,
                             const SyntheticDialog& d, int turn_idx, std::mt19937_64& rng) {
  const data::DialogTurn& turn = d.turns[turn_idx];
  const std::vector<model::TurnRecord> history = history_records(d, turn_idx, nullptr);
  const Interval gt{static_cast<double>(turn.ts), static_cast<double>(turn.te)};
  const model::TurnSelection sel = choose_turns(cfg, history, gt);
  const Interval eff = effective_interval(cfg, gt, d.m);
  GenerationForward fwd = generation_forward(t, p, cfg, d, turn_idx, sel, eff);
  model::DecodeOut dec =
      model::decode_train(t, p, cfg.model, fwd.m_use, fwd.key_mask, gold_sequence(turn));

  SampleLoss out;
  out.l_generate = t.value(dec.loss).item();
  if (!(cfg.toggles.c && cfg.contrastive.enabled)) {
    out.total = dec.loss;  // delta treated as 0
    return out;
  }

  model::ClipSampleSet clips = model::sample_clips(gt, d.m, cfg.contrastive.margin_ratio, rng);
  const std::vector<double> pos_mask = model::video_attention_mask(clips.positive, d.m);
  const std::vector<double> neg_mask = model::video_attention_mask(clips.negative, d.m);
  Var use = pooled_representation(t, fwd);
  Var pos = pooled_video_variant(t, p, cfg, d, fwd, pos_mask);
  Var neg = pooled_video_variant(t, p, cfg, d, fwd, neg_mask);
  model::ContrastiveLosses cl = model::contrastive_loss(t, use, pos, neg, cfg.contrastive.beta);
  Var contrast = cl.total;

  if (cfg.contrastive.text_mode == "on") {
    if (auto pair = model::sample_turn_contrast(history, sel)) {
      Var tpos = pooled_text_variant(t, p, cfg, d, turn_idx, pair->positive_turns, fwd);
      Var tneg = pooled_text_variant(t, p, cfg, d, turn_idx, pair->negative_turns, fwd);
      model::ContrastiveLosses tcl =
          model::contrastive_loss(t, use, tpos, tneg, cfg.contrastive.beta);
      contrast = t.scale(t.add(contrast, tcl.total), 0.5);
    }
  }
  out.l_pos = t.value(cl.l_pos).item();
  out.l_neg = t.value(cl.l_neg).item();
  out.total = model::final_loss(t, dec.loss, contrast, cfg.contrastive.delta);
  return out;
}

SampleLoss joint_sample(Tape& t, ParamBinder& p, const RunConfig& cfg, const SyntheticDialog& d,
                        int turn_idx, std::mt19937_64& rng) {
  SampleLoss g = grounding_sample(t, p, cfg, d, turn_idx);
  SampleLoss f = generation_sample(t, p, cfg, d, turn_idx, rng);
  f.total = t.add(g.total, f.total);
  f.l_frame = g.l_frame;
  f.l_clip = g.l_clip;
  return f;
}

void check_component(double v, const char* name, long step) {
  if (!std::isfinite(v))
    throw Error(std::string("training aborted: non-finite ") + name + " at step " +
                std::to_string(step));
}

}  // namespace

std::string loss_log_csv(const std::vector<StepLog>& log) {
  std::ostringstream os;
  os << "step,stage,epoch,total,l_frame,l_clip,l_generate,l_pos,l_neg\n";
  os.precision(17);
  for (const StepLog& r : log)
    os << r.step << ',' << r.stage << ',' << r.epoch << ',' << r.total << ',' << r.l_frame << ','
       << r.l_clip << ',' << r.l_generate << ',' << r.l_pos << ',' << r.l_neg << '\n';
  return os.str();
}

TrainResult train(const model::RunConfig& cfg, const data::Corpus& train_set,
                  const TrainOptions& opts) {
  cfg.validate();
  if (train_set.empty()) throw Error("train: empty dataset");

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  std::mt19937_64 rng;
  const bool resuming = !opts.resume_path.empty();
  if (resuming) {
    ckpt = load_checkpoint(opts.resume_path);
    if (ckpt.config_json != cfg.to_json())
      throw Error("resume refused: checkpoint was written under a different config");
    rng_from_string(rng, ckpt.rng_state);
  } else {
    ckpt.config_json = cfg.to_json();
    ckpt.params = model::ModelParams::init(cfg.model, cfg.seed);
    if (opts.start_from) {
      const auto& src = opts.start_from->params.store.entries();
      auto& dst = ckpt.params.store.entries();
      if (src.size() != dst.size())
        throw Error("warm start refused: parameter sets differ");
      auto dit = dst.begin();
      for (auto sit = src.begin(); sit != src.end(); ++sit, ++dit) {
        if (sit->first != dit->first || sit->second.value.size() != dit->second.value.size())
          throw Error("warm start refused: parameter " + sit->first + " does not match");
        dit->second = sit->second;
      }
      ckpt.params.store.set_step_count(opts.start_from->params.store.step_count());
    }
    ckpt.progress = TrainProgress{1, 0};
    rng.seed(diff::mix_seed(cfg.seed, 0x747261696eULL));
    ckpt.rng_state = rng_to_string(rng);
  }

  std::string ckpt_path;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    ckpt_path = opts.out_dir + "/checkpoint.bin";
  }

  std::vector<Sample> all_samples;
  for (int di = 0; di < static_cast<int>(train_set.size()); ++di)
    for (int ti = 0; ti < static_cast<int>(train_set[di].turns.size()); ++ti)
      all_samples.push_back(Sample{di, ti});

  const diff::AdamSettings adam{cfg.train.lr, 0.9, 0.999, 1e-8};

  // Runs one stage from the checkpointed epoch mark. Returns false when the
  // per-stage step cap fired (the caller then stops entirely).
  const auto run_stage = [&](int stage, int total_epochs, const auto& sample_loss) -> bool {
    if (ckpt.progress.stage > stage) return true;  // already finished earlier
    long steps_in_stage = 0;
    for (int e = ckpt.progress.epoch_in_stage; e < total_epochs; ++e) {
      std::vector<Sample> order = all_samples;
      std::shuffle(order.begin(), order.end(), rng);
      std::size_t i = 0;
      while (i < order.size()) {
        const std::size_t bsz =
            std::min<std::size_t>(static_cast<std::size_t>(cfg.train.batch_size),
                                  order.size() - i);
        ckpt.params.store.zero_grad();
        StepLog rec;
        rec.stage = stage;
        rec.epoch = e;
        for (std::size_t b = 0; b < bsz; ++b) {
          const Sample& s = order[i + b];
          Tape t;
          ParamBinder p(t, ckpt.params.store);
          SampleLoss sl = sample_loss(t, p, train_set[s.dialog], s.turn);
          t.backward(t.scale(sl.total, 1.0 / static_cast<double>(bsz)));
          p.harvest();
          rec.total += t.value(sl.total).item() / static_cast<double>(bsz);
          rec.l_frame += sl.l_frame / static_cast<double>(bsz);
          rec.l_clip += sl.l_clip / static_cast<double>(bsz);
          rec.l_generate += sl.l_generate / static_cast<double>(bsz);
          rec.l_pos += sl.l_pos / static_cast<double>(bsz);
          rec.l_neg += sl.l_neg / static_cast<double>(bsz);
        }
        const long next_step = ckpt.params.store.step_count() + 1;
        check_component(rec.l_frame, "L_frame", next_step);
        check_component(rec.l_clip, "L_clip", next_step);
        check_component(rec.l_generate, "L_generate", next_step);
        check_component(rec.l_pos, "L_pos", next_step);
        check_component(rec.l_neg, "L_neg", next_step);
        check_component(rec.total, "total loss", next_step);
        ckpt.params.store.step(adam);
        rec.step = ckpt.params.store.step_count();
        result.log.push_back(rec);
        ++steps_in_stage;
        i += bsz;
        if (opts.max_steps_per_stage >= 0 && steps_in_stage >= opts.max_steps_per_stage) {
          ckpt.progress = TrainProgress{stage, e};
          ckpt.rng_state = rng_to_string(rng);
          return false;
        }
      }
      ckpt.progress = TrainProgress{stage, e + 1};
      ckpt.rng_state = rng_to_string(rng);
      if (!ckpt_path.empty()) {
        save_checkpoint(ckpt, ckpt_path);
        if (opts.keep_epoch_checkpoints)
          save_checkpoint(ckpt, opts.out_dir + "/checkpoint_stage" + std::to_string(stage) +
                                    "_epoch" + std::to_string(e + 1) + ".bin");
      }
    }
    return true;
  };

  const int base_epochs = cfg.train.epochs;
  bool keep_going = true;
  if (cfg.train.joint) {
    keep_going = run_stage(1, base_epochs, [&](Tape& t, ParamBinder& p,
                                               const SyntheticDialog& d, int ti) {
      return joint_sample(t, p, cfg, d, ti, rng);
    });
    (void)keep_going;
  } else {
    const int g_epochs =
        cfg.train.grounding_epochs >= 0 ? cfg.train.grounding_epochs : base_epochs;
    const int n_epochs =
        cfg.train.generation_epochs >= 0 ? cfg.train.generation_epochs : base_epochs;
    keep_going = run_stage(1, g_epochs, [&](Tape& t, ParamBinder& p, const SyntheticDialog& d,
                                            int ti) { return grounding_sample(t, p, cfg, d, ti); });
    if (keep_going && ckpt.progress.stage == 1) {
      ckpt.progress = TrainProgress{2, 0};
      ckpt.rng_state = rng_to_string(rng);
    }
    if (keep_going)
      run_stage(2, n_epochs, [&](Tape& t, ParamBinder& p, const SyntheticDialog& d, int ti) {
        return generation_sample(t, p, cfg, d, ti, rng);
      });
  }

  if (!ckpt_path.empty()) {
    save_checkpoint(ckpt, ckpt_path);
    result.checkpoint_path = ckpt_path;
    const std::string log_path = opts.out_dir + "/loss_log.csv";
    std::ofstream out(log_path, resuming ? std::ios::app : std::ios::trunc);
    if (!out) throw Error("cannot write loss log: " + log_path);
    std::string csv = loss_log_csv(result.log);
    if (resuming) csv.erase(0, csv.find('\n') + 1);  // drop the repeated header
    out << csv;
  }
  return result;
}

}  // namespace dtg::harness
