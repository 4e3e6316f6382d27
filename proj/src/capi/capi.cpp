#include "dtg/dtg.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "harness/ablate.hpp"
#include "harness/evaluate.hpp"
#include "harness/stats.hpp"
#include "harness/train.hpp"

struct dtg_ctx {
  dtg::model::RunConfig cfg;
  std::string error;
};

namespace {

constexpr const char* kVersion = "0.1.0";

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

struct InvalidArg : dtg::Error {
  using dtg::Error::Error;
};

// Throws when a required pointer argument is null or an empty string.
void require_arg(const char* value, const char* what) {
  if (!value || !*value) throw InvalidArg(std::string(what) + " is required");
}

template <typename Fn>
dtg_status guarded(dtg_ctx* ctx, Fn&& fn) {
  if (!ctx) return DTG_ERR_INVALID_ARG;
  try {
    ctx->error.clear();
    fn();
    return DTG_OK;
  } catch (const InvalidArg& e) {
    ctx->error = e.what();
    return DTG_ERR_INVALID_ARG;
  } catch (const std::exception& e) {
    ctx->error = e.what();
    return DTG_ERR_RUNTIME;
  } catch (...) {
    ctx->error = "unknown error";
    return DTG_ERR_RUNTIME;
  }
}

std::string str_or_empty(const char* s) { return s ? std::string(s) : std::string(); }

dtg::harness::Checkpoint load_params(const char* checkpoint_path) {
  if (!checkpoint_path || !*checkpoint_path)
    throw dtg::Error("a checkpoint path is required");
  return dtg::harness::load_checkpoint(checkpoint_path);
}

// The effective model vocabulary is the corpus vocabulary: the token
// embedding and decoder output width follow the data, not the config default.
dtg::model::RunConfig with_corpus_vocab(const dtg::model::RunConfig& base,
                                        const std::string& data_dir) {
  dtg::model::RunConfig cfg = base;
  cfg.model.vocab_size = dtg::model::Vocab::load(data_dir + "/vocab.json").size();
  cfg.validate();
  return cfg;
}

const dtg::data::SyntheticDialog& find_dialog(const dtg::data::Corpus& split,
                                              const char* video_id) {
  if (!video_id || !*video_id) {
    if (split.empty()) throw dtg::Error("split is empty");
    return split.front();
  }
  for (const auto& d : split)
    if (d.video_id == video_id) return d;
  throw dtg::Error(std::string("no dialog with video id ") + video_id);
}

// Interns whitespace-separated words of each line as integer token sequences
// so text files can be scored without a trained vocabulary.
std::vector<std::vector<int>> read_token_file(const std::string& path,
                                              std::map<std::string, int>& intern) {
  std::ifstream in(path);
  if (!in) throw dtg::Error("cannot open token file: " + path);
  std::vector<std::vector<int>> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<int> sent;
    std::string word;
    while (ls >> word) {
      auto [it, _] = intern.emplace(word, static_cast<int>(intern.size()));
      sent.push_back(it->second);
    }
    out.push_back(std::move(sent));
  }
  return out;
}

}  // namespace

extern "C" {

dtg_status dtg_ctx_create(const char* config_path, const char* overrides_json, dtg_ctx** out) {
  if (!out) return DTG_ERR_INVALID_ARG;
  *out = nullptr;
  auto ctx = new dtg_ctx();
  const dtg_status rc = guarded(ctx, [&] {
    ctx->cfg = dtg::model::RunConfig::load(str_or_empty(config_path),
                                           str_or_empty(overrides_json));
    ctx->cfg.validate();
  });
  if (rc != DTG_OK) {
    delete ctx;
    return rc;
  }
  *out = ctx;
  return DTG_OK;
}

void dtg_ctx_destroy(dtg_ctx* ctx) { delete ctx; }

const char* dtg_ctx_error(const dtg_ctx* ctx) { return ctx ? ctx->error.c_str() : ""; }

const char* dtg_version(void) { return kVersion; }

void dtg_string_free(char* s) { std::free(s); }

dtg_status dtg_gen_data(dtg_ctx* ctx, const char* out_dir) {
  return guarded(ctx, [&] {
    require_arg(out_dir, "gen-data: output directory");
    dtg::data::CorpusGenerator gen(ctx->cfg.data, ctx->cfg.seed);
    dtg::data::write_corpus_dir(gen, out_dir);
  });
}

dtg_status dtg_train(dtg_ctx* ctx, const char* data_dir, const char* out_dir,
                     const char* resume_path) {
  return guarded(ctx, [&] {
    require_arg(data_dir, "train: data directory");
    require_arg(out_dir, "train: output directory");
    const dtg::data::Corpus train_set = dtg::data::read_split(data_dir, "train");
    const dtg::model::RunConfig cfg = with_corpus_vocab(ctx->cfg, data_dir);
    dtg::harness::TrainOptions opts;
    opts.out_dir = out_dir;
    opts.resume_path = str_or_empty(resume_path);
    dtg::harness::train(cfg, train_set, opts);
  });
}

dtg_status dtg_ground(dtg_ctx* ctx, const char* data_dir, const char* split,
                      const char* checkpoint_path, char** out_text) {
  return guarded(ctx, [&] {
    if (!out_text) throw InvalidArg("ground: output pointer is required");
    require_arg(data_dir, "ground: data directory");
    dtg::harness::Checkpoint ckpt = load_params(checkpoint_path);
    const dtg::data::Corpus set = dtg::data::read_split(data_dir, str_or_empty(split));
    const dtg::model::RunConfig cfg = with_corpus_vocab(ctx->cfg, data_dir);
    const auto rows = dtg::harness::ground_corpus(cfg, ckpt.params, set);
    std::string text;
    char line[160];
    for (const auto& r : rows) {
      std::snprintf(line, sizeof line, "%s\t%d\t%.3f\t%.3f\n", r.video_id.c_str(), r.turn_idx,
                    r.tau_s, r.tau_e);
      text += line;
    }
    *out_text = dup_string(text);
  });
}

dtg_status dtg_answer(dtg_ctx* ctx, const char* data_dir, const char* split,
                      const char* checkpoint_path, const char* video_id, int turn_idx,
                      int oracle, char** out_text) {
  return guarded(ctx, [&] {
    if (!out_text) throw InvalidArg("answer: output pointer is required");
    require_arg(data_dir, "answer: data directory");
    dtg::harness::Checkpoint ckpt = load_params(checkpoint_path);
    const std::string dir = str_or_empty(data_dir);
    const dtg::data::Corpus set = dtg::data::read_split(dir, str_or_empty(split));
    const dtg::model::Vocab vocab = dtg::model::Vocab::load(dir + "/vocab.json");
    const auto& dialog = find_dialog(set, video_id);
    const int ti = turn_idx < 0 ? static_cast<int>(dialog.turns.size()) - 1 : turn_idx;
    dtg::model::RunConfig cfg = ctx->cfg;
    cfg.model.vocab_size = vocab.size();
    cfg.validate();
    const std::vector<int> tokens =
        dtg::harness::answer_turn(cfg, ckpt.params, dialog, ti, oracle != 0);
    *out_text = dup_string(vocab.detokenize(tokens));
  });
}

dtg_status dtg_evaluate(dtg_ctx* ctx, const char* data_dir, const char* split,
                        const char* checkpoint_path, int oracle, char** out_json) {
  return guarded(ctx, [&] {
    if (!out_json) throw InvalidArg("eval: output pointer is required");
    require_arg(data_dir, "eval: data directory");
    dtg::harness::Checkpoint ckpt = load_params(checkpoint_path);
    const dtg::data::Corpus set = dtg::data::read_split(data_dir, str_or_empty(split));
    const dtg::model::RunConfig cfg = with_corpus_vocab(ctx->cfg, data_dir);
    dtg::harness::EvalOptions opts;
    opts.oracle = oracle != 0;
    const dtg::harness::EvalResult result =
        dtg::harness::evaluate(cfg, ckpt.params, set, opts);
    *out_json = dup_string(result.report.to_json());
  });
}

dtg_status dtg_eval_files(dtg_ctx* ctx, const char* hyp_path, const char* ref_path,
                          char** out_json) {
  return guarded(ctx, [&] {
    if (!out_json) throw InvalidArg("eval: output pointer is required");
    require_arg(hyp_path, "eval: hypothesis file");
    require_arg(ref_path, "eval: reference file");
    std::map<std::string, int> intern;
    const auto hyps = read_token_file(str_or_empty(hyp_path), intern);
    const auto refs = read_token_file(str_or_empty(ref_path), intern);
    if (hyps.size() != refs.size())
      throw dtg::Error("eval: hypothesis and reference files differ in line count");
    *out_json = dup_string(dtg::metrics::score_corpus(hyps, refs).to_json());
  });
}

dtg_status dtg_ablate(dtg_ctx* ctx, const char* data_dir, const char* seeds_csv, char** out_csv) {
  return guarded(ctx, [&] {
    if (!out_csv) throw InvalidArg("ablate: output pointer is required");
    require_arg(data_dir, "ablate: data directory");
    std::vector<std::uint64_t> seeds;
    std::istringstream ss(str_or_empty(seeds_csv));
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) seeds.push_back(std::stoull(item));
    if (seeds.empty()) throw dtg::Error("ablate: at least one seed is required");
    const dtg::data::Corpus train_set = dtg::data::read_split(data_dir, "train");
    const dtg::data::Corpus test_set = dtg::data::read_split(data_dir, "test");
    const dtg::model::RunConfig cfg = with_corpus_vocab(ctx->cfg, data_dir);
    const auto rows = dtg::harness::ablate(cfg, train_set, test_set, seeds);
    *out_csv = dup_string(dtg::harness::ablation_csv(rows));
  });
}

dtg_status dtg_stats_coverage(dtg_ctx* ctx, const char* data_dir, const char* split,
                              const char* checkpoint_path, char** out_csv) {
  return guarded(ctx, [&] {
    if (!out_csv) throw InvalidArg("stats: output pointer is required");
    require_arg(data_dir, "stats: data directory");
    const dtg::data::Corpus set = dtg::data::read_split(data_dir, str_or_empty(split));
    std::vector<dtg::model::Interval> intervals;
    std::vector<double> lengths;
    if (checkpoint_path && *checkpoint_path) {
      dtg::harness::Checkpoint ckpt = load_params(checkpoint_path);
      const dtg::model::RunConfig cfg = with_corpus_vocab(ctx->cfg, str_or_empty(data_dir));
      const auto rows = dtg::harness::ground_corpus(cfg, ckpt.params, set);
      std::map<std::string, double> video_len;
      for (const auto& d : set) video_len[d.video_id] = static_cast<double>(d.m);
      for (const auto& r : rows) {
        intervals.push_back(dtg::model::Interval{r.tau_s, r.tau_e});
        lengths.push_back(video_len.at(r.video_id));
      }
    } else {
      for (const auto& d : set)
        for (const auto& turn : d.turns) {
          intervals.push_back(dtg::model::Interval{static_cast<double>(turn.ts),
                                                   static_cast<double>(turn.te)});
          lengths.push_back(static_cast<double>(d.m));
        }
    }
    *out_csv = dup_string(dtg::harness::coverage_csv(
        dtg::harness::coverage_histogram(intervals, lengths)));
  });
}

}  // extern "C"
