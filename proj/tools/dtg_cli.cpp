// Command-line front end. Talks to the library exclusively through the public
// C interface in dtg/dtg.h.
#include <cstdio>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dtg/dtg.h"
#include "json.hpp"

namespace {

using nlohmann::json;

// Options shared by every subcommand; folded into a JSON overrides blob.
struct CommonOpts {
  std::string config_path;
  std::string seed;     // empty = keep config value
  std::string toggles;  // e.g. "ts,vm,c" or "none"; empty = keep config value
  std::vector<std::string> sets;  // raw key-path overrides: a.b.c=value

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed, "master random seed");
    cmd->add_option("--toggles", toggles,
                    "enabled components from {ts,vm,c}, comma separated ('none' disables all)");
    cmd->add_option("--set", sets, "extra config override, key.path=json-value")
        ->take_all();
  }

  std::string overrides_json() const {
    json j = json::object();
    if (!seed.empty()) j["seed"] = std::stoull(seed);
    if (!toggles.empty()) {
      bool ts = false, vm = false, c = false;
      std::istringstream ss(toggles);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item == "ts") ts = true;
        else if (item == "vm") vm = true;
        else if (item == "c") c = true;
        else if (item != "none" && !item.empty())
          throw CLI::ValidationError("--toggles", "unknown toggle: " + item);
      }
      j["toggles"] = {{"ts", ts}, {"vm", vm}, {"c", c}};
    }
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw CLI::ValidationError("--set", "expected key.path=value, got " + kv);
      json* node = &j;
      std::istringstream ks(kv.substr(0, eq));
      std::string part, prev;
      bool first = true;
      while (std::getline(ks, part, '.')) {
        if (!first) node = &((*node)[prev]);
        prev = part;
        first = false;
      }
      (*node)[prev] = json::parse(kv.substr(eq + 1));
    }
    return j.dump();
  }
};

struct CtxDeleter {
  void operator()(dtg_ctx* c) const { dtg_ctx_destroy(c); }
};
using CtxPtr = std::unique_ptr<dtg_ctx, CtxDeleter>;

CtxPtr make_ctx(const CommonOpts& common) {
  dtg_ctx* raw = nullptr;
  const dtg_status rc =
      dtg_ctx_create(common.config_path.empty() ? nullptr : common.config_path.c_str(),
                     common.overrides_json().c_str(), &raw);
  CtxPtr ctx(raw);
  if (rc != DTG_OK) {
    std::fprintf(stderr, "error: %s\n", ctx ? dtg_ctx_error(ctx.get()) : "context creation failed");
    std::exit(1);
  }
  return ctx;
}

int finish(dtg_ctx* ctx, dtg_status rc, char* owned_output) {
  if (rc != DTG_OK) {
    std::fprintf(stderr, "error: %s\n", dtg_ctx_error(ctx));
    dtg_string_free(owned_output);
    return 1;
  }
  if (owned_output) {
    std::fputs(owned_output, stdout);
    const size_t len = std::string(owned_output).size();
    if (len == 0 || owned_output[len - 1] != '\n') std::fputc('\n', stdout);
    dtg_string_free(owned_output);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual temporal grounding video-dialog toolkit"};
  app.require_subcommand(1);

  CommonOpts common;
  std::string data_dir, out_dir, split = "test", resume, ckpt, video_id;
  std::string hyp_path, ref_path, seeds = "1,2,3,4,5";
  int turn_idx = -1;
  bool oracle = false;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  common.attach(gen);
  gen->add_option("--out", out_dir, "output directory")->required();

  CLI::App* train = app.add_subcommand("train", "run the two-stage training loop");
  common.attach(train);
  train->add_option("--data", data_dir, "corpus directory")->required();
  train->add_option("--out", out_dir, "checkpoint/log directory")->required();
  train->add_option("--resume", resume, "checkpoint to continue from");

  CLI::App* ground = app.add_subcommand("ground", "temporal grounding for every turn");
  common.attach(ground);
  ground->add_option("--data", data_dir, "corpus directory")->required();
  ground->add_option("--split", split, "corpus split (default test)");
  ground->add_option("--ckpt", ckpt, "checkpoint file")->required();

  CLI::App* answer = app.add_subcommand("answer", "beam-search answer for one turn");
  common.attach(answer);
  answer->add_option("--data", data_dir, "corpus directory")->required();
  answer->add_option("--split", split, "corpus split (default test)");
  answer->add_option("--ckpt", ckpt, "checkpoint file")->required();
  answer->add_option("--video", video_id, "video id (default: first dialog)");
  answer->add_option("--turn", turn_idx, "turn index, -1 = final turn");
  answer->add_flag("--oracle", oracle, "use ground-truth intervals");

  CLI::App* eval = app.add_subcommand("eval", "score a checkpoint or parallel token files");
  common.attach(eval);
  eval->add_option("--data", data_dir, "corpus directory");
  eval->add_option("--split", split, "corpus split (default test)");
  eval->add_option("--ckpt", ckpt, "checkpoint file");
  eval->add_option("--hyp", hyp_path, "hypothesis file, one sentence per line");
  eval->add_option("--ref", ref_path, "reference file, parallel to --hyp");
  eval->add_flag("--oracle", oracle, "use ground-truth intervals");

  CLI::App* ablate = app.add_subcommand("ablate", "component ablation table");
  common.attach(ablate);
  ablate->add_option("--data", data_dir, "corpus directory")->required();
  ablate->add_option("--seeds", seeds, "comma-separated seed list (default 1,2,3,4,5)");

  CLI::App* stats = app.add_subcommand("stats", "interval coverage histogram");
  common.attach(stats);
  stats->add_option("--data", data_dir, "corpus directory")->required();
  stats->add_option("--split", split, "corpus split (default test)");
  stats->add_option("--ckpt", ckpt, "score predicted intervals from this checkpoint");

  CLI11_PARSE(app, argc, argv);

  CtxPtr ctx = make_ctx(common);
  char* out = nullptr;
  dtg_status rc = DTG_OK;

  if (gen->parsed()) {
    rc = dtg_gen_data(ctx.get(), out_dir.c_str());
  } else if (train->parsed()) {
    rc = dtg_train(ctx.get(), data_dir.c_str(), out_dir.c_str(),
                   resume.empty() ? nullptr : resume.c_str());
  } else if (ground->parsed()) {
    rc = dtg_ground(ctx.get(), data_dir.c_str(), split.c_str(), ckpt.c_str(), &out);
  } else if (answer->parsed()) {
    rc = dtg_answer(ctx.get(), data_dir.c_str(), split.c_str(), ckpt.c_str(),
                    video_id.empty() ? nullptr : video_id.c_str(), turn_idx, oracle ? 1 : 0,
                    &out);
  } else if (eval->parsed()) {
    if (!hyp_path.empty() || !ref_path.empty())
      rc = dtg_eval_files(ctx.get(), hyp_path.c_str(), ref_path.c_str(), &out);
    else
      rc = dtg_evaluate(ctx.get(), data_dir.c_str(), split.c_str(), ckpt.c_str(),
                        oracle ? 1 : 0, &out);
  } else if (ablate->parsed()) {
    rc = dtg_ablate(ctx.get(), data_dir.c_str(), seeds.c_str(), &out);
  } else if (stats->parsed()) {
    rc = dtg_stats_coverage(ctx.get(), data_dir.c_str(), split.c_str(),
                            ckpt.empty() ? nullptr : ckpt.c_str(), &out);
  }

  return finish(ctx.get(), rc, out);
}
