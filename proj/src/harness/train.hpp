#pragma once

#include <string>
#include <vector>

#include "harness/checkpoint.hpp"
#include "harness/pipeline.hpp"

namespace dtg::harness {

// One optimizer step in the loss log. Components that do not apply to the
// current stage are zero.
struct StepLog {
  long step = 0;
  int stage = 1;
  int epoch = 0;
  double total = 0;
  double l_frame = 0;
  double l_clip = 0;
  double l_generate = 0;
  double l_pos = 0;
  double l_neg = 0;
};

std::string loss_log_csv(const std::vector<StepLog>& log);

struct TrainOptions {
  std::string out_dir;      // checkpoints + loss log land here; empty = keep in memory
  std::string resume_path;  // load and continue from this checkpoint
  int max_steps_per_stage = -1;  // optimizer-step cap, -1 = unlimited
  bool keep_epoch_checkpoints = false;  // retain a tagged snapshot per epoch
  // Warm start: copy parameters and optimizer state from this checkpoint but
  // restart the stage/epoch schedule under the current config. Unlike
  // resume_path, the config may differ.
  const Checkpoint* start_from = nullptr;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepLog> log;
  std::string checkpoint_path;  // empty when out_dir was empty
};

// Two-stage loop: stage 1 minimizes the grounding objective, stage 2 the
// generation (+ contrastive) objective; `joint` mode sums both in one stage.
// Deterministic given config + seed; per-epoch checkpoints are atomic and a
// resumed run reproduces the uninterrupted loss trajectory bit-exactly.
TrainResult train(const model::RunConfig& cfg, const data::Corpus& train_set,
                  const TrainOptions& opts);

}  // namespace dtg::harness
