#pragma once

#include <cstdint>
#include <string>

#include "model/encoders.hpp"

namespace dtg::harness {

// Training progress marker stored inside a checkpoint. Stage 1 optimizes the
// grounding objective, stage 2 the generation (+ contrastive) objective.
struct TrainProgress {
  int stage = 1;
  int epoch_in_stage = 0;  // completed epochs within the stage
};

struct Checkpoint {
  std::string config_json;
  model::ModelParams params;
  TrainProgress progress;
  std::string rng_state;  // serialized training rng
};

// Versioned binary file; save -> load -> save is byte-identical and a version
// mismatch refuses to load. Writes are atomic (temp file + rename).
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dtg::harness
