#pragma once

#include <cstdint>
#include <string>

namespace dtg::model {

// Reserved token ids, fixed across every vocabulary.
enum SpecialToken : int { kBos = 0, kEos = 1, kSep = 2, kPad = 3, kNumSpecial = 4 };

struct ModelConfig {
  int d = 64;
  int d_v = 64;
  int heads = 4;
  int text_layers = 2;
  int video_layers = 2;
  int cross_layers = 1;
  int decoder_layers = 1;
  int video_cap = 100;
  int question_cap = 20;
  int history_cap = 60;
  int decoder_cap = 20;
  int vocab_size = 256;
  double alpha = 0.5;      // mask threshold for timestamp derivation
  int k = 3;               // history turns kept by turn selection
  double lambda = 0.2;     // grounding loss ratio
  int beam_size = 5;

  void validate() const;
};

struct ContrastiveConfig {
  bool enabled = true;
  double beta = 0.5;
  double delta = 0.2;
  double margin_ratio = 0.1;
  std::string text_mode = "off";  // "off" | "on"
};

struct TrainConfig {
  double lr = 3e-5;
  int batch_size = 16;
  int epochs = 8;
  int grounding_epochs = -1;   // -1: use epochs
  int generation_epochs = -1;  // -1: use epochs
  bool joint = false;          // single stage over the summed objective
  bool slice_video = false;    // physically slice V_use instead of masking
};

struct Toggles {
  bool ts = true;
  bool vm = true;
  bool c = true;
};

struct DataConfig {
  int d_v = 64;
  int train_dialogs = 2000;
  int val_dialogs = 200;
  int test_dialogs = 200;
  int m = 32;
  int segments = 4;
  int concepts = 12;
  int attributes = 4;
  double sigma = 0.1;
  double revisit_prob = 0.3;
  int max_turns = 6;            // per-dialog turn count drawn from [2, max_turns]
  double paraphrase_prob = 0.0;
};

struct RunConfig {
  ModelConfig model;
  ContrastiveConfig contrastive;
  TrainConfig train;
  Toggles toggles;
  DataConfig data;
  std::uint64_t seed = 1234;

  void validate() const;

  // JSON round trip. load() starts from defaults, applies the file (optional),
  // then applies overrides (optional); unknown keys are an error.
  static RunConfig load(const std::string& path_or_empty, const std::string& overrides_json);
  std::string to_json() const;
  static RunConfig from_json(const std::string& json_text);
};

}  // namespace dtg::model
