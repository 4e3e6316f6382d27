#include "model/config.hpp"

#include <fstream>
#include <json.hpp>

#include "diffcore/tensor.hpp"

namespace dtg::model {

using nlohmann::json;

namespace {

// Applies `patch` onto `base` recursively, rejecting keys absent from base so
// config typos fail loudly.
void merge_checked(json& base, const json& patch, const std::string& prefix) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw Error("unknown config key: " + path);
    if (base[it.key()].is_object() && it.value().is_object()) {
      merge_checked(base[it.key()], it.value(), path);
    } else {
      base[it.key()] = it.value();
    }
  }
}

json defaults_json() {
  RunConfig def;
  return json::parse(def.to_json());
}

}  // namespace

void ModelConfig::validate() const {
  if (d <= 0 || d_v <= 0 || heads <= 0 || d % heads != 0)
    throw Error("model: d must be positive and divisible by heads");
  if (alpha <= 0.0 || alpha >= 1.0) throw Error("model: alpha must be in (0,1)");
  if (k < 1) throw Error("model: k must be >= 1");
  if (video_cap < 1 || question_cap < 1 || history_cap < 1 || decoder_cap < 2)
    throw Error("model: invalid length caps");
  if (beam_size < 1) throw Error("model: beam_size must be >= 1");
  if (vocab_size <= kNumSpecial) throw Error("model: vocab_size too small");
}

void RunConfig::validate() const {
  model.validate();
  if (contrastive.beta < 0.0 || contrastive.delta < 0.0 || contrastive.margin_ratio <= 0.0)
    throw Error("contrastive: beta/delta must be >= 0, margin_ratio > 0");
  if (contrastive.text_mode != "off" && contrastive.text_mode != "on")
    throw Error("contrastive: text_mode must be 'off' or 'on'");
  if (train.lr <= 0.0 || train.batch_size < 1 || train.epochs < 0)
    throw Error("train: invalid optimizer settings");
  if (data.segments > data.m) throw Error("data: segments > m");
  if (data.d_v != model.d_v) throw Error("data: d_v must match model d_v");
  if (data.d_v < 8) throw Error("data: d_v too small");
  if (data.max_turns < 1 || data.max_turns > 10) throw Error("data: max_turns must be in [1,10]");
  if (data.m < 2 || data.m > model.video_cap) throw Error("data: m must be in [2, video_cap]");
}

std::string RunConfig::to_json() const {
  json j;
  j["model"] = {{"d", model.d},
                {"d_v", model.d_v},
                {"heads", model.heads},
                {"text_layers", model.text_layers},
                {"video_layers", model.video_layers},
                {"cross_layers", model.cross_layers},
                {"decoder_layers", model.decoder_layers},
                {"video_cap", model.video_cap},
                {"question_cap", model.question_cap},
                {"history_cap", model.history_cap},
                {"decoder_cap", model.decoder_cap},
                {"vocab_size", model.vocab_size},
                {"alpha", model.alpha},
                {"k", model.k},
                {"lambda", model.lambda},
                {"beam_size", model.beam_size}};
  j["contrastive"] = {{"enabled", contrastive.enabled},
                      {"beta", contrastive.beta},
                      {"delta", contrastive.delta},
                      {"margin_ratio", contrastive.margin_ratio},
                      {"text_mode", contrastive.text_mode}};
  j["train"] = {{"lr", train.lr},
                {"batch_size", train.batch_size},
                {"epochs", train.epochs},
                {"grounding_epochs", train.grounding_epochs},
                {"generation_epochs", train.generation_epochs},
                {"joint", train.joint},
                {"slice_video", train.slice_video}};
  j["toggles"] = {{"ts", toggles.ts}, {"vm", toggles.vm}, {"c", toggles.c}};
  j["data"] = {{"d_v", data.d_v},
               {"train_dialogs", data.train_dialogs},
               {"val_dialogs", data.val_dialogs},
               {"test_dialogs", data.test_dialogs},
               {"m", data.m},
               {"segments", data.segments},
               {"concepts", data.concepts},
               {"attributes", data.attributes},
               {"sigma", data.sigma},
               {"revisit_prob", data.revisit_prob},
               {"max_turns", data.max_turns},
               {"paraphrase_prob", data.paraphrase_prob}};
  j["seed"] = seed;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& json_text) {
  json base = defaults_json();
  json patch = json::parse(json_text);
  merge_checked(base, patch, "");

  RunConfig c;
  const json& m = base["model"];
  c.model.d = m["d"];
  c.model.d_v = m["d_v"];
  c.model.heads = m["heads"];
  c.model.text_layers = m["text_layers"];
  c.model.video_layers = m["video_layers"];
  c.model.cross_layers = m["cross_layers"];
  c.model.decoder_layers = m["decoder_layers"];
  c.model.video_cap = m["video_cap"];
  c.model.question_cap = m["question_cap"];
  c.model.history_cap = m["history_cap"];
  c.model.decoder_cap = m["decoder_cap"];
  c.model.vocab_size = m["vocab_size"];
  c.model.alpha = m["alpha"];
  c.model.k = m["k"];
  c.model.lambda = m["lambda"];
  c.model.beam_size = m["beam_size"];
  const json& ct = base["contrastive"];
  c.contrastive.enabled = ct["enabled"];
  c.contrastive.beta = ct["beta"];
  c.contrastive.delta = ct["delta"];
  c.contrastive.margin_ratio = ct["margin_ratio"];
  c.contrastive.text_mode = ct["text_mode"];
  const json& t = base["train"];
  c.train.lr = t["lr"];
  c.train.batch_size = t["batch_size"];
  c.train.epochs = t["epochs"];
  c.train.grounding_epochs = t["grounding_epochs"];
  c.train.generation_epochs = t["generation_epochs"];
  c.train.joint = t["joint"];
  c.train.slice_video = t["slice_video"];
  const json& tg = base["toggles"];
  c.toggles.ts = tg["ts"];
  c.toggles.vm = tg["vm"];
  c.toggles.c = tg["c"];
  const json& d = base["data"];
  c.data.d_v = d["d_v"];
  c.data.train_dialogs = d["train_dialogs"];
  c.data.val_dialogs = d["val_dialogs"];
  c.data.test_dialogs = d["test_dialogs"];
  c.data.m = d["m"];
  c.data.segments = d["segments"];
  c.data.concepts = d["concepts"];
  c.data.attributes = d["attributes"];
  c.data.sigma = d["sigma"];
  c.data.revisit_prob = d["revisit_prob"];
  c.data.max_turns = d["max_turns"];
  c.data.paraphrase_prob = d["paraphrase_prob"];
  c.seed = base["seed"];
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path_or_empty, const std::string& overrides_json) {
  json merged = defaults_json();
  if (!path_or_empty.empty()) {
    std::ifstream in(path_or_empty);
    if (!in) throw Error("cannot open config file: " + path_or_empty);
    json file_cfg = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    merge_checked(merged, file_cfg, "");
  }
  if (!overrides_json.empty()) {
    merge_checked(merged, json::parse(overrides_json), "");
  }
  return from_json(merged.dump());
}

}  // namespace dtg::model
