#include "data/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>

namespace dtg::data {

using diff::Tensor;
using diff::mix_seed;
using nlohmann::json;

namespace {

const char* kNouns[] = {"ball",  "door",  "lamp",   "dog",   "cat",   "car",
                        "tree",  "book",  "phone",  "chair", "table", "window",
                        "bird",  "train", "clock",  "plant", "shoe",  "glass",
                        "towel", "brush", "spoon",  "radio", "box",   "coat"};
const char* kAttrWords[] = {"red", "blue", "green", "fast", "slow", "bright", "small", "large"};
const char* kFiller[] = {"what", "about", "the", "in", "video", "looks", "seems", "here", "now"};

std::string indexed_name(const char* const* base, int base_count, int i) {
  if (i < base_count) return base[i];
  return std::string(base[i % base_count]) + std::to_string(i / base_count);
}

// random unit vector confined to [lo, hi) dimensions
std::vector<double> subspace_direction(std::mt19937_64& rng, int d_v, int lo, int hi) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(d_v, 0.0);
  double norm = 0.0;
  for (int j = lo; j < hi; ++j) {
    v[j] = normal(rng);
    norm += v[j] * v[j];
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) v[lo] = 1.0;
  else
    for (int j = lo; j < hi; ++j) v[j] /= norm;
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

constexpr double kMaxPairDot = 0.7;  // min-angle separation between directions
constexpr double kAttrScale = 0.5;

}  // namespace

CorpusGenerator::CorpusGenerator(const model::DataConfig& cfg, std::uint64_t master_seed)
    : cfg_(cfg), master_seed_(master_seed) {
  if (cfg.segments > cfg.m) throw Error("corpus: num_segments > m");
  if (cfg.concepts < cfg.segments) throw Error("corpus: need at least one concept per segment");
  if (cfg.attributes < 1) throw Error("corpus: need at least one attribute");

  for (const char* w : kFiller) vocab_.add(w);

  const int attr_block = std::max(2, std::min(8, cfg_.d_v / 4));
  const int concept_block = cfg_.d_v - attr_block;
  std::mt19937_64 rng(mix_seed(master_seed_, 0xC0FFEEULL));

  for (int i = 0; i < cfg.concepts; ++i) {
    ConceptSpec c;
    c.id = i;
    c.noun = indexed_name(kNouns, static_cast<int>(std::size(kNouns)), i);
    for (int attempt = 0; attempt < 100; ++attempt) {
      c.direction = subspace_direction(rng, cfg_.d_v, 0, concept_block);
      bool ok = true;
      for (const ConceptSpec& prev : concepts_) ok = ok && std::abs(dot(c.direction, prev.direction)) < kMaxPairDot;
      if (ok) break;
    }
    concepts_.push_back(std::move(c));
  }
  for (int i = 0; i < cfg.attributes; ++i) {
    AttributeSpec a;
    a.id = i;
    a.word = indexed_name(kAttrWords, static_cast<int>(std::size(kAttrWords)), i);
    for (int attempt = 0; attempt < 100; ++attempt) {
      a.direction = subspace_direction(rng, cfg_.d_v, concept_block, cfg_.d_v);
      bool ok = true;
      for (const AttributeSpec& prev : attributes_) ok = ok && std::abs(dot(a.direction, prev.direction)) < kMaxPairDot;
      if (ok) break;
    }
    attributes_.push_back(std::move(a));
  }
  for (const ConceptSpec& c : concepts_) vocab_.add(c.noun);
  for (const AttributeSpec& a : attributes_) vocab_.add(a.word);
}

void CorpusGenerator::generate_video(std::uint64_t video_seed, Tensor& features,
                                     std::vector<SegmentInfo>& segments) const {
  std::mt19937_64 rng(video_seed);
  const int m = cfg_.m, s = cfg_.segments;

  // s-1 distinct cut points in [1, m-1]
  std::vector<int> cuts(m - 1);
  std::iota(cuts.begin(), cuts.end(), 1);
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(s - 1);
  std::sort(cuts.begin(), cuts.end());

  std::vector<int> concept_ids(concepts_.size());
  std::iota(concept_ids.begin(), concept_ids.end(), 0);
  std::shuffle(concept_ids.begin(), concept_ids.end(), rng);

  std::uniform_int_distribution<int> attr_dist(0, cfg_.attributes - 1);
  segments.clear();
  int start = 0;
  for (int i = 0; i < s; ++i) {
    SegmentInfo seg;
    seg.start = start;
    seg.end = (i + 1 < s ? cuts[i] : m) - 1;
    seg.concept_id = concept_ids[i];
    seg.attribute = attr_dist(rng);
    start = seg.end + 1;
    segments.push_back(seg);
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  const int d_v = cfg_.d_v;
  features = Tensor::zeros({m, d_v});
  for (const SegmentInfo& seg : segments) {
    const auto& cdir = concepts_[seg.concept_id].direction;
    const auto& adir = attributes_[seg.attribute].direction;
    for (int j = seg.start; j <= seg.end; ++j)
      for (int c = 0; c < d_v; ++c)
        features.at(j, c) = cdir[c] + kAttrScale * adir[c] + cfg_.sigma * noise(rng);
  }
}

SyntheticDialog CorpusGenerator::make_dialog(std::uint64_t index) const {
  SyntheticDialog d;
  char buf[16];
  std::snprintf(buf, sizeof buf, "v%06llu", static_cast<unsigned long long>(index));
  d.video_id = buf;
  d.m = cfg_.m;
  d.gen_seed = mix_seed(master_seed_, index);
  generate_video(mix_seed(d.gen_seed, 1), d.features, d.segments);

  std::mt19937_64 rng(mix_seed(d.gen_seed, 2));
  const int lo_turns = std::min(2, cfg_.max_turns);
  std::uniform_int_distribution<int> turn_dist(lo_turns, cfg_.max_turns);
  const int num_turns = turn_dist(rng);
  std::uniform_int_distribution<int> seg_dist(0, cfg_.segments - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  int prev_seg = -1;
  for (int i = 0; i < num_turns; ++i) {
    int seg;
    if (prev_seg >= 0 && unit(rng) < cfg_.revisit_prob) {
      seg = prev_seg;
    } else if (cfg_.segments == 1) {
      seg = 0;
    } else {
      seg = seg_dist(rng);
    }
    const SegmentInfo& s = d.segments[seg];
    const std::string& noun = concepts_[s.concept_id].noun;
    const std::string& attr = attributes_[s.attribute].word;
    DialogTurn turn;
    turn.q = {vocab_.id("what"), vocab_.id("about"), vocab_.id("the"), vocab_.id(noun)};
    const bool para1 = unit(rng) < cfg_.paraphrase_prob;
    const bool para2 = unit(rng) < cfg_.paraphrase_prob;
    turn.a = {vocab_.id("the"),  vocab_.id(noun),
              vocab_.id("in"),   vocab_.id("the"),
              vocab_.id("video"), vocab_.id(para1 ? "seems" : "looks"),
              vocab_.id(attr),   vocab_.id(para2 ? "now" : "here")};
    turn.ts = s.start;
    turn.te = s.end;
    d.turns.push_back(std::move(turn));
    prev_seg = seg;
  }
  return d;
}

Corpus CorpusGenerator::make_split(int count, std::uint64_t index_offset) const {
  Corpus out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(make_dialog(index_offset + i));
  return out;
}

void CorpusGenerator::regenerate(SyntheticDialog& d) const {
  if (d.inline_features) return;
  if (d.m != cfg_.m) throw Error("dataset record m does not match corpus config");
  generate_video(mix_seed(d.gen_seed, 1), d.features, d.segments);
}

void CorpusGenerator::save_meta(const std::string& path) const {
  json j;
  j["format_version"] = 1;
  j["master_seed"] = master_seed_;
  j["data"] = {{"d_v", cfg_.d_v},
               {"m", cfg_.m},
               {"segments", cfg_.segments},
               {"concepts", cfg_.concepts},
               {"attributes", cfg_.attributes},
               {"sigma", cfg_.sigma},
               {"revisit_prob", cfg_.revisit_prob},
               {"max_turns", cfg_.max_turns},
               {"paraphrase_prob", cfg_.paraphrase_prob},
               {"train_dialogs", cfg_.train_dialogs},
               {"val_dialogs", cfg_.val_dialogs},
               {"test_dialogs", cfg_.test_dialogs}};
  // informational; load reconstructs these deterministically from the seed
  json cj = json::array();
  for (const ConceptSpec& c : concepts_) cj.push_back({{"id", c.id}, {"noun", c.noun}});
  j["concept_nouns"] = cj;
  std::ofstream out(path);
  if (!out) throw Error("cannot write meta file: " + path);
  out << j.dump(2) << "\n";
}

CorpusGenerator CorpusGenerator::load_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open meta file: " + path);
  json j = json::parse(in);
  if (j.at("format_version") != 1) throw Error("unsupported dataset format version");
  model::DataConfig cfg;
  const json& d = j.at("data");
  cfg.d_v = d.at("d_v");
  cfg.m = d.at("m");
  cfg.segments = d.at("segments");
  cfg.concepts = d.at("concepts");
  cfg.attributes = d.at("attributes");
  cfg.sigma = d.at("sigma");
  cfg.revisit_prob = d.at("revisit_prob");
  cfg.max_turns = d.at("max_turns");
  cfg.paraphrase_prob = d.at("paraphrase_prob");
  cfg.train_dialogs = d.at("train_dialogs");
  cfg.val_dialogs = d.at("val_dialogs");
  cfg.test_dialogs = d.at("test_dialogs");
  return CorpusGenerator(cfg, j.at("master_seed"));
}

void write_dataset(const Corpus& corpus, const std::string& path, bool include_features) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file: " + path);
  for (const SyntheticDialog& d : corpus) {
    json j;
    j["video_id"] = d.video_id;
    j["m"] = d.m;
    if (include_features || d.inline_features) {
      json rows = json::array();
      for (int r = 0; r < d.features.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < d.features.cols(); ++c) row.push_back(d.features.at(r, c));
        rows.push_back(std::move(row));
      }
      j["features"] = std::move(rows);
    } else {
      j["gen_seed"] = d.gen_seed;
    }
    json turns = json::array();
    for (const DialogTurn& t : d.turns)
      turns.push_back({{"q", t.q}, {"a", t.a}, {"ts", t.ts}, {"te", t.te}});
    j["turns"] = std::move(turns);
    out << j.dump() << "\n";
  }
}

Corpus read_dataset(const std::string& path, const CorpusGenerator& gen) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file: " + path);
  Corpus out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    SyntheticDialog d;
    try {
      json j = json::parse(line);
      d.video_id = j.at("video_id");
      d.m = j.at("m");
      if (j.contains("features")) {
        d.inline_features = true;
        const json& rows = j.at("features");
        const int m = static_cast<int>(rows.size());
        if (m != d.m) throw Error("feature row count != m");
        const int d_v = m > 0 ? static_cast<int>(rows[0].size()) : 0;
        d.features = Tensor::zeros({m, d_v});
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < d_v; ++c) d.features.at(r, c) = rows[r][c];
      } else {
        d.gen_seed = j.at("gen_seed");
      }
      for (const json& tj : j.at("turns")) {
        DialogTurn t;
        t.q = tj.at("q").get<std::vector<int>>();
        t.a = tj.at("a").get<std::vector<int>>();
        t.ts = tj.at("ts");
        t.te = tj.at("te");
        if (t.ts > t.te) throw Error("turn interval inverted");
        d.turns.push_back(std::move(t));
      }
    } catch (const std::exception& e) {
      throw Error("malformed dataset line " + std::to_string(lineno) + " in " + path + ": " +
                  e.what());
    }
    gen.regenerate(d);
    out.push_back(std::move(d));
  }
  return out;
}

void write_corpus_dir(const CorpusGenerator& gen, const std::string& dir) {
  const model::DataConfig& cfg = gen.config();
  std::filesystem::create_directories(dir);
  gen.save_meta(dir + "/meta.json");
  gen.vocab().save(dir + "/vocab.json");
  write_dataset(gen.make_split(cfg.train_dialogs, 0), dir + "/train.jsonl");
  write_dataset(gen.make_split(cfg.val_dialogs, cfg.train_dialogs), dir + "/val.jsonl");
  write_dataset(gen.make_split(cfg.test_dialogs, cfg.train_dialogs + cfg.val_dialogs),
                dir + "/test.jsonl");
}

CorpusGenerator open_corpus_dir(const std::string& dir) {
  return CorpusGenerator::load_meta(dir + "/meta.json");
}

Corpus read_split(const std::string& dir, const std::string& split) {
  if (split != "train" && split != "val" && split != "test")
    throw Error("unknown split: " + split);
  CorpusGenerator gen = open_corpus_dir(dir);
  return read_dataset(dir + "/" + split + ".jsonl", gen);
}

}  // namespace dtg::data
