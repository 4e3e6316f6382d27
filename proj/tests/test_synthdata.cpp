#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "data/synthdata.hpp"

using dtg::data::CorpusGenerator;
using dtg::data::SyntheticDialog;
using dtg::model::DataConfig;

namespace {

DataConfig small_data() {
  DataConfig cfg;
  cfg.d_v = 16;
  cfg.m = 12;
  cfg.segments = 3;
  cfg.concepts = 6;
  cfg.attributes = 3;
  cfg.sigma = 0.05;
  cfg.train_dialogs = 6;
  cfg.val_dialogs = 2;
  cfg.test_dialogs = 2;
  return cfg;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("dtg_test_" + tag);
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str() const { return path.string(); }
};

double dot_row(const dtg::diff::Tensor& f, int row, const std::vector<double>& dir) {
  double s = 0;
  for (int c = 0; c < f.cols(); ++c) s += f.at(row, c) * dir[c];
  return s;
}

}  // namespace

TEST_CASE("same seed reproduces the corpus bitwise; order does not matter") {
  const DataConfig cfg = small_data();
  const CorpusGenerator a(cfg, 42);
  const CorpusGenerator b(cfg, 42);

  const SyntheticDialog d3a = a.make_dialog(3);
  const SyntheticDialog d3b = b.make_dialog(3);
  CHECK(d3a.video_id == d3b.video_id);
  CHECK(d3a.features.values == d3b.features.values);
  REQUIRE(d3a.turns.size() == d3b.turns.size());
  for (std::size_t i = 0; i < d3a.turns.size(); ++i) {
    CHECK(d3a.turns[i].q == d3b.turns[i].q);
    CHECK(d3a.turns[i].a == d3b.turns[i].a);
    CHECK(d3a.turns[i].ts == d3b.turns[i].ts);
    CHECK(d3a.turns[i].te == d3b.turns[i].te);
  }

  // dialog 3 is the same whether generated alone or inside a split
  const auto split = a.make_split(6, 0);
  CHECK(split[3].features.values == d3a.features.values);
  CHECK(split[3].gen_seed == d3a.gen_seed);

  // different seeds give different corpora
  const CorpusGenerator c(cfg, 43);
  CHECK(c.make_dialog(3).features.values != d3a.features.values);
}

TEST_CASE("noise-free frames recover their segment's concept and attribute") {
  DataConfig cfg = small_data();
  cfg.sigma = 0.0;
  const CorpusGenerator gen(cfg, 7);
  for (std::uint64_t i = 0; i < 10; ++i) {
    const SyntheticDialog d = gen.make_dialog(i);
    REQUIRE(static_cast<int>(d.segments.size()) == cfg.segments);
    for (const auto& seg : d.segments) {
      for (int row = seg.start; row <= seg.end; ++row) {
        int best_c = 0, best_a = 0;
        for (int j = 1; j < cfg.concepts; ++j)
          if (dot_row(d.features, row, gen.concepts()[j].direction) >
              dot_row(d.features, row, gen.concepts()[best_c].direction))
            best_c = j;
        for (int j = 1; j < cfg.attributes; ++j)
          if (dot_row(d.features, row, gen.attributes()[j].direction) >
              dot_row(d.features, row, gen.attributes()[best_a].direction))
            best_a = j;
        REQUIRE(best_c == seg.concept_id);
        REQUIRE(best_a == seg.attribute);
      }
    }
  }
}

TEST_CASE("segments tile the video and match the turn labels") {
  const CorpusGenerator gen(small_data(), 11);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const SyntheticDialog d = gen.make_dialog(i);
    int next = 0;
    for (const auto& seg : d.segments) {
      CHECK(seg.start == next);
      CHECK(seg.end >= seg.start);
      next = seg.end + 1;
    }
    CHECK(next == d.m);
    CHECK(d.turns.size() >= 2);
    for (const auto& turn : d.turns) {
      bool found = false;
      for (const auto& seg : d.segments)
        found = found || (turn.ts == seg.start && turn.te == seg.end);
      CHECK(found);
      CHECK_FALSE(turn.q.empty());
      CHECK_FALSE(turn.a.empty());
      for (int tok : turn.a) CHECK(tok < gen.vocab().size());
    }
  }
}

TEST_CASE("dataset files round-trip exactly") {
  const TempDir dir("synth_roundtrip");
  const CorpusGenerator gen(small_data(), 99);
  dtg::data::write_corpus_dir(gen, dir.str());

  const CorpusGenerator reloaded = dtg::data::open_corpus_dir(dir.str());
  CHECK(reloaded.vocab().size() == gen.vocab().size());
  for (int i = 0; i < gen.vocab().size(); ++i)
    CHECK(reloaded.vocab().word(i) == gen.vocab().word(i));

  const auto orig = gen.make_split(small_data().train_dialogs, 0);
  const auto back = dtg::data::read_split(dir.str(), "train");
  REQUIRE(back.size() == orig.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].video_id == orig[i].video_id);
    CHECK(back[i].gen_seed == orig[i].gen_seed);
    CHECK(back[i].features.values == orig[i].features.values);  // bitwise
    REQUIRE(back[i].turns.size() == orig[i].turns.size());
    for (std::size_t t = 0; t < back[i].turns.size(); ++t) {
      CHECK(back[i].turns[t].q == orig[i].turns[t].q);
      CHECK(back[i].turns[t].a == orig[i].turns[t].a);
      CHECK(back[i].turns[t].ts == orig[i].turns[t].ts);
      CHECK(back[i].turns[t].te == orig[i].turns[t].te);
    }
  }
  CHECK(dtg::data::read_split(dir.str(), "val").size() == 2);
  CHECK(dtg::data::read_split(dir.str(), "test").size() == 2);
  CHECK_THROWS_AS(dtg::data::read_split(dir.str(), "bogus"), dtg::Error);
}

TEST_CASE("inline-feature records round-trip bitwise without the seed") {
  const TempDir dir("synth_inline");
  std::filesystem::create_directories(dir.path);
  const CorpusGenerator gen(small_data(), 5);
  const auto corpus = gen.make_split(3, 0);
  const std::string path = dir.str() + "/inline.jsonl";
  dtg::data::write_dataset(corpus, path, /*include_features=*/true);
  const auto back = dtg::data::read_dataset(path, gen);
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].inline_features);
    CHECK(back[i].features.values == corpus[i].features.values);
  }
}

TEST_CASE("malformed lines are reported with their line number") {
  const TempDir dir("synth_malformed");
  std::filesystem::create_directories(dir.path);
  const CorpusGenerator gen(small_data(), 5);
  const std::string path = dir.str() + "/bad.jsonl";
  {
    const auto corpus = gen.make_split(2, 0);
    dtg::data::write_dataset(corpus, path);
    std::ofstream app(path, std::ios::app);
    app << "{\"video_id\": \"vBAD\", \"m\": 12, \"gen_seed\": 1, \"turns\": [{\"q\": [0]}]}\n";
  }
  try {
    dtg::data::read_dataset(path, gen);
    FAIL("expected a parse error");
  } catch (const dtg::Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(dtg::data::read_dataset(dir.str() + "/missing.jsonl", gen), dtg::Error);
}

TEST_CASE("meta file rejects unknown format versions") {
  const TempDir dir("synth_meta");
  std::filesystem::create_directories(dir.path);
  const CorpusGenerator gen(small_data(), 13);
  const std::string path = dir.str() + "/meta.json";
  gen.save_meta(path);
  const CorpusGenerator back = CorpusGenerator::load_meta(path);
  CHECK(back.make_dialog(0).features.values == gen.make_dialog(0).features.values);

  std::ofstream out(path);
  out << "{\"format_version\": 99, \"master_seed\": 1, \"data\": {}}\n";
  out.close();
  CHECK_THROWS_AS(CorpusGenerator::load_meta(path), dtg::Error);
}

TEST_CASE("invalid corpus configurations are rejected") {
  DataConfig cfg = small_data();
  cfg.segments = cfg.m + 1;
  CHECK_THROWS_AS(CorpusGenerator(cfg, 1), dtg::Error);
  cfg = small_data();
  cfg.concepts = cfg.segments - 1;
  CHECK_THROWS_AS(CorpusGenerator(cfg, 1), dtg::Error);
}
