#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffcore/tensor.hpp"
#include "model/config.hpp"
#include "model/vocab.hpp"

namespace dtg::data {

// One latent concept: a feature-space direction plus question/answer templates.
// Concept directions live in the leading feature dimensions, attribute
// directions in the trailing block, so noise-free frames are exactly
// classifiable.
struct ConceptSpec {
  int id = 0;
  std::string noun;
  std::vector<double> direction;  // length d_v, unit norm
};

struct AttributeSpec {
  int id = 0;
  std::string word;
  std::vector<double> direction;  // length d_v, unit norm
};

struct SegmentInfo {
  int start = 0;   // inclusive frame indices
  int end = 0;
  int concept_id = 0;
  int attribute = 0;
};

struct DialogTurn {
  std::vector<int> q;
  std::vector<int> a;
  int ts = 0;
  int te = 0;
};

struct SyntheticDialog {
  std::string video_id;
  int m = 0;
  std::uint64_t gen_seed = 0;
  bool inline_features = false;
  std::vector<DialogTurn> turns;
  diff::Tensor features;              // m x d_v
  std::vector<SegmentInfo> segments;  // derived; regenerated from gen_seed
};

using Corpus = std::vector<SyntheticDialog>;

// Deterministic corpus generator; per-dialog seeds are derived from the master
// seed so generation order (or parallelism) cannot change the corpus.
class CorpusGenerator {
 public:
  CorpusGenerator(const model::DataConfig& cfg, std::uint64_t master_seed);

  const model::Vocab& vocab() const { return vocab_; }
  const std::vector<ConceptSpec>& concepts() const { return concepts_; }
  const std::vector<AttributeSpec>& attributes() const { return attributes_; }
  const model::DataConfig& config() const { return cfg_; }

  SyntheticDialog make_dialog(std::uint64_t index) const;
  Corpus make_split(int count, std::uint64_t index_offset) const;

  // rebuilds features and the segment table of a deserialized record
  void regenerate(SyntheticDialog& d) const;

  void save_meta(const std::string& path) const;
  static CorpusGenerator load_meta(const std::string& path);

 private:
  void generate_video(std::uint64_t video_seed, diff::Tensor& features,
                      std::vector<SegmentInfo>& segments) const;

  model::DataConfig cfg_;
  std::uint64_t master_seed_ = 0;
  model::Vocab vocab_;
  std::vector<ConceptSpec> concepts_;
  std::vector<AttributeSpec> attributes_;
};

// Line-delimited JSON records; write then read is field-exact.
void write_dataset(const Corpus& corpus, const std::string& path, bool include_features = false);
Corpus read_dataset(const std::string& path, const CorpusGenerator& gen);

// Full split set under a directory: {train,val,test}.jsonl + vocab.json + meta.json.
void write_corpus_dir(const CorpusGenerator& gen, const std::string& dir);
Corpus read_split(const std::string& dir, const std::string& split);
CorpusGenerator open_corpus_dir(const std::string& dir);

}  // namespace dtg::data
