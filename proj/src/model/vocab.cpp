#include "model/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "diffcore/tensor.hpp"

namespace dtg::model {

using nlohmann::json;

Vocab::Vocab() {
  for (const char* w : {"<bos>", "<eos>", "<sep>", "<pad>"}) add(w);
}

int Vocab::add(const std::string& word) {
  auto it = ids_.find(word);
  if (it != ids_.end()) return it->second;
  const int id = static_cast<int>(words_.size());
  words_.push_back(word);
  ids_.emplace(word, id);
  return id;
}

int Vocab::id(const std::string& word) const {
  auto it = ids_.find(word);
  if (it == ids_.end()) throw Error("unknown word: " + word);
  return it->second;
}

const std::string& Vocab::word(int id) const {
  if (id < 0 || id >= size()) throw Error("token id out of range: " + std::to_string(id));
  return words_[id];
}

std::vector<int> Vocab::tokenize(const std::string& text) const {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::istringstream is(lower);
  std::vector<int> out;
  std::string tok;
  while (is >> tok) out.push_back(id(tok));
  return out;
}

std::string Vocab::detokenize(const std::vector<int>& ids, bool strip_specials) const {
  std::string out;
  for (int t : ids) {
    if (strip_specials && t < kNumSpecial) continue;
    if (!out.empty()) out += ' ';
    out += word(t);
  }
  return out;
}

void Vocab::save(const std::string& path) const {
  json j = json::array();
  for (const auto& w : words_) j.push_back(w);
  std::ofstream out(path);
  if (!out) throw Error("cannot write vocab file: " + path);
  out << j.dump() << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocab file: " + path);
  json j = json::parse(in);
  Vocab v;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = j[i];
    if (i < kNumSpecial) {
      if (w != v.word(static_cast<int>(i))) throw Error("vocab file: bad special token order");
      continue;
    }
    v.add(w);
  }
  return v;
}

}  // namespace dtg::model
