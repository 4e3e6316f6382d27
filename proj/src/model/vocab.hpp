#pragma once

#include <map>
#include <string>
#include <vector>

#include "model/config.hpp"

namespace dtg::model {

// Token id <-> string mapping with the four reserved specials at ids 0-3.
// Tokenization is lowercase whitespace splitting.
class Vocab {
 public:
  Vocab();

  int add(const std::string& word);           // returns existing id if present
  int id(const std::string& word) const;      // throws on unknown word
  const std::string& word(int id) const;
  bool contains(const std::string& word) const { return ids_.count(word) > 0; }
  int size() const { return static_cast<int>(words_.size()); }

  std::vector<int> tokenize(const std::string& text) const;
  std::string detokenize(const std::vector<int>& ids, bool strip_specials = true) const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> ids_;
};

}  // namespace dtg::model
