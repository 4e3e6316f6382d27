#pragma once

#include <map>
#include <string>

#include "diffcore/tape.hpp"

namespace dtg::diff {

struct AdamSettings {
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameter tensors with accumulated gradients and Adam moments.
// Iteration order is the (sorted) name order, which keeps updates and
// serialization deterministic.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
  };

  Tensor& create(const std::string& name, Tensor init);
  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;

  void zero_grad();
  void step(const AdamSettings& s);
  long step_count() const { return step_count_; }
  void set_step_count(long t) { step_count_ = t; }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::size_t num_scalars() const;

 private:
  std::map<std::string, Entry> entries_;
  long step_count_ = 0;
};

// Binds store parameters onto a tape as tracked leaves, once per name, and
// harvests tape gradients back into the store after backward().
class ParamBinder {
 public:
  ParamBinder(Tape& tape, ParamStore& store) : tape_(tape), store_(store) {}

  Var operator()(const std::string& name);
  void harvest();

 private:
  Tape& tape_;
  ParamStore& store_;
  std::map<std::string, Var> bound_;
};

}  // namespace dtg::diff
