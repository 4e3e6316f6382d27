#include "diffcore/adam.hpp"

#include <cmath>

namespace dtg::diff {

Tensor& ParamStore::create(const std::string& name, Tensor init) {
  if (entries_.count(name)) throw Error("parameter already exists: " + name);
  Entry e;
  e.grad = Tensor::zeros(init.shape);
  e.m = Tensor::zeros(init.shape);
  e.v = Tensor::zeros(init.shape);
  e.value = std::move(init);
  return entries_.emplace(name, std::move(e)).first->second.value;
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : entries_) e.grad.fill(0.0);
}

void ParamStore::step(const AdamSettings& s) {
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(s.beta1, t);
  const double bc2 = 1.0 - std::pow(s.beta2, t);
  for (auto& [name, e] : entries_) {
    for (std::size_t i = 0; i < e.value.values.size(); ++i) {
      const double g = e.grad.values[i];
      if (!std::isfinite(g)) throw Error("non-finite gradient in parameter " + name);
      e.m.values[i] = s.beta1 * e.m.values[i] + (1.0 - s.beta1) * g;
      e.v.values[i] = s.beta2 * e.v.values[i] + (1.0 - s.beta2) * g * g;
      const double mhat = e.m.values[i] / bc1;
      const double vhat = e.v.values[i] / bc2;
      e.value.values[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
  }
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

Var ParamBinder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = tape_.leaf(store_.at(name).value, /*tracked=*/true);
  bound_.emplace(name, v);
  return v;
}

void ParamBinder::harvest() {
  for (const auto& [name, var] : bound_) {
    ParamStore::Entry& e = store_.at(name);
    // Parameters untouched by this graph keep zero grads.
    if (!tape_.has_grad(var)) continue;
    const Tensor& g = tape_.grad(var);
    for (std::size_t i = 0; i < e.grad.values.size(); ++i) e.grad.values[i] += g.values[i];
  }
}

}  // namespace dtg::diff
