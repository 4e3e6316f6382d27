#pragma once

#include <functional>
#include <vector>

#include "diffcore/tensor.hpp"

namespace dtg::diff {

// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Every op appends one node whose record order is the
// topological order; backward() visits records exactly once in reverse.
// backward() recomputes gradients from scratch on every call; accumulation
// across samples happens in the ParamStore, not on the tape.
class Tape {
 public:
  Var leaf(Tensor value, bool tracked = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const;
  bool has_grad(Var v) const { return !nodes_[v.id].grad.values.empty(); }
  bool tracked(Var v) const { return nodes_[v.id].tracked; }

  // elementwise
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_rowvec(Var x, Var b);           // x: MxN, b: {N} broadcast over rows
  Var sigmoid(Var x);
  Var relu(Var x);

  // structure
  Var reshape(Var x, std::vector<int> shape);
  Var slice_rows(Var x, int start, int len);
  Var concat_rows(Var a, Var b);
  Var col_slice(Var x, int start, int len);
  Var concat_cols(const std::vector<Var>& parts);
  Var mul_rowmask(Var x, const std::vector<double>& rowmask);

  // linear algebra
  Var matmul(Var a, Var b);               // MxK * KxN
  Var matmul_nt(Var a, Var b);            // MxK * (NxK)^T
  Var embedding(Var table, const std::vector<int>& ids);
  Var conv1d_same(Var x, Var kernel, Var bias);  // x: MxD, kernel: {W,D,Dout}

  // normalization / attention
  Var layer_norm(Var x, Var gamma, Var beta);
  Var masked_softmax(Var logits, const Tensor& mask);
  Var mean_pool_rows(Var x, const std::vector<double>& rowmask);

  // reductions / losses (scalar outputs)
  Var sum_all(Var x);
  Var bce_sum(Var p, const std::vector<double>& y);
  Var ce_index(Var dist, int label);
  Var mse(Var a, Var b);

  void backward(Var root);

  std::size_t num_nodes() const { return nodes_.size(); }

  static constexpr double kProbEps = 1e-7;  // log-saturation clip in BCE/CE

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    bool tracked = false;
    std::function<void(Tape&)> back;
  };

  Var push(Tensor value, bool tracked, std::function<void(Tape&)> back);
  Tensor& grad_buf(int id);
  std::vector<Node> nodes_;
};

}  // namespace dtg::diff
