#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtg {

// All recoverable failures in the core surface as Error; the C API maps
// them to status codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace diff {

// Dense row-major float64 tensor. Rank 0 (scalar) is shape {} with one value.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double v);
  static Tensor scalar(double v);
  static Tensor row(std::vector<double> v);               // shape {1, n}
  static Tensor vec(std::vector<double> v);               // shape {n}
  static Tensor matrix(int rows, int cols, std::vector<double> v);
  static Tensor randn(std::mt19937_64& rng, std::vector<int> shape, double stddev);
  static Tensor uniform(std::mt19937_64& rng, std::vector<int> shape, double lo, double hi);

  std::size_t size() const { return values.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const;
  int cols() const;
  double& at(int r, int c);
  double at(int r, int c) const;
  double item() const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  void fill(double v);
};

std::string shape_str(const std::vector<int>& shape);
std::size_t shape_size(const std::vector<int>& shape);

// C += A(MxK) * B(KxN)
void gemm_nn_acc(int m, int k, int n, const double* a, const double* b, double* c);
// C += A(MxK) * B(NxK)^T
void gemm_nt_acc(int m, int k, int n, const double* a, const double* b, double* c);
// C += A(KxM)^T * B(KxN)
void gemm_tn_acc(int m, int k, int n, const double* a, const double* b, double* c);

// Deterministic seed derivation for per-item substreams.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index);

}  // namespace diff
}  // namespace dtg
