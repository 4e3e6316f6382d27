#include "diffcore/tensor.hpp"

#include <sstream>

namespace dtg::diff {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw Error("negative dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  t.values.assign(shape_size(shape), 0.0);
  t.shape = std::move(shape);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t = zeros(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.values = {v};
  return t;
}

Tensor Tensor::row(std::vector<double> v) {
  Tensor t;
  t.shape = {1, static_cast<int>(v.size())};
  t.values = std::move(v);
  return t;
}

Tensor Tensor::vec(std::vector<double> v) {
  Tensor t;
  t.shape = {static_cast<int>(v.size())};
  t.values = std::move(v);
  return t;
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> v) {
  if (v.size() != static_cast<std::size_t>(rows) * cols)
    throw Error("matrix literal size mismatch");
  Tensor t;
  t.shape = {rows, cols};
  t.values = std::move(v);
  return t;
}

Tensor Tensor::randn(std::mt19937_64& rng, std::vector<int> shape, double stddev) {
  Tensor t = zeros(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : t.values) v = stddev * dist(rng);
  return t;
}

Tensor Tensor::uniform(std::mt19937_64& rng, std::vector<int> shape, double lo, double hi) {
  Tensor t = zeros(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.values) v = dist(rng);
  return t;
}

int Tensor::rows() const {
  if (rank() != 2) throw Error("rows() on tensor of shape " + shape_str(shape));
  return shape[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw Error("cols() on tensor of shape " + shape_str(shape));
  return shape[1];
}

double& Tensor::at(int r, int c) { return values[static_cast<std::size_t>(r) * shape[1] + c]; }
double Tensor::at(int r, int c) const { return values[static_cast<std::size_t>(r) * shape[1] + c]; }

double Tensor::item() const {
  if (values.size() != 1) throw Error("item() on non-scalar tensor " + shape_str(shape));
  return values[0];
}

bool Tensor::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double v) {
  for (double& x : values) x = v;
}

void gemm_nn_acc(int m, int k, int n, const double* a, const double* b, double* c) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_nt_acc(int m, int k, int n, const double* a, const double* b, double* c) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] += s;
    }
  }
}

void gemm_tn_acc(int m, int k, int n, const double* a, const double* b, double* c) {
  // a is k x m, b is k x n, c is m x n
  for (int p = 0; p < k; ++p) {
    const double* ap = a + static_cast<std::size_t>(p) * m;
    const double* bp = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* ci = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dtg::diff
