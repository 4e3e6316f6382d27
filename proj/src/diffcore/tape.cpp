#include "diffcore/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dtg::diff {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace

Var Tape::push(Tensor value, bool tracked, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.tracked = tracked;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value, bool tracked) {
  return push(std::move(value), tracked, nullptr);
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  require(!n.grad.values.empty(), "gradient not populated; run backward first");
  return n.grad;
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[id];
  if (n.grad.values.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require(av.same_shape(bv),
          "add: shape mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
  Tensor out = av;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += bv.values[i];
  const int aid = a.id, bid = b.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(a) || tracked(b), [=](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    if (t.nodes_[aid].tracked) {
      Tensor& ga = t.grad_buf(aid);
      for (std::size_t i = 0; i < g.values.size(); ++i) ga.values[i] += g.values[i];
    }
    if (t.nodes_[bid].tracked) {
      Tensor& gb = t.grad_buf(bid);
      for (std::size_t i = 0; i < g.values.size(); ++i) gb.values[i] += g.values[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require(av.same_shape(bv),
          "sub: shape mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
  Tensor out = av;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= bv.values[i];
  const int aid = a.id, bid = b.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(a) || tracked(b), [=](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    if (t.nodes_[aid].tracked) {
      Tensor& ga = t.grad_buf(aid);
      for (std::size_t i = 0; i < g.values.size(); ++i) ga.values[i] += g.values[i];
    }
    if (t.nodes_[bid].tracked) {
      Tensor& gb = t.grad_buf(bid);
      for (std::size_t i = 0; i < g.values.size(); ++i) gb.values[i] -= g.values[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require(av.same_shape(bv),
          "mul: shape mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
  Tensor out = av;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= bv.values[i];
  const int aid = a.id, bid = b.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(a) || tracked(b), [=](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    if (t.nodes_[aid].tracked) {
      Tensor& ga = t.grad_buf(aid);
      const Tensor& bv2 = t.nodes_[bid].value;
      for (std::size_t i = 0; i < g.values.size(); ++i) ga.values[i] += g.values[i] * bv2.values[i];
    }
    if (t.nodes_[bid].tracked) {
      Tensor& gb = t.grad_buf(bid);
      const Tensor& av2 = t.nodes_[aid].value;
      for (std::size_t i = 0; i < g.values.size(); ++i) gb.values[i] += g.values[i] * av2.values[i];
    }
  });
}

Var Tape::scale(Var a, double c) {
  Tensor out = value(a);
  for (double& v : out.values) v *= c;
  const int aid = a.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(a), [=](Tape& t) {
    if (!t.nodes_[aid].tracked) return;
    const Tensor& g = t.nodes_[oid].grad;
    Tensor& ga = t.grad_buf(aid);
    for (std::size_t i = 0; i < g.values.size(); ++i) ga.values[i] += c * g.values[i];
  });
}

Var Tape::add_rowvec(Var x, Var b) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(b);
  require(xv.rank() == 2, "add_rowvec: x must be 2-D");
  require(static_cast<int>(bv.size()) == xv.cols(), "add_rowvec: width mismatch");
  Tensor out = xv;
  const int rows = xv.rows(), cols = xv.cols();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out.values[static_cast<std::size_t>(i) * cols + j] += bv.values[j];
  const int xid = x.id, bid = b.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(x) || tracked(b), [=](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    if (t.nodes_[xid].tracked) {
      Tensor& gx = t.grad_buf(xid);
      for (std::size_t i = 0; i < g.values.size(); ++i) gx.values[i] += g.values[i];
    }
    if (t.nodes_[bid].tracked) {
      Tensor& gb = t.grad_buf(bid);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
          gb.values[j] += g.values[static_cast<std::size_t>(i) * cols + j];
    }
  });
}

Var Tape::sigmoid(Var x) {
  Tensor out = value(x);
  for (double& v : out.values) v = 1.0 / (1.0 + std::exp(-v));
  const int xid = x.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(x), [=](Tape& t) {
    if (!t.nodes_[xid].tracked) return;
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& y = t.nodes_[oid].value;
    Tensor& gx = t.grad_buf(xid);
    for (std::size_t i = 0; i < g.values.size(); ++i)
      gx.values[i] += g.values[i] * y.values[i] * (1.0 - y.values[i]);
  });
}

Var Tape::relu(Var x) {
  Tensor out = value(x);
  for (double& v : out.values) v = v > 0.0 ? v : 0.0;
  const int xid = x.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(x), [=](Tape& t) {
    if (!t.nodes_[xid].tracked) return;
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& xv = t.nodes_[xid].value;
    Tensor& gx = t.grad_buf(xid);
    for (std::size_t i = 0; i < g.values.size(); ++i)
      if (xv.values[i] > 0.0) gx.values[i] += g.values[i];
  });
}

Var Tape::reshape(Var x, std::vector<int> shape) {
  const Tensor& xv = value(x);
  require(shape_size(shape) == xv.size(), "reshape: size mismatch");
  Tensor out;
  out.shape = std::move(shape);
  out.values = xv.values;
  const int xid = x.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(x), [=](Tape& t) {
    if (!t.nodes_[xid].tracked) return;
    const Tensor& g = t.nodes_[oid].grad;
    Tensor& gx = t.grad_buf(xid);
    for (std::size_t i = 0; i < g.values.size(); ++i) gx.values[i] += g.values[i];
  });
}

Var Tape::slice_rows(Var x, int start, int len) {
  const Tensor& xv = value(x);
  require(xv.rank() == 2, "slice_rows: x must be 2-D");
  require(start >= 0 && len >= 0 && start + len <= xv.rows(), "slice_rows: out of range");
  const int cols = xv.cols();
  Tensor out = Tensor::zeros({len, cols});
  std::copy_n(xv.values.begin() + static_cast<std::size_t>(start) * cols,
              static_cast<std::size_t>(len) * cols, out.values.begin());
  const int xid = x.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(x), [=](Tape& t) {
    if (!t.nodes_[xid].tracked) return;
    const Tensor& g = t.nodes_[oid].grad;
    Tensor& gx = t.grad_buf(xid);
    for (std::size_t i = 0; i < g.values.size(); ++i)
      gx.values[static_cast<std::size_t>(start) * cols + i] += g.values[i];
  });
}

Var Tape::concat_rows(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.cols(),
          "concat_rows: incompatible shapes");
  Tensor out = Tensor::zeros({av.rows() + bv.rows(), av.cols()});
  std::copy(av.values.begin(), av.values.end(), out.values.begin());
  std::copy(bv.values.begin(), bv.values.end(), out.values.begin() + av.values.size());
  const int aid = a.id, bid = b.id;
  const std::size_t asz = av.values.size();
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(a) || tracked(b), [=](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    if (t.nodes_[aid].tracked) {
      Tensor& ga = t.grad_buf(aid);
      for (std::size_t i = 0; i < asz; ++i) ga.values[i] += g.values[i];
    }
    if (t.nodes_[bid].tracked) {
      Tensor& gb = t.grad_buf(bid);
      for (std::size_t i = 0; i < gb.values.size(); ++i) gb.values[i] += g.values[asz + i];
    }
  });
}

Var Tape::col_slice(Var x, int start, int len) {
  const Tensor& xv = value(x);
  require(xv.rank() == 2, "col_slice: x must be 2-D");
  require(start >= 0 && len >= 0 && start + len <= xv.cols(), "col_slice: out of range");
  const int rows = xv.rows(), cols = xv.cols();
  Tensor out = Tensor::zeros({rows, len});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < len; ++j) out.at(i, j) = xv.at(i, start + j);
  const int xid = x.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(x), [=](Tape& t) {
    if (!t.nodes_[xid].tracked) return;
    const Tensor& g = t.nodes_[oid].grad;
    Tensor& gx = t.grad_buf(xid);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < len; ++j)
        gx.values[static_cast<std::size_t>(i) * cols + start + j] +=
            g.values[static_cast<std::size_t>(i) * len + j];
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: empty input");
  const int rows = value(parts[0]).rows();
  int total = 0;
  bool tr = false;
  for (Var p : parts) {
    require(value(p).rank() == 2 && value(p).rows() == rows, "concat_cols: row mismatch");
    total += value(p).cols();
    tr = tr || tracked(p);
  }
  Tensor out = Tensor::zeros({rows, total});
  int off = 0;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < pv.cols(); ++j) out.at(i, off + j) = pv.at(i, j);
    off += pv.cols();
  }
  std::vector<int> ids;
  std::vector<int> widths;
  for (Var p : parts) {
    ids.push_back(p.id);
    widths.push_back(value(p).cols());
  }
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tr, [=](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    int o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const int w = widths[k];
      if (t.nodes_[ids[k]].tracked) {
        Tensor& gp = t.grad_buf(ids[k]);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < w; ++j)
            gp.values[static_cast<std::size_t>(i) * w + j] +=
                g.values[static_cast<std::size_t>(i) * total + o + j];
      }
      o += w;
    }
  });
}

Var Tape::mul_rowmask(Var x, const std::vector<double>& rowmask) {
  const Tensor& xv = value(x);
  require(xv.rank() == 2, "mul_rowmask: x must be 2-D");
  require(static_cast<int>(rowmask.size()) == xv.rows(), "mul_rowmask: length mismatch");
  const int rows = xv.rows(), cols = xv.cols();
  Tensor out = xv;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out.values[static_cast<std::size_t>(i) * cols + j] *= rowmask[i];
  const int xid = x.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(x), [=, mask = rowmask](Tape& t) {
    if (!t.nodes_[xid].tracked) return;
    const Tensor& g = t.nodes_[oid].grad;
    Tensor& gx = t.grad_buf(xid);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j)
        gx.values[static_cast<std::size_t>(i) * cols + j] +=
            g.values[static_cast<std::size_t>(i) * cols + j] * mask[i];
  });
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.rows(),
          "matmul: incompatible shapes " + shape_str(av.shape) + " * " + shape_str(bv.shape));
  const int m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out = Tensor::zeros({m, n});
  gemm_nn_acc(m, k, n, av.values.data(), bv.values.data(), out.values.data());
  const int aid = a.id, bid = b.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(a) || tracked(b), [=](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    if (t.nodes_[aid].tracked) {
      // dA += G * B^T
      Tensor& ga = t.grad_buf(aid);
      gemm_nt_acc(m, n, k, g.values.data(), t.nodes_[bid].value.values.data(), ga.values.data());
    }
    if (t.nodes_[bid].tracked) {
      // dB += A^T * G
      Tensor& gb = t.grad_buf(bid);
      gemm_tn_acc(k, m, n, t.nodes_[aid].value.values.data(), g.values.data(), gb.values.data());
    }
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.cols(),
          "matmul_nt: incompatible shapes " + shape_str(av.shape) + " * " + shape_str(bv.shape) + "^T");
  const int m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor out = Tensor::zeros({m, n});
  gemm_nt_acc(m, k, n, av.values.data(), bv.values.data(), out.values.data());
  const int aid = a.id, bid = b.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(a) || tracked(b), [=](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    if (t.nodes_[aid].tracked) {
      // dA += G * B
      Tensor& ga = t.grad_buf(aid);
      gemm_nn_acc(m, n, k, g.values.data(), t.nodes_[bid].value.values.data(), ga.values.data());
    }
    if (t.nodes_[bid].tracked) {
      // dB += G^T * A
      Tensor& gb = t.grad_buf(bid);
      gemm_tn_acc(n, m, k, g.values.data(), t.nodes_[aid].value.values.data(), gb.values.data());
    }
  });
}

Var Tape::embedding(Var table, const std::vector<int>& ids) {
  const Tensor& tv = value(table);
  require(tv.rank() == 2, "embedding: table must be 2-D");
  const int vocab = tv.rows(), d = tv.cols();
  Tensor out = Tensor::zeros({static_cast<int>(ids.size()), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < vocab, "embedding: id out of range");
    std::copy_n(tv.values.begin() + static_cast<std::size_t>(ids[i]) * d, d,
                out.values.begin() + i * d);
  }
  const int tid = table.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(table), [=, ids2 = ids](Tape& t) {
    if (!t.nodes_[tid].tracked) return;
    const Tensor& g = t.nodes_[oid].grad;
    Tensor& gt = t.grad_buf(tid);
    for (std::size_t i = 0; i < ids2.size(); ++i)
      for (int j = 0; j < d; ++j)
        gt.values[static_cast<std::size_t>(ids2[i]) * d + j] += g.values[i * d + j];
  });
}

Var Tape::conv1d_same(Var x, Var kernel, Var bias) {
  const Tensor& xv = value(x);
  const Tensor& kv = value(kernel);
  const Tensor& bv = value(bias);
  require(xv.rank() == 2 && kv.rank() == 3, "conv1d: x must be MxD, kernel WxDxDout");
  const int m = xv.shape[0], d = xv.shape[1];
  const int w = kv.shape[0], kd = kv.shape[1], dout = kv.shape[2];
  require(kd == d, "conv1d: channel mismatch");
  require(w % 2 == 1, "conv1d: kernel width must be odd");
  require(static_cast<int>(bv.size()) == dout, "conv1d: bias size mismatch");
  const int h = (w - 1) / 2;
  Tensor out = Tensor::zeros({m, dout});
  for (int i = 0; i < m; ++i)
    for (int o = 0; o < dout; ++o) {
      double s = bv.values[o];
      for (int t = 0; t < w; ++t) {
        const int j = i + t - h;
        if (j < 0 || j >= m) continue;  // zero padding
        for (int c = 0; c < d; ++c)
          s += xv.values[static_cast<std::size_t>(j) * d + c] *
               kv.values[(static_cast<std::size_t>(t) * d + c) * dout + o];
      }
      out.values[static_cast<std::size_t>(i) * dout + o] = s;
    }
  const int xid = x.id, kid = kernel.id, bid = bias.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(x) || tracked(kernel) || tracked(bias), [=](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& xv2 = t.nodes_[xid].value;
    const Tensor& kv2 = t.nodes_[kid].value;
    if (t.nodes_[xid].tracked) {
      Tensor& gx = t.grad_buf(xid);
      for (int i = 0; i < m; ++i)
        for (int o = 0; o < dout; ++o) {
          const double go = g.values[static_cast<std::size_t>(i) * dout + o];
          for (int tt = 0; tt < w; ++tt) {
            const int j = i + tt - h;
            if (j < 0 || j >= m) continue;
            for (int c = 0; c < d; ++c)
              gx.values[static_cast<std::size_t>(j) * d + c] +=
                  go * kv2.values[(static_cast<std::size_t>(tt) * d + c) * dout + o];
          }
        }
    }
    if (t.nodes_[kid].tracked) {
      Tensor& gk = t.grad_buf(kid);
      for (int i = 0; i < m; ++i)
        for (int o = 0; o < dout; ++o) {
          const double go = g.values[static_cast<std::size_t>(i) * dout + o];
          for (int tt = 0; tt < w; ++tt) {
            const int j = i + tt - h;
            if (j < 0 || j >= m) continue;
            for (int c = 0; c < d; ++c)
              gk.values[(static_cast<std::size_t>(tt) * d + c) * dout + o] +=
                  go * xv2.values[static_cast<std::size_t>(j) * d + c];
          }
        }
    }
    if (t.nodes_[bid].tracked) {
      Tensor& gb = t.grad_buf(bid);
      for (int i = 0; i < m; ++i)
        for (int o = 0; o < dout; ++o)
          gb.values[o] += g.values[static_cast<std::size_t>(i) * dout + o];
    }
  });
}

Var Tape::layer_norm(Var x, Var gamma, Var beta) {
  constexpr double kEps = 1e-5;
  const Tensor& xv = value(x);
  const Tensor& gv = value(gamma);
  const Tensor& bv = value(beta);
  require(xv.rank() == 2, "layer_norm: x must be 2-D");
  const int rows = xv.rows(), d = xv.cols();
  require(static_cast<int>(gv.size()) == d && static_cast<int>(bv.size()) == d,
          "layer_norm: parameter size mismatch");
  Tensor out = Tensor::zeros({rows, d});
  std::vector<double> mus(rows), isigs(rows);
  for (int i = 0; i < rows; ++i) {
    const double* xi = xv.values.data() + static_cast<std::size_t>(i) * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += xi[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= d;
    const double isig = 1.0 / std::sqrt(var + kEps);
    mus[i] = mu;
    isigs[i] = isig;
    double* oi = out.values.data() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j) oi[j] = gv.values[j] * (xi[j] - mu) * isig + bv.values[j];
  }
  const int xid = x.id, gid = gamma.id, bid = beta.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(x) || tracked(gamma) || tracked(beta),
              [=, mus2 = std::move(mus), isigs2 = std::move(isigs)](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& xv2 = t.nodes_[xid].value;
    const Tensor& gv2 = t.nodes_[gid].value;
    for (int i = 0; i < rows; ++i) {
      const double* xi = xv2.values.data() + static_cast<std::size_t>(i) * d;
      const double* gi = g.values.data() + static_cast<std::size_t>(i) * d;
      const double mu = mus2[i], isig = isigs2[i];
      if (t.nodes_[gid].tracked) {
        Tensor& gg = t.grad_buf(gid);
        for (int j = 0; j < d; ++j) gg.values[j] += gi[j] * (xi[j] - mu) * isig;
      }
      if (t.nodes_[bid].tracked) {
        Tensor& gb = t.grad_buf(bid);
        for (int j = 0; j < d; ++j) gb.values[j] += gi[j];
      }
      if (t.nodes_[xid].tracked) {
        Tensor& gx = t.grad_buf(xid);
        double sum_dh = 0.0, sum_dh_xhat = 0.0;
        for (int j = 0; j < d; ++j) {
          const double dh = gi[j] * gv2.values[j];
          const double xhat = (xi[j] - mu) * isig;
          sum_dh += dh;
          sum_dh_xhat += dh * xhat;
        }
        for (int j = 0; j < d; ++j) {
          const double dh = gi[j] * gv2.values[j];
          const double xhat = (xi[j] - mu) * isig;
          gx.values[static_cast<std::size_t>(i) * d + j] +=
              isig * (dh - sum_dh / d - xhat * sum_dh_xhat / d);
        }
      }
    }
  });
}

Var Tape::masked_softmax(Var logits, const Tensor& mask) {
  const Tensor& lv = value(logits);
  require(lv.rank() == 2, "masked_softmax: logits must be 2-D");
  require(mask.same_shape(lv), "masked_softmax: mask shape mismatch");
  for (double mv : mask.values)
    require(mv == 0.0 || mv == 1.0, "masked_softmax: mask entries must be 0 or 1");
  const int rows = lv.rows(), cols = lv.cols();
  Tensor out = Tensor::zeros({rows, cols});
  for (int i = 0; i < rows; ++i) {
    const double* li = lv.values.data() + static_cast<std::size_t>(i) * cols;
    const double* mi = mask.values.data() + static_cast<std::size_t>(i) * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < cols; ++j)
      if (mi[j] == 1.0 && li[j] > mx) mx = li[j];
    if (mx == -std::numeric_limits<double>::infinity()) throw Error("degenerate attention row");
    double s = 0.0;
    double* oi = out.values.data() + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) {
      if (mi[j] == 1.0) {
        oi[j] = std::exp(li[j] - mx);
        s += oi[j];
      }
    }
    for (int j = 0; j < cols; ++j)
      if (mi[j] == 1.0) oi[j] /= s;  // masked entries stay exactly 0.0
  }
  const int lid = logits.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(logits), [=, m2 = mask](Tape& t) {
    if (!t.nodes_[lid].tracked) return;
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& y = t.nodes_[oid].value;
    Tensor& gl = t.grad_buf(lid);
    for (int i = 0; i < rows; ++i) {
      const double* yi = y.values.data() + static_cast<std::size_t>(i) * cols;
      const double* gi = g.values.data() + static_cast<std::size_t>(i) * cols;
      const double* mi = m2.values.data() + static_cast<std::size_t>(i) * cols;
      double dot = 0.0;
      for (int j = 0; j < cols; ++j)
        if (mi[j] == 1.0) dot += yi[j] * gi[j];
      for (int j = 0; j < cols; ++j)
        if (mi[j] == 1.0)
          gl.values[static_cast<std::size_t>(i) * cols + j] += yi[j] * (gi[j] - dot);
    }
  });
}

Var Tape::mean_pool_rows(Var x, const std::vector<double>& rowmask) {
  const Tensor& xv = value(x);
  require(xv.rank() == 2, "mean_pool_rows: x must be 2-D");
  require(static_cast<int>(rowmask.size()) == xv.rows(), "mean_pool_rows: mask length mismatch");
  const int rows = xv.rows(), d = xv.cols();
  double cnt = 0.0;
  for (double mv : rowmask) {
    require(mv == 0.0 || mv == 1.0, "mean_pool_rows: mask entries must be 0 or 1");
    cnt += mv;
  }
  require(cnt > 0.0, "mean_pool_rows: empty pool");
  Tensor out = Tensor::zeros({d});
  for (int i = 0; i < rows; ++i) {
    if (rowmask[i] == 0.0) continue;
    for (int j = 0; j < d; ++j) out.values[j] += xv.values[static_cast<std::size_t>(i) * d + j];
  }
  for (double& v : out.values) v /= cnt;
  const int xid = x.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(std::move(out), tracked(x), [=, mask = rowmask](Tape& t) {
    if (!t.nodes_[xid].tracked) return;
    const Tensor& g = t.nodes_[oid].grad;
    Tensor& gx = t.grad_buf(xid);
    for (int i = 0; i < rows; ++i) {
      if (mask[i] == 0.0) continue;
      for (int j = 0; j < d; ++j)
        gx.values[static_cast<std::size_t>(i) * d + j] += g.values[j] / cnt;
    }
  });
}

Var Tape::sum_all(Var x) {
  const Tensor& xv = value(x);
  double s = 0.0;
  for (double v : xv.values) s += v;
  const int xid = x.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(Tensor::scalar(s), tracked(x), [=](Tape& t) {
    if (!t.nodes_[xid].tracked) return;
    const double g = t.nodes_[oid].grad.values[0];
    Tensor& gx = t.grad_buf(xid);
    for (double& v : gx.values) v += g;
  });
}

Var Tape::bce_sum(Var p, const std::vector<double>& y) {
  const Tensor& pv = value(p);
  require(pv.size() == y.size(), "bce_sum: shape mismatch");
  for (double yv : y) require(yv == 0.0 || yv == 1.0, "bce_sum: labels must be 0 or 1");
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double pc = std::clamp(pv.values[i], kProbEps, 1.0 - kProbEps);
    loss -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  require(std::isfinite(loss), "bce_sum: non-finite loss");
  const int pid = p.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(Tensor::scalar(loss), tracked(p), [=, y2 = y](Tape& t) {
    if (!t.nodes_[pid].tracked) return;
    const double g = t.nodes_[oid].grad.values[0];
    const Tensor& pv2 = t.nodes_[pid].value;
    Tensor& gp = t.grad_buf(pid);
    for (std::size_t i = 0; i < y2.size(); ++i) {
      const double raw = pv2.values[i];
      if (raw <= kProbEps || raw >= 1.0 - kProbEps) continue;  // clipped flat region
      gp.values[i] += g * (-y2[i] / raw + (1.0 - y2[i]) / (1.0 - raw));
    }
  });
}

Var Tape::ce_index(Var dist, int label) {
  const Tensor& dv = value(dist);
  const int n = static_cast<int>(dv.size());
  require(label >= 0 && label < n, "ce_index: label out of range");
  double s = 0.0;
  for (double v : dv.values) s += v;
  require(std::abs(s - 1.0) <= 1e-6, "ce_index: distribution does not sum to 1");
  const double pc = std::clamp(dv.values[label], kProbEps, 1.0 - kProbEps);
  const double loss = -std::log(pc);
  const int did = dist.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(Tensor::scalar(loss), tracked(dist), [=](Tape& t) {
    if (!t.nodes_[did].tracked) return;
    const double g = t.nodes_[oid].grad.values[0];
    const Tensor& dv2 = t.nodes_[did].value;
    const double raw = dv2.values[label];
    if (raw <= kProbEps || raw >= 1.0 - kProbEps) return;
    t.grad_buf(did).values[label] += -g / raw;
  });
}

Var Tape::mse(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require(av.same_shape(bv),
          "mse: shape mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
  const double n = static_cast<double>(av.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < av.values.size(); ++i) {
    const double d = av.values[i] - bv.values[i];
    loss += d * d;
  }
  loss /= n;
  const int aid = a.id, bid = b.id;
  const int oid = static_cast<int>(nodes_.size());
  return push(Tensor::scalar(loss), tracked(a) || tracked(b), [=](Tape& t) {
    const double g = t.nodes_[oid].grad.values[0];
    const Tensor& av2 = t.nodes_[aid].value;
    const Tensor& bv2 = t.nodes_[bid].value;
    if (t.nodes_[aid].tracked) {
      Tensor& ga = t.grad_buf(aid);
      for (std::size_t i = 0; i < ga.values.size(); ++i)
        ga.values[i] += g * 2.0 * (av2.values[i] - bv2.values[i]) / n;
    }
    if (t.nodes_[bid].tracked) {
      Tensor& gb = t.grad_buf(bid);
      for (std::size_t i = 0; i < gb.values.size(); ++i)
        gb.values[i] += g * 2.0 * (bv2.values[i] - av2.values[i]) / n;
    }
  });
}

void Tape::backward(Var root) {
  require(root.valid() && root.id < static_cast<int>(nodes_.size()), "backward: invalid root");
  require(nodes_[root.id].value.size() == 1, "backward: root must be scalar");
  // recompute from scratch: stale buffers from an earlier backward would
  // otherwise compound through shared subexpressions
  for (Node& n : nodes_) n.grad.fill(0.0);
  grad_buf(root.id).values[0] = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.tracked || !n.back || n.grad.values.empty()) continue;
    n.back(*this);
  }
}

}  // namespace dtg::diff
