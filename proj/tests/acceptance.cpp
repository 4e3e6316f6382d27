// End-to-end acceptance checks. Each numbered criterion prints one PASS/FAIL
// line; the process exits nonzero if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <vector>

#include "data/synthdata.hpp"
#include "harness/ablate.hpp"
#include "harness/evaluate.hpp"
#include "harness/train.hpp"
#include "metrics/metrics.hpp"
#include "model/contrastive.hpp"

using dtg::diff::ParamBinder;
using dtg::diff::Tape;
using dtg::diff::Tensor;
using dtg::diff::Var;
using dtg::model::Interval;
using dtg::model::RunConfig;

namespace {

int g_failures = 0;

void criterion(int n, const char* what, bool ok) {
  std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", n, what);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- criterion 1

// Relative error with a unit floor, so tiny gradients are compared absolutely.
double rel_err(double analytic, double fd) {
  const double denom = std::max({1.0, std::fabs(analytic), std::fabs(fd)});
  return std::fabs(analytic - fd) / denom;
}

// Central finite differences against the tape gradient for a scalar-valued
// builder over a set of leaf tensors.
bool fd_check(const std::vector<Tensor>& inputs,
              const std::function<Var(Tape&, const std::vector<Var>&)>& build,
              double tol = 1e-4) {
  const double h = 1e-5;
  std::vector<Tensor> work = inputs;

  const auto eval = [&]() {
    Tape t;
    std::vector<Var> vars;
    for (const Tensor& x : work) vars.push_back(t.leaf(x, true));
    return t.value(build(t, vars)).item();
  };

  Tape t;
  std::vector<Var> vars;
  for (const Tensor& x : work) vars.push_back(t.leaf(x, true));
  Var out = build(t, vars);
  t.backward(out);

  for (std::size_t i = 0; i < work.size(); ++i) {
    const Tensor grad = t.has_grad(vars[i]) ? t.grad(vars[i])
                                            : Tensor::zeros(work[i].shape);
    for (std::size_t j = 0; j < work[i].values.size(); ++j) {
      const double saved = work[i].values[j];
      work[i].values[j] = saved + h;
      const double up = eval();
      work[i].values[j] = saved - h;
      const double down = eval();
      work[i].values[j] = saved;
      const double fd = (up - down) / (2 * h);
      if (rel_err(grad.values[j], fd) >= tol) return false;
    }
  }
  return true;
}

// Fixed random readout so any-shaped op output becomes a scalar.
Var readout(Tape& t, Var x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return t.sum_all(t.mul(x, t.constant(Tensor::randn(rng, t.value(x).shape, 1.0))));
}

bool primitives_pass_fd() {
  bool ok = true;
  for (int trial = 0; trial < 20 && ok; ++trial) {
    std::mt19937_64 rng(4000 + trial);
    const std::uint64_t ro = 9000 + trial;
    const int m = 2 + trial % 3, n = 2 + (trial / 3) % 3, k = 2 + (trial / 9) % 2;
    const Tensor a = Tensor::randn(rng, {m, n}, 1.0);
    const Tensor b = Tensor::randn(rng, {m, n}, 1.0);
    const Tensor sq = Tensor::randn(rng, {n, k}, 1.0);
    const Tensor v = Tensor::randn(rng, {n}, 1.0);
    std::vector<double> rowmask(m, 1.0);
    rowmask[trial % m] = 0.0;

    ok = ok && fd_check({a, b}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.add(x[0], x[1]), ro);
    });
    ok = ok && fd_check({a, b}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.sub(x[0], x[1]), ro);
    });
    ok = ok && fd_check({a, b}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.mul(x[0], x[1]), ro);
    });
    ok = ok && fd_check({a}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.scale(x[0], -1.7), ro);
    });
    ok = ok && fd_check({a, v}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.add_rowvec(x[0], x[1]), ro);
    });
    ok = ok && fd_check({a}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.sigmoid(x[0]), ro);
    });
    ok = ok && fd_check({a}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.relu(t.add(x[0], t.constant(Tensor::full(t.value(x[0]).shape, 0.3)))),
                     ro);
    });
    ok = ok && fd_check({a}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.reshape(x[0], {n, m}), ro);
    });
    ok = ok && fd_check({a}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.slice_rows(x[0], 1, m - 1), ro);
    });
    ok = ok && fd_check({a, b}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.concat_rows(x[0], x[1]), ro);
    });
    ok = ok && fd_check({a}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.col_slice(x[0], 1, n - 1), ro);
    });
    ok = ok && fd_check({a, b}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.concat_cols({x[0], x[1]}), ro);
    });
    ok = ok && fd_check({a}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.mul_rowmask(x[0], rowmask), ro);
    });
    ok = ok && fd_check({a, sq}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.matmul(x[0], x[1]), ro);
    });
    ok = ok && fd_check({a, b}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.matmul_nt(x[0], x[1]), ro);
    });
    ok = ok && fd_check({a}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.embedding(x[0], {0, m - 1, 0}), ro);
    });
    const Tensor kernel = Tensor::randn(rng, {3, n, 2}, 0.5);
    const Tensor kbias = Tensor::randn(rng, {2}, 0.5);
    ok = ok && fd_check({a, kernel, kbias}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.conv1d_same(x[0], x[1], x[2]), ro);
    });
    const Tensor gamma = Tensor::full({n}, 1.2);
    const Tensor beta = Tensor::full({n}, -0.1);
    ok = ok && fd_check({a, gamma, beta}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.layer_norm(x[0], x[1], x[2]), ro);
    });
    Tensor mask = Tensor::full({m, n}, 1.0);
    mask.values[trial % (m * n)] = 0.0;
    ok = ok && fd_check({a}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.masked_softmax(x[0], mask), ro);
    });
    ok = ok && fd_check({a}, [&](Tape& t, const std::vector<Var>& x) {
      return readout(t, t.mean_pool_rows(x[0], rowmask), ro);
    });
    ok = ok && fd_check({a}, [&](Tape& t, const std::vector<Var>& x) {
      return t.sum_all(x[0]);
    });
    std::vector<double> labels(m * n);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = (i + trial) % 2;
    ok = ok && fd_check({a}, [&](Tape& t, const std::vector<Var>& x) {
      return t.bce_sum(t.sigmoid(x[0]), labels);
    });
    ok = ok && fd_check({v}, [&](Tape& t, const std::vector<Var>& x) {
      Var dist = t.masked_softmax(t.reshape(x[0], {1, n}), Tensor::full({1, n}, 1.0));
      return t.ce_index(dist, trial % n);
    });
    ok = ok && fd_check({a, b}, [&](Tape& t, const std::vector<Var>& x) {
      return t.mse(x[0], x[1]);
    });
  }
  return ok;
}

RunConfig micro_config(std::uint64_t seed) {
  RunConfig cfg;
  cfg.model.d = 16;
  cfg.model.d_v = 12;
  cfg.model.heads = 2;
  cfg.model.vocab_size = 64;
  cfg.model.video_cap = 16;
  cfg.model.decoder_cap = 12;
  cfg.data.d_v = 12;
  cfg.data.m = 10;
  cfg.data.segments = 2;
  cfg.data.concepts = 4;
  cfg.data.attributes = 2;
  cfg.data.max_turns = 3;
  cfg.train.batch_size = 4;
  cfg.seed = seed;
  return cfg;
}

// Finite differences through a full composed loss, over randomly chosen
// parameter coordinates of the store.
bool composed_pass_fd(dtg::model::ModelParams& params,
                      const std::function<Var(Tape&, ParamBinder&)>& build, int coords,
                      std::uint64_t pick_seed) {
  const double h = 1e-5, tol = 1e-4;
  params.store.zero_grad();
  Tape t;
  ParamBinder p(t, params.store);
  t.backward(build(t, p));
  p.harvest();

  const auto value = [&]() {
    Tape t2;
    ParamBinder p2(t2, params.store);
    return t2.value(build(t2, p2)).item();
  };

  std::vector<std::string> names;
  for (const auto& [name, entry] : params.store.entries()) names.push_back(name);
  std::mt19937_64 rng(pick_seed);
  for (int c = 0; c < coords; ++c) {
    const std::string& name = names[rng() % names.size()];
    auto& entry = params.store.at(name);
    const std::size_t j = rng() % entry.value.values.size();
    const double saved = entry.value.values[j];
    entry.value.values[j] = saved + h;
    const double up = value();
    entry.value.values[j] = saved - h;
    const double down = value();
    entry.value.values[j] = saved;
    const double fd = (up - down) / (2 * h);
    if (rel_err(entry.grad.values[j], fd) >= tol) {
      std::fprintf(stderr, "composed FD mismatch at %s[%zu]: %g vs %g\n", name.c_str(), j,
                   entry.grad.values[j], fd);
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------- criterion 3

dtg::model::TurnSelection brute_force_selection(const std::vector<dtg::model::TurnRecord>& history,
                                                const Interval& current, int k) {
  std::vector<int> remaining(history.size());
  for (std::size_t i = 0; i < history.size(); ++i) remaining[i] = static_cast<int>(i);
  std::vector<int> picked;
  const int want = std::min<int>(k, static_cast<int>(history.size()));
  for (int round = 0; round < want; ++round) {
    int best = -1;
    double best_iou = -1;
    for (int idx : remaining) {
      const double iou = dtg::model::interval_iou(history[idx].interval, current);
      if (iou > best_iou ||
          (iou == best_iou && history[idx].turn_index > history[best].turn_index)) {
        best = idx;
        best_iou = iou;
      }
    }
    picked.push_back(best);
    remaining.erase(std::find(remaining.begin(), remaining.end(), best));
  }
  std::sort(picked.begin(), picked.end());
  dtg::model::TurnSelection sel;
  for (int idx : picked) {
    sel.chosen.push_back(history[idx].turn_index);
    const double iou = dtg::model::interval_iou(history[idx].interval, current);
    sel.ious.push_back(iou);
    sel.supplemented.push_back(iou == 0.0);
  }
  return sel;
}

// ---------------------------------------------------------------- criterion 5

double cider_oracle(const std::vector<std::vector<int>>& hyps,
                    const std::vector<std::vector<std::vector<int>>>& refs) {
  using Gram = std::vector<int>;
  const double num_docs = static_cast<double>(hyps.size());
  double total = 0;
  for (int n = 1; n <= 4; ++n) {
    const auto grams_of = [&](const std::vector<int>& s) {
      std::map<Gram, double> tf;
      for (int i = 0; i + n <= static_cast<int>(s.size()); ++i)
        tf[Gram(s.begin() + i, s.begin() + i + n)] += 1.0;
      return tf;
    };
    std::map<Gram, double> df;
    for (const auto& set : refs) {
      std::map<Gram, bool> seen;
      for (const auto& r : set)
        for (const auto& [g, c] : grams_of(r)) seen[g] = true;
      for (const auto& [g, one] : seen) df[g] += 1.0;
    }
    const auto idf = [&](const Gram& g) {
      return std::log(num_docs / (df.count(g) ? std::max(1.0, df.at(g)) : 1.0));
    };
    const auto cosine = [](const std::map<Gram, double>& x, const std::map<Gram, double>& y) {
      double dot = 0, nx = 0, ny = 0;
      for (const auto& [g, v] : x) nx += v * v;
      for (const auto& [g, v] : y) ny += v * v;
      for (const auto& [g, v] : x)
        if (y.count(g)) dot += v * y.at(g);
      return (nx == 0 || ny == 0) ? 0.0 : dot / std::sqrt(nx * ny);
    };
    double per_n = 0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      const auto htf = grams_of(hyps[i]);
      double s = 0;
      for (const auto& r : refs[i]) {
        const auto rtf = grams_of(r);
        std::map<Gram, double> hw = htf, rw = rtf;
        for (auto& [g, v] : hw) v *= idf(g);
        for (auto& [g, v] : rw) v *= idf(g);
        double c = cosine(hw, rw);
        if (c == 0.0) {
          const auto dead = [](const std::map<Gram, double>& w) {
            for (const auto& [g, v] : w)
              if (v != 0.0) return false;
            return true;
          };
          if ((!hw.empty() && dead(hw)) || (!rw.empty() && dead(rw))) c = cosine(htf, rtf);
        }
        s += c;
      }
      per_n += refs[i].empty() ? 0.0 : s / refs[i].size();
    }
    total += per_n / num_docs;
  }
  return total / 4.0;
}

// ---------------------------------------------------------------- criterion 9

dtg::model::StepScorer table_scorer(int vocab, std::uint64_t seed) {
  return [vocab, seed](const std::vector<int>& prefix) {
    std::uint64_t h = seed;
    for (int tok : prefix) h = dtg::diff::mix_seed(h, static_cast<std::uint64_t>(tok) + 131);
    std::mt19937_64 rng(h);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> w(vocab);
    double total = 0;
    for (double& x : w) {
      x = u(rng);
      total += x;
    }
    for (double& x : w) x = std::log(x / total);
    return w;
  };
}

std::vector<int> exhaustive_best(const dtg::model::StepScorer& scorer, int vocab, int max_len) {
  std::vector<int> best;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<int> prefix{dtg::model::kBos};
  const std::function<void(double, int)> walk = [&](double logp, int generated) {
    if (generated == max_len) return;
    const std::vector<double> dist = scorer(prefix);
    for (int tok = 0; tok < vocab; ++tok) {
      const double lp = logp + dist[tok];
      prefix.push_back(tok);
      if (tok == dtg::model::kEos || generated + 1 == max_len) {
        const double norm = lp / (generated + 1);
        if (norm > best_score || (norm == best_score && prefix < best)) {
          best_score = norm;
          best = prefix;
        }
      }
      if (tok != dtg::model::kEos) walk(lp, generated + 1);
      prefix.pop_back();
    }
  };
  walk(0.0, 0);
  return best;
}

// ------------------------------------------------------------------- helpers

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("dtg_accept_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str() const { return path.string(); }
};

bool params_bitwise_equal(const dtg::model::ModelParams& a, const dtg::model::ModelParams& b) {
  if (a.store.entries().size() != b.store.entries().size()) return false;
  for (const auto& [name, entry] : a.store.entries()) {
    const auto& other = b.store.at(name);
    if (entry.value.values != other.value.values) return false;
    if (entry.m.values != other.m.values || entry.v.values != other.v.values) return false;
  }
  return true;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct R1Pair {
  double at05 = 0;
  double at07 = 0;
};

R1Pair held_out_recall(const RunConfig& cfg, dtg::model::ModelParams& params,
                       const dtg::data::Corpus& split) {
  const auto rows = dtg::harness::ground_corpus(cfg, params, split);
  std::vector<Interval> pred, gt;
  std::size_t i = 0;
  for (const auto& d : split)
    for (const auto& turn : d.turns) {
      pred.push_back({rows[i].tau_s, rows[i].tau_e});
      gt.push_back({static_cast<double>(turn.ts), static_cast<double>(turn.te)});
      ++i;
    }
  return {dtg::metrics::recall_at_iou(pred, gt, 0.5), dtg::metrics::recall_at_iou(pred, gt, 0.7)};
}

}  // namespace

int main() {
  const auto t_all = std::chrono::steady_clock::now();

  // ------------------------------------------------------------ criterion 1
  {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = primitives_pass_fd();

    // composed grounding loss over a miniature model and dialog
    RunConfig cfg = micro_config(17);
    dtg::data::CorpusGenerator gen(cfg.data, cfg.seed);
    const dtg::data::SyntheticDialog dialog = gen.make_dialog(0);
    cfg.model.vocab_size = gen.vocab().size();
    dtg::model::ModelParams params = dtg::model::ModelParams::init(cfg.model, 5);
    const int ti = static_cast<int>(dialog.turns.size()) - 1;
    ok = ok && composed_pass_fd(
                   params,
                   [&](Tape& t, ParamBinder& p) {
                     auto fwd = dtg::harness::grounding_forward(t, p, cfg.model, dialog, ti);
                     return dtg::harness::grounding_losses(t, fwd, dialog.turns[ti],
                                                           cfg.model.lambda)
                         .total;
                   },
                   20, 7771);

    // composed final loss: generation + contrastive under fixed clips
    dtg::model::ModelParams gen_params = dtg::model::ModelParams::init(cfg.model, 6);
    const auto history = dtg::harness::history_records(dialog, ti, nullptr);
    const Interval gt_iv{static_cast<double>(dialog.turns[ti].ts),
                         static_cast<double>(dialog.turns[ti].te)};
    const auto selection = dtg::harness::choose_turns(cfg, history, gt_iv);
    ok = ok && composed_pass_fd(
                   gen_params,
                   [&](Tape& t, ParamBinder& p) {
                     auto fwd = dtg::harness::generation_forward(t, p, cfg, dialog, ti,
                                                                 selection, gt_iv);
                     auto dec = dtg::model::decode_train(
                         t, p, cfg.model, fwd.m_use, fwd.key_mask,
                         dtg::harness::gold_sequence(dialog.turns[ti]));
                     std::mt19937_64 rng(31);  // identical clips on every evaluation
                     const auto clips = dtg::model::sample_clips(
                         gt_iv, dialog.m, cfg.contrastive.margin_ratio, rng);
                     Var pooled = dtg::harness::pooled_representation(t, fwd);
                     Var pos = dtg::harness::pooled_video_variant(
                         t, p, cfg, dialog, fwd,
                         dtg::model::video_attention_mask(clips.positive, dialog.m));
                     Var neg = dtg::harness::pooled_video_variant(
                         t, p, cfg, dialog, fwd,
                         dtg::model::video_attention_mask(clips.negative, dialog.m));
                     auto cl = dtg::model::contrastive_loss(t, pooled, pos, neg,
                                                            cfg.contrastive.beta);
                     return dtg::model::final_loss(t, dec.loss, cl.total,
                                                   cfg.contrastive.delta);
                   },
                   20, 8881);

    const double secs = seconds_since(t0);
    criterion(1, "finite-difference gradient checks (primitives + composed losses)",
              ok && secs < 60.0);
  }

  // ------------------------------------------------------------ criterion 2
  {
    bool ok = true;
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
      Tape t;
      std::uniform_real_distribution<double> u(0.1, 3.0);
      const double clip = u(rng), frame = u(rng), lgen = u(rng), lpos = u(rng), lneg = u(rng);
      const double lam = u(rng) / 3, beta = u(rng) / 3, delta = u(rng) / 3;

      Var cv = t.constant(Tensor::scalar(clip));
      Var fv = t.constant(Tensor::scalar(frame));
      const double g0 = t.value(dtg::model::grounding_loss(t, cv, fv, 0.0)).item();
      const double g1 = t.value(dtg::model::grounding_loss(t, cv, fv, 1.0)).item();
      const double gl = t.value(dtg::model::grounding_loss(t, cv, fv, lam)).item();
      ok = ok && std::fabs(gl - (g0 + lam * (g1 - g0))) < 1e-12;
      ok = ok && std::fabs(gl - (lam * clip + frame)) < 1e-12;

      Var use = t.constant(Tensor::vec({lpos, lneg, 0.5}));
      Var pos = t.constant(Tensor::vec({lneg, lpos, 0.25}));
      Var neg = t.constant(Tensor::vec({0.1, 0.2, 0.3}));
      const double c0 = t.value(dtg::model::contrastive_loss(t, use, pos, neg, 0.0).total).item();
      const double c1 = t.value(dtg::model::contrastive_loss(t, use, pos, neg, 1.0).total).item();
      const double cb = t.value(dtg::model::contrastive_loss(t, use, pos, neg, beta).total).item();
      ok = ok && std::fabs(cb - (c0 + beta * (c1 - c0))) < 1e-12;

      Var gv = t.constant(Tensor::scalar(lgen));
      Var ct = t.constant(Tensor::scalar(cb));
      const double f0 = t.value(dtg::model::final_loss(t, gv, ct, 0.0)).item();
      const double f1 = t.value(dtg::model::final_loss(t, gv, ct, 1.0)).item();
      const double fd = t.value(dtg::model::final_loss(t, gv, ct, delta)).item();
      ok = ok && std::fabs(fd - (f0 + delta * (f1 - f0))) < 1e-12;
      ok = ok && std::fabs(fd - (lgen + delta * cb)) < 1e-12;
    }
    criterion(2, "loss composition weights are exact (lambda, beta, delta affinity)", ok);
  }

  // ------------------------------------------------------------ criterion 3
  {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> pos(0.0, 31.0);
    for (int trial = 0; trial < 1000 && ok; ++trial) {
      const int n = static_cast<int>(rng() % 8);
      std::vector<dtg::model::TurnRecord> history;
      for (int i = 0; i < n; ++i) {
        dtg::model::TurnRecord r;
        r.turn_index = i + 1;
        double a = pos(rng), b = pos(rng);
        if (rng() % 5 == 0) {
          a = std::floor(a);
          b = a + (rng() % 3);
        }
        r.interval = Interval{std::min(a, b), std::max(a, b)};
        history.push_back(r);
      }
      double a = pos(rng), b = pos(rng);
      const Interval current{std::min(a, b), std::max(a, b)};
      const int k = 1 + static_cast<int>(rng() % 4);
      const auto got = dtg::model::select_turns(history, current, k);
      const auto want = brute_force_selection(history, current, k);
      ok = got.chosen == want.chosen && got.supplemented == want.supplemented &&
           got.ious == want.ious;
    }
    criterion(3, "turn selection matches brute force on 1000 randomized instances",
              ok && seconds_since(t0) < 10.0);
  }

  // ------------------------------------------------------------ criterion 4
  {
    bool ok = true;
    // exact zeros in masked softmax rows
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 20; ++trial) {
      Tape t;
      const int m = 3 + trial % 3, n = 4 + trial % 4;
      Tensor mask = Tensor::full({m, n}, 1.0);
      for (int i = 0; i < m; ++i) mask.at(i, (i + trial) % n) = 0.0;
      Var sm = t.masked_softmax(t.constant(Tensor::randn(rng, {m, n}, 3.0)), mask);
      const Tensor& val = t.value(sm);
      for (int i = 0; i < m && ok; ++i)
        for (int j = 0; j < n && ok; ++j)
          if (mask.at(i, j) == 0.0) ok = val.at(i, j) == 0.0;
    }

    // full pipeline: perturbing attention-masked frames leaves logits bitwise
    RunConfig cfg = micro_config(23);
    dtg::data::CorpusGenerator gen(cfg.data, cfg.seed);
    dtg::data::SyntheticDialog dialog = gen.make_dialog(1);
    cfg.model.vocab_size = gen.vocab().size();
    dtg::model::ModelParams params = dtg::model::ModelParams::init(cfg.model, 9);
    const int ti = static_cast<int>(dialog.turns.size()) - 1;
    const auto history = dtg::harness::history_records(dialog, ti, nullptr);
    const Interval iv{2.0, 5.0};
    const auto selection = dtg::harness::choose_turns(cfg, history, iv);

    const auto logits_for = [&](const dtg::data::SyntheticDialog& d) {
      Tape t;
      ParamBinder p(t, params.store);
      auto fwd = dtg::harness::generation_forward(t, p, cfg, d, ti, selection, iv);
      auto dec = dtg::model::decode_train(t, p, cfg.model, fwd.m_use, fwd.key_mask,
                                          dtg::harness::gold_sequence(d.turns[ti]));
      return t.value(dec.logits).values;
    };
    const auto base = logits_for(dialog);

    dtg::data::SyntheticDialog masked_perturbed = dialog;
    dtg::data::SyntheticDialog open_perturbed = dialog;
    for (int c = 0; c < cfg.model.d_v; ++c) {
      masked_perturbed.features.at(0, c) += 13.25;   // frame 0 is outside (2,5)
      masked_perturbed.features.at(9, c) -= 101.5;   // frame 9 is outside (2,5)
      open_perturbed.features.at(3, c) += 13.25;     // frame 3 is inside (2,5)
    }
    ok = ok && logits_for(masked_perturbed) == base;  // bitwise
    ok = ok && logits_for(open_perturbed) != base;    // the mask is not a blindfold
    criterion(4, "attention-masked frames are bitwise invisible to the decoder", ok);
  }

  // ------------------------------------------------------------ criterion 5
  {
    bool ok = true;
    using S = std::vector<int>;
    // BLEU-1 on "the cat sat" vs "the cat sat down"
    ok = ok && std::fabs(dtg::metrics::bleu({S{10, 11, 12}}, {S{10, 11, 12, 13}}, 1) -
                         std::exp(1.0 - 4.0 / 3.0)) < 1e-4;
    // ROUGE-L on "a b c" vs "a c"
    const double b2 = 1.2 * 1.2, pr = 2.0 / 3.0;
    ok = ok && std::fabs(dtg::metrics::rouge_l({1, 2, 3}, {1, 3}) -
                         (1 + b2) * pr / (1.0 + b2 * pr)) < 1e-4;
    // METEOR-lite reversed pair: two chunks of one, half the identity score
    ok = ok && std::fabs(dtg::metrics::meteor_lite({1, 2}, {2, 1}) - 0.5) < 1e-4;
    // identity and disjoint cases
    const S ident{3, 4, 5, 6, 7};
    ok = ok && std::fabs(dtg::metrics::bleu({ident}, {ident}, 4) - 1.0) < 1e-4;
    ok = ok && std::fabs(dtg::metrics::rouge_l(ident, ident) - 1.0) < 1e-4;
    ok = ok && std::fabs(dtg::metrics::cider({ident}, {{ident}}) - 1.0) < 1e-4;
    ok = ok && dtg::metrics::rouge_l({1, 2}, {3, 4}) == 0.0;
    ok = ok && std::fabs(dtg::metrics::cider({{1, 2, 3, 4}}, {{{5, 6, 7, 8}}})) < 1e-4;
    // CIDEr toy corpus against the brute-force TF-IDF oracle
    const std::vector<S> hyps{{5, 6, 7}, {5, 9}, {11, 12, 13, 14}};
    const std::vector<std::vector<S>> refs{{{5, 6, 8}}, {{5, 9, 10}}, {{11, 12, 13, 5}}};
    ok = ok && std::fabs(dtg::metrics::cider(hyps, refs) - cider_oracle(hyps, refs)) < 1e-12;
    // recall_at_iou equals direct counting on random instances
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(0.0, 31.0);
    for (int trial = 0; trial < 50 && ok; ++trial) {
      std::vector<Interval> pred, gt;
      for (int i = 0; i < 40; ++i) {
        double a = u(rng), b = u(rng);
        pred.push_back({std::min(a, b), std::max(a, b)});
        a = u(rng);
        b = u(rng);
        gt.push_back({std::min(a, b), std::max(a, b)});
      }
      for (double mu : {0.3, 0.5, 0.7}) {
        int hits = 0;
        for (std::size_t i = 0; i < pred.size(); ++i)
          if (dtg::model::interval_iou(pred[i], gt[i]) >= mu) ++hits;
        ok = ok && dtg::metrics::recall_at_iou(pred, gt, mu) ==
                       static_cast<double>(hits) / pred.size();
      }
    }
    criterion(5, "metric implementations match hand values and brute-force oracles", ok);
  }

  // ------------------------------------------------------------ criterion 9
  {
    bool ok = true;
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50 && ok; ++trial) {
      const int vocab = 3 + static_cast<int>(rng() % 2);
      const int max_len = 2 + static_cast<int>(rng() % 3);
      int width = 1;
      for (int i = 0; i < max_len; ++i) width *= vocab;
      const auto scorer = table_scorer(vocab, 9000 + trial);
      ok = dtg::model::beam_search(scorer, vocab, width, max_len) ==
           exhaustive_best(scorer, vocab, max_len);
    }
    for (int trial = 0; trial < 100 && ok; ++trial) {
      const int vocab = 3 + trial % 4;
      const auto scorer = table_scorer(vocab, 1000 + trial);
      std::vector<int> greedy{dtg::model::kBos};
      for (int step = 0; step < 6; ++step) {
        const auto dist = scorer(greedy);
        int arg = 0;
        for (int j = 1; j < vocab; ++j)
          if (dist[j] > dist[arg]) arg = j;
        greedy.push_back(arg);
        if (arg == dtg::model::kEos) break;
      }
      ok = dtg::model::beam_search(scorer, vocab, 1, 6) == greedy;
    }
    criterion(9, "beam search is optimal at full width and greedy at width one", ok);
  }

  // ----------------------------------------------------------- criterion 10
  {
    bool ok = true;
    RunConfig cfg = micro_config(100);
    cfg.train.grounding_epochs = 2;
    cfg.train.generation_epochs = 1;
    dtg::data::CorpusGenerator gen(cfg.data, cfg.seed);
    cfg.model.vocab_size = gen.vocab().size();
    const auto corpus = gen.make_split(4, 0);

    const TempDir d1("det1"), d2("det2");
    dtg::harness::TrainOptions o1, o2;
    o1.out_dir = d1.str();
    o1.keep_epoch_checkpoints = true;
    o2.out_dir = d2.str();
    const auto a = dtg::harness::train(cfg, corpus, o1);
    const auto b = dtg::harness::train(cfg, corpus, o2);
    ok = ok && params_bitwise_equal(a.checkpoint.params, b.checkpoint.params);
    ok = ok && slurp(a.checkpoint_path) == slurp(b.checkpoint_path);
    ok = ok && !slurp(a.checkpoint_path).empty();

    // resume from the first grounding epoch reproduces the tail of the run
    dtg::harness::TrainOptions res;
    res.resume_path = d1.str() + "/checkpoint_stage1_epoch1.bin";
    const auto cont = dtg::harness::train(cfg, corpus, res);
    ok = ok && cont.log.size() < a.log.size() && !cont.log.empty();
    if (ok) {
      const std::size_t off = a.log.size() - cont.log.size();
      for (std::size_t i = 0; i < cont.log.size(); ++i)
        ok = ok && cont.log[i].total == a.log[off + i].total &&
             cont.log[i].step == a.log[off + i].step;
      ok = ok && params_bitwise_equal(cont.checkpoint.params, a.checkpoint.params);
    }

    // dataset round trip is exact
    const TempDir dd("data");
    dtg::data::write_corpus_dir(gen, dd.str());
    const auto back = dtg::data::read_split(dd.str(), "train");
    ok = ok && back.size() == static_cast<std::size_t>(cfg.data.train_dialogs);
    const auto orig = gen.make_split(cfg.data.train_dialogs, 0);
    for (std::size_t i = 0; i < back.size() && ok; ++i) {
      ok = back[i].video_id == orig[i].video_id &&
           back[i].features.values == orig[i].features.values;
      for (std::size_t t = 0; ok && t < back[i].turns.size(); ++t)
        ok = back[i].turns[t].q == orig[i].turns[t].q &&
             back[i].turns[t].a == orig[i].turns[t].a &&
             back[i].turns[t].ts == orig[i].turns[t].ts &&
             back[i].turns[t].te == orig[i].turns[t].te;
    }
    criterion(10, "fixed seeds are bit-exact; resume and dataset round trips are exact", ok);
  }

  // ------------------------------------------------------------ criterion 6
  {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> r05, r07;
    for (std::uint64_t seed : {301, 302, 303}) {
      RunConfig cfg;  // default corpus: 2000 dialogs, m=32, sigma=0.1
      cfg.seed = seed;
      cfg.model.d = 32;
      cfg.model.heads = 2;
      cfg.model.text_layers = cfg.model.video_layers = 1;
      cfg.train.lr = 1e-3;
      cfg.train.grounding_epochs = 6;
      cfg.train.generation_epochs = 0;
      dtg::data::CorpusGenerator gen(cfg.data, cfg.seed);
      cfg.model.vocab_size = gen.vocab().size();
      const auto train_set = gen.make_split(cfg.data.train_dialogs, 0);
      const auto held_out = gen.make_split(cfg.data.val_dialogs, cfg.data.train_dialogs);
      auto result = dtg::harness::train(cfg, train_set, {});
      const R1Pair rec = held_out_recall(cfg, result.checkpoint.params, held_out);
      std::printf("        seed %llu: R1@0.5 = %.3f, R1@0.7 = %.3f\n",
                  static_cast<unsigned long long>(seed), rec.at05, rec.at07);
      std::fflush(stdout);
      r05.push_back(rec.at05);
      r07.push_back(rec.at07);
    }
    const double m05 = median_of(r05), m07 = median_of(r07);
    const double secs = seconds_since(t0);
    std::printf("        medians: R1@0.5 = %.3f (need >= 0.80), R1@0.7 = %.3f (need >= 0.60),"
                " %.0f s\n", m05, m07, secs);
    criterion(6, "grounding learns the synthetic corpus (held-out R1 over 3 seeds)",
              m05 >= 0.80 && m07 >= 0.60 && secs < 900.0);
  }

  // ------------------------------------------------------------ criterion 7
  {
    // held-out BLEU-4 with beam answers
    RunConfig cfg;
    cfg.seed = 401;
    cfg.model.d = 32;
    cfg.model.heads = 2;
    cfg.model.text_layers = cfg.model.video_layers = 1;
    cfg.train.lr = 1e-3;
    cfg.train.grounding_epochs = 6;
    cfg.train.generation_epochs = 4;
    cfg.data.train_dialogs = 500;
    dtg::data::CorpusGenerator gen(cfg.data, cfg.seed);
    cfg.model.vocab_size = gen.vocab().size();
    const auto train_set = gen.make_split(cfg.data.train_dialogs, 0);
    const auto held_out = gen.make_split(50, cfg.data.train_dialogs);
    auto result = dtg::harness::train(cfg, train_set, {});
    const auto eval = dtg::harness::evaluate(cfg, result.checkpoint.params, held_out, {});
    std::printf("        held-out BLEU-4 = %.3f (need >= 0.5)\n", eval.report.bleu4);

    // overfit one sample: L_generate < 0.1 within 500 steps
    RunConfig one = micro_config(402);
    dtg::data::CorpusGenerator gen1(one.data, one.seed);
    one.model.vocab_size = gen1.vocab().size();
    one.train.lr = 3e-3;
    one.train.batch_size = 1;
    one.train.grounding_epochs = 0;
    one.train.generation_epochs = 500;
    one.contrastive.enabled = false;
    dtg::data::Corpus single{gen1.make_dialog(0)};
    single[0].turns.resize(1);
    dtg::harness::TrainOptions opts;
    opts.max_steps_per_stage = 500;
    const auto over = dtg::harness::train(one, single, opts);
    double best = std::numeric_limits<double>::infinity();
    long best_step = -1;
    for (const auto& rec : over.log)
      if (rec.stage == 2 && rec.l_generate < best) {
        best = rec.l_generate;
        best_step = rec.step;
      }
    std::printf("        overfit-one-sample: min L_generate = %.4f at step %ld (need < 0.1)\n",
                best, best_step);
    criterion(7, "generation learns (held-out BLEU-4 and one-sample overfit)",
              eval.report.bleu4 >= 0.5 && best < 0.1);
  }

  // ------------------------------------------------------------ criterion 8
  {
    RunConfig cfg;
    cfg.model.d = 32;
    cfg.model.heads = 2;
    cfg.model.text_layers = cfg.model.video_layers = 1;
    cfg.train.lr = 1e-3;
    cfg.train.grounding_epochs = 4;
    cfg.train.generation_epochs = 2;
    cfg.data.train_dialogs = 2000;
    cfg.data.test_dialogs = 60;
    dtg::data::CorpusGenerator gen(cfg.data, 500);
    cfg.model.vocab_size = gen.vocab().size();
    const auto train_set = gen.make_split(cfg.data.train_dialogs, 0);
    const auto test_set = gen.make_split(cfg.data.test_dialogs, cfg.data.train_dialogs);
    const std::vector<std::uint64_t> seeds{501, 502, 503, 504, 505};
    dtg::harness::AblateOptions aopts;
    aopts.generation_dialogs = 400;
    const auto rows = dtg::harness::ablate(cfg, train_set, test_set, seeds, aopts);
    std::map<std::string, double> cider;
    for (const auto& row : rows) {
      cider[row.name] = row.median.cider;
      std::printf("        %-8s median CIDEr = %.4f\n", row.name.c_str(), row.median.cider);
    }
    const double base = cider.at("baseline"), mid = cider.at("ts"),
                 tsvm = cider.at("ts+vm"), full = cider.at("ts+vm+c");
    std::printf("        middle rung (TS only, reported not gated): %.4f\n", mid);
    criterion(8, "ablation ladder: full >= TS+VM >= baseline with a positive gap",
              full >= tsvm && tsvm >= base && full - base > 0.0);
  }

  std::printf("total runtime: %.0f s\n", seconds_since(t_all));
  if (g_failures) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
