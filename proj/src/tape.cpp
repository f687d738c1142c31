#include "udc/nnet/tape.hpp"

#include <algorithm>
#include <cmath>

namespace udc::nn {

void Tape::reset() {
  nodes_.clear();
  param_vars_.clear();
  store_ = nullptr;
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, -1, false});
  return Var{size() - 1};
}

Var Tape::parameter(const ParamStore& store, int index) {
  if (store_ != nullptr && store_ != &store) {
    throw Error("invalid_argument", "one tape binds parameters from a single store");
  }
  store_ = &store;
  auto it = param_vars_.find(index);
  if (it != param_vars_.end()) return Var{it->second};
  const Parameter& p = store.at(index);
  nodes_.push_back(Node{p.value, {}, {}, index, requires_grad_ && p.trainable});
  param_vars_.emplace(index, size() - 1);
  return Var{size() - 1};
}

double Tape::scalar_value(Var v) const {
  const Matrix& m = value(v);
  if (m.rows != 1 || m.cols != 1) throw Error("shape_mismatch", "expected a scalar, got " + m.shape_str());
  return m.data[0];
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward back) {
  bool needs = false;
  if (requires_grad_) {
    for (Var in : inputs) needs = needs || nodes_[in.id].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(back) : Backward{}, -1, needs});
  return Var{size() - 1};
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Backward back) {
  bool needs = false;
  if (requires_grad_) {
    for (Var in : inputs) needs = needs || nodes_[in.id].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(back) : Backward{}, -1, needs});
  return Var{size() - 1};
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size() || !n.grad.same_shape(n.value)) {
    n.grad = Matrix(n.value.rows, n.value.cols);
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!requires_grad_) throw Error("invalid_argument", "backward on a no-grad tape");
  const Matrix& lv = value(loss);
  if (lv.rows != 1 || lv.cols != 1) throw Error("shape_mismatch", "loss is not scalar: " + lv.shape_str());
  for (auto& n : nodes_) n.grad = Matrix();
  grad(loss.id).data[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || !n.back || n.grad.size() == 0) continue;
    n.back(*this, id);
  }
}

Gradients Tape::gradients(const ParamStore& store) const {
  Gradients g = store.zero_gradients();
  accumulate_gradients(store, g, 1.0);
  return g;
}

void Tape::accumulate_gradients(const ParamStore& store, Gradients& grads, double scale) const {
  if (store_ != nullptr && store_ != &store) {
    throw Error("invalid_argument", "gradients requested for a different store");
  }
  for (auto [pidx, vid] : param_vars_) {
    const Matrix& g = nodes_[vid].grad;
    if (g.size() == 0) continue;
    Matrix& dst = grads.at(pidx);
    for (std::size_t k = 0; k < g.size(); ++k) dst.data[k] += scale * g.data[k];
  }
}

// ---------------------------------------------------------------------------

namespace {

void require_same(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_mismatch(op, a, b);
}

double sigmoid_of(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  Matrix out;
  gemm(t.value(a), t.value(b), out);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.node_needs_grad(a.id)) gemm_nt_acc(g, tp.value_of(b.id), tp.grad(a.id));
    if (tp.node_needs_grad(b.id)) gemm_tn_acc(tp.value_of(a.id), g, tp.grad(b.id));
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.cols != bv.cols) shape_mismatch("matmul_nt", av, bv);
  Matrix out(av.rows, bv.rows);
  gemm_nt_acc(av, bv, out);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);  // r x s
    if (tp.node_needs_grad(a.id)) {
      Matrix& ga = tp.grad(a.id);  // r x k
      const Matrix& bv2 = tp.value_of(b.id);  // s x k
      for (int i = 0; i < g.rows; ++i) {
        for (int j = 0; j < g.cols; ++j) {
          const double gv = g(i, j);
          if (gv == 0.0) continue;
          const double* br = bv2.row(j);
          double* gr = ga.row(i);
          for (int k = 0; k < bv2.cols; ++k) gr[k] += gv * br[k];
        }
      }
    }
    if (tp.node_needs_grad(b.id)) gemm_tn_acc(g, tp.value_of(a.id), tp.grad(b.id));
  });
}

Var add(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  require_same("add", av, bv);
  Matrix out = av;
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += bv.data[k];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    for (Var in : {a, b}) {
      if (!tp.node_needs_grad(in.id)) continue;
      Matrix& gi = tp.grad(in.id);
      for (std::size_t k = 0; k < g.size(); ++k) gi.data[k] += g.data[k];
    }
  });
}

Var add_row(Tape& t, Var a, Var row) {
  const Matrix& av = t.value(a);
  const Matrix& rv = t.value(row);
  if (rv.rows != 1 || rv.cols != av.cols) shape_mismatch("add_row", av, rv);
  Matrix out = av;
  for (int i = 0; i < out.rows; ++i) {
    double* o = out.row(i);
    for (int j = 0; j < out.cols; ++j) o[j] += rv.data[j];
  }
  return t.record(std::move(out), {a, row}, [a, row](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.node_needs_grad(a.id)) {
      Matrix& ga = tp.grad(a.id);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k];
    }
    if (tp.node_needs_grad(row.id)) {
      Matrix& gr = tp.grad(row.id);
      for (int i = 0; i < g.rows; ++i) {
        const double* gi = g.row(i);
        for (int j = 0; j < g.cols; ++j) gr.data[j] += gi[j];
      }
    }
  });
}

Var hadamard(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  require_same("hadamard", av, bv);
  Matrix out = av;
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= bv.data[k];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.node_needs_grad(a.id)) {
      Matrix& ga = tp.grad(a.id);
      const Matrix& bv2 = tp.value_of(b.id);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * bv2.data[k];
    }
    if (tp.node_needs_grad(b.id)) {
      Matrix& gb = tp.grad(b.id);
      const Matrix& av2 = tp.value_of(a.id);
      for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] += g.data[k] * av2.data[k];
    }
  });
}

Var scale(Tape& t, Var a, double s) {
  Matrix out = t.value(a);
  for (double& x : out.data) x *= s;
  return t.record(std::move(out), {a}, [a, s](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += s * g.data[k];
  });
}

Var silu(Tape& t, Var a) {
  Matrix out = t.value(a);
  for (double& x : out.data) x = x * sigmoid_of(x);
  return t.record(std::move(out), {a}, [a](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    const Matrix& x = tp.value_of(a.id);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double s = sigmoid_of(x.data[k]);
      ga.data[k] += g.data[k] * s * (1.0 + x.data[k] * (1.0 - s));
    }
  });
}

Var sigmoid(Tape& t, Var a) {
  Matrix out = t.value(a);
  for (double& x : out.data) x = sigmoid_of(x);
  return t.record(std::move(out), {a}, [a](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    const Matrix& y = tp.value_of(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * y.data[k] * (1.0 - y.data[k]);
  });
}

Var tanh(Tape& t, Var a) {
  Matrix out = t.value(a);
  for (double& x : out.data) x = std::tanh(x);
  return t.record(std::move(out), {a}, [a](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    const Matrix& y = tp.value_of(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * (1.0 - y.data[k] * y.data[k]);
  });
}

Var sum(Tape& t, Var a) {
  double s = 0;
  for (double x : t.value(a).data) s += x;
  return t.record(Matrix(1, 1, s), {a}, [a](Tape& tp, int self) {
    const double g = tp.grad_of(self).data[0];
    Matrix& ga = tp.grad(a.id);
    for (double& x : ga.data) x += g;
  });
}

Var sum_squares(Tape& t, Var a) {
  double s = 0;
  for (double x : t.value(a).data) s += x * x;
  return t.record(Matrix(1, 1, s), {a}, [a](Tape& tp, int self) {
    const double g = tp.grad_of(self).data[0];
    const Matrix& x = tp.value_of(a.id);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t k = 0; k < x.size(); ++k) ga.data[k] += 2.0 * g * x.data[k];
  });
}

Var mean_rows(Tape& t, Var a) {
  const Matrix& av = t.value(a);
  if (av.rows == 0) throw Error("shape_mismatch", "mean over zero rows");
  Matrix out(1, av.cols);
  for (int i = 0; i < av.rows; ++i) {
    const double* r = av.row(i);
    for (int j = 0; j < av.cols; ++j) out.data[j] += r[j];
  }
  const double inv = 1.0 / av.rows;
  for (double& x : out.data) x *= inv;
  return t.record(std::move(out), {a}, [a, inv](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    Matrix& ga = tp.grad(a.id);
    for (int i = 0; i < ga.rows; ++i) {
      double* r = ga.row(i);
      for (int j = 0; j < ga.cols; ++j) r[j] += g.data[j] * inv;
    }
  });
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("shape_mismatch", "concat of nothing");
  const int rows = t.value(parts[0]).rows;
  int cols = 0;
  for (Var p : parts) {
    if (t.value(p).rows != rows) shape_mismatch("concat_cols", t.value(parts[0]), t.value(p));
    cols += t.value(p).cols;
  }
  Matrix out(rows, cols);
  int off = 0;
  for (Var p : parts) {
    const Matrix& pv = t.value(p);
    for (int i = 0; i < rows; ++i) {
      std::copy(pv.row(i), pv.row(i) + pv.cols, out.row(i) + off);
    }
    off += pv.cols;
  }
  return t.record(std::move(out), parts, [parts](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    int offset = 0;
    for (Var p : parts) {
      const int c = tp.value_of(p.id).cols;
      if (tp.node_needs_grad(p.id)) {
        Matrix& gp = tp.grad(p.id);
        for (int i = 0; i < g.rows; ++i) {
          const double* gr = g.row(i) + offset;
          double* dst = gp.row(i);
          for (int j = 0; j < c; ++j) dst[j] += gr[j];
        }
      }
      offset += c;
    }
  });
}

Var gather_rows(Tape& t, Var a, const std::vector<int>& rows) {
  const Matrix& av = t.value(a);
  Matrix out(static_cast<int>(rows.size()), av.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= av.rows) throw Error("shape_mismatch", "gather row out of range");
    std::copy(av.row(rows[i]), av.row(rows[i]) + av.cols, out.row(static_cast<int>(i)));
  }
  return t.record(std::move(out), {a}, [a, rows](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double* gr = g.row(static_cast<int>(i));
      double* dst = ga.row(rows[i]);
      for (int j = 0; j < g.cols; ++j) dst[j] += gr[j];
    }
  });
}

Var scatter_mean_rows(Tape& t, Var a, const std::vector<int>& index, int out_rows) {
  const Matrix& av = t.value(a);
  if (static_cast<int>(index.size()) != av.rows) throw Error("shape_mismatch", "scatter index size");
  std::vector<double> inv(out_rows, 0.0);
  for (int r : index) {
    if (r < 0 || r >= out_rows) throw Error("shape_mismatch", "scatter index out of range");
    inv[r] += 1.0;
  }
  for (double& c : inv) c = c > 0 ? 1.0 / c : 0.0;
  Matrix out(out_rows, av.cols);
  for (int i = 0; i < av.rows; ++i) {
    const double* src = av.row(i);
    double* dst = out.row(index[i]);
    const double w = inv[index[i]];
    for (int j = 0; j < av.cols; ++j) dst[j] += w * src[j];
  }
  return t.record(std::move(out), {a}, [a, index, inv](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    Matrix& ga = tp.grad(a.id);
    for (std::size_t i = 0; i < index.size(); ++i) {
      const double* gr = g.row(index[i]);
      double* dst = ga.row(static_cast<int>(i));
      const double w = inv[index[i]];
      for (int j = 0; j < g.cols; ++j) dst[j] += w * gr[j];
    }
  });
}

Var weighted_sum(Tape& t, const std::vector<Var>& scalars, const std::vector<double>& weights) {
  if (scalars.size() != weights.size()) throw Error("shape_mismatch", "weighted_sum sizes");
  double s = 0;
  for (std::size_t i = 0; i < scalars.size(); ++i) s += weights[i] * t.scalar_value(scalars[i]);
  if (scalars.empty()) return t.scalar(0.0);
  return t.record(Matrix(1, 1, s), scalars, [scalars, weights](Tape& tp, int self) {
    const double g = tp.grad_of(self).data[0];
    for (std::size_t i = 0; i < scalars.size(); ++i) {
      if (tp.node_needs_grad(scalars[i].id)) tp.grad(scalars[i].id).data[0] += g * weights[i];
    }
  });
}

Var batch_norm(Tape& t, Var x, Var gamma, Var beta, BnMode mode, const Matrix& running_mean,
               const Matrix& running_var, BnBatchStats* stats) {
  const Matrix& xv = t.value(x);
  const Matrix& gv = t.value(gamma);
  const Matrix& bv = t.value(beta);
  const int rows = xv.rows;
  const int cols = xv.cols;
  if (gv.cols != cols || bv.cols != cols) shape_mismatch("batch_norm", xv, gv);
  std::vector<double> mean(cols, 0.0), var(cols, 0.0);
  if (mode == BnMode::kTrain) {
    if (rows == 0) throw Error("shape_mismatch", "batch norm over zero rows");
    for (int i = 0; i < rows; ++i) {
      const double* r = xv.row(i);
      for (int j = 0; j < cols; ++j) mean[j] += r[j];
    }
    for (double& m : mean) m /= rows;
    for (int i = 0; i < rows; ++i) {
      const double* r = xv.row(i);
      for (int j = 0; j < cols; ++j) {
        const double d = r[j] - mean[j];
        var[j] += d * d;
      }
    }
    for (double& v : var) v /= rows;
    if (stats != nullptr) {
      stats->mean = mean;
      stats->var = var;
      if (rows > 1) {
        for (double& v : stats->var) v *= static_cast<double>(rows) / (rows - 1);
      }
      stats->rows = rows;
    }
  } else {
    mean = running_mean.data;
    var = running_var.data;
  }
  std::vector<double> inv_std(cols);
  for (int j = 0; j < cols; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + kBnEps);
  Matrix xhat(rows, cols);
  Matrix out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const double* r = xv.row(i);
    double* h = xhat.row(i);
    double* o = out.row(i);
    for (int j = 0; j < cols; ++j) {
      h[j] = (r[j] - mean[j]) * inv_std[j];
      o[j] = gv.data[j] * h[j] + bv.data[j];
    }
  }
  const bool train = mode == BnMode::kTrain;
  return t.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), inv_std, train](Tape& tp, int self) {
                    const Matrix& g = tp.grad_of(self);
                    const int r = g.rows;
                    const int c = g.cols;
                    std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
                    for (int i = 0; i < r; ++i) {
                      const double* gr = g.row(i);
                      const double* hr = xhat.row(i);
                      for (int j = 0; j < c; ++j) {
                        sum_g[j] += gr[j];
                        sum_gx[j] += gr[j] * hr[j];
                      }
                    }
                    if (tp.node_needs_grad(gamma.id)) {
                      Matrix& gg = tp.grad(gamma.id);
                      for (int j = 0; j < c; ++j) gg.data[j] += sum_gx[j];
                    }
                    if (tp.node_needs_grad(beta.id)) {
                      Matrix& gb = tp.grad(beta.id);
                      for (int j = 0; j < c; ++j) gb.data[j] += sum_g[j];
                    }
                    if (tp.node_needs_grad(x.id)) {
                      const Matrix& gam = tp.value_of(gamma.id);
                      Matrix& gx = tp.grad(x.id);
                      for (int i = 0; i < r; ++i) {
                        const double* gr = g.row(i);
                        const double* hr = xhat.row(i);
                        double* dst = gx.row(i);
                        for (int j = 0; j < c; ++j) {
                          const double k = gam.data[j] * inv_std[j];
                          if (train) {
                            dst[j] += k * (gr[j] - sum_g[j] / r - hr[j] * sum_gx[j] / r);
                          } else {
                            dst[j] += k * gr[j];
                          }
                        }
                      }
                    }
                  });
}

std::vector<double> softmax_probs(const Matrix& scores, const std::vector<int>& entries,
                                  double const_value, int const_count) {
  if (entries.empty() && const_count == 0) throw Error("all_masked", "softmax row has no candidate");
  double mx = const_count > 0 ? const_value : -INFINITY;
  for (int e : entries) mx = std::max(mx, scores.data[e]);
  std::vector<double> p(entries.size() + 1, 0.0);
  double z = 0;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    p[k] = std::exp(scores.data[entries[k]] - mx);
    z += p[k];
  }
  p.back() = const_count > 0 ? const_count * std::exp(const_value - mx) : 0.0;
  z += p.back();
  for (double& x : p) x /= z;
  return p;
}

Var log_softmax_pick(Tape& t, Var scores, const std::vector<int>& entries, double const_value,
                     int const_count, int chosen) {
  const Matrix& sv = t.value(scores);
  if (entries.empty() && const_count == 0) throw Error("all_masked", "softmax row has no candidate");
  if (chosen < -1 || chosen >= static_cast<int>(entries.size()) || (chosen == -1 && const_count == 0)) {
    throw Error("invalid_argument", "chosen candidate is not in the set");
  }
  double mx = const_count > 0 ? const_value : -INFINITY;
  for (int e : entries) mx = std::max(mx, sv.data[e]);
  double z = const_count > 0 ? const_count * std::exp(const_value - mx) : 0.0;
  for (int e : entries) z += std::exp(sv.data[e] - mx);
  const double lse = mx + std::log(z);
  const double picked = chosen >= 0 ? sv.data[entries[chosen]] : const_value;
  return t.record(Matrix(1, 1, picked - lse), {scores},
                  [scores, entries, chosen, lse](Tape& tp, int self) {
                    const double g = tp.grad_of(self).data[0];
                    const Matrix& s = tp.value_of(scores.id);
                    Matrix& gs = tp.grad(scores.id);
                    for (std::size_t k = 0; k < entries.size(); ++k) {
                      const double p = std::exp(s.data[entries[k]] - lse);
                      gs.data[entries[k]] += g * ((static_cast<int>(k) == chosen ? 1.0 : 0.0) - p);
                    }
                  });
}

}  // namespace udc::nn
