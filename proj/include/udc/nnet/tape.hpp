#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "udc/nnet/params.hpp"
#include "udc/nnet/tensor.hpp"

namespace udc::nn {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode trace. One tape per forward pass; it is discarded (or
/// reset) after backward so no state leaks across training steps. A tape built
/// with `requires_grad == false` only evaluates values.
class Tape {
 public:
  explicit Tape(bool requires_grad = true) : requires_grad_(requires_grad) {}

  bool requires_grad() const { return requires_grad_; }
  void reset();

  Var constant(Matrix value);
  Var scalar(double v) { return constant(Matrix(1, 1, v)); }
  /// Leaf bound to a parameter; repeated requests return the same Var.
  Var parameter(const ParamStore& store, int index);
  Var parameter(const ParamStore& store, std::string_view name) {
    return parameter(store, store.index(name));
  }

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  double scalar_value(Var v) const;
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  /// Back-propagates d(loss)/d(.) from a 1x1 loss.
  void backward(Var loss);
  /// Parameter gradients after backward, aligned with `store`.
  Gradients gradients(const ParamStore& store) const;
  /// Adds the parameter gradients (times scale) into `grads`.
  void accumulate_gradients(const ParamStore& store, Gradients& grads, double scale = 1.0) const;

  // Used by op implementations.
  using Backward = std::function<void(Tape&, int self)>;
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward back);
  Var record(Matrix value, const std::vector<Var>& inputs, Backward back);
  Matrix& grad(int id);
  const Matrix& grad_of(int id) const { return nodes_[id].grad; }
  const Matrix& value_of(int id) const { return nodes_[id].value; }
  bool node_needs_grad(int id) const { return nodes_[id].needs_grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward back;
    int param = -1;
    bool needs_grad = false;
  };
  bool requires_grad_;
  std::vector<Node> nodes_;
  std::unordered_map<int, int> param_vars_;
  const ParamStore* store_ = nullptr;
};

// ---------------------------------------------------------------------------
// Primitives. All take row-major operands; "rows" are items (nodes, edges).

Var matmul(Tape& t, Var a, Var b);
/// a * b^T
Var matmul_nt(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
/// Adds a 1 x c row to every row of a.
Var add_row(Tape& t, Var a, Var row);
Var hadamard(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
Var silu(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
Var tanh(Tape& t, Var a);
Var sum(Tape& t, Var a);
Var sum_squares(Tape& t, Var a);
Var mean_rows(Tape& t, Var a);
Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var gather_rows(Tape& t, Var a, const std::vector<int>& rows);
/// out[r] = mean of a[i] over i with index[i] == r; rows with no entry are zero.
Var scatter_mean_rows(Tape& t, Var a, const std::vector<int>& index, int out_rows);
/// sum_i w_i * s_i over 1x1 scalars.
Var weighted_sum(Tape& t, const std::vector<Var>& scalars, const std::vector<double>& weights);

enum class BnMode { kTrain, kInfer };

struct BnBatchStats {
  std::vector<double> mean;
  std::vector<double> var;  // unbiased when rows > 1
  int rows = 0;
};

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

/// Per-column batch normalization with affine gamma/beta (1 x c). Train mode
/// normalizes with batch statistics (optionally reported through `stats`);
/// infer mode uses the supplied running statistics.
Var batch_norm(Tape& t, Var x, Var gamma, Var beta, BnMode mode, const Matrix& running_mean,
               const Matrix& running_var, BnBatchStats* stats = nullptr);

/// Log-probability of one choice under a masked softmax.
///
/// The candidate set is `entries` (flat indices into `scores`) plus
/// `const_count` extra candidates that all carry the fixed logit
/// `const_value`. `chosen` indexes `entries`, or is -1 when the choice is one
/// of the constant candidates (the log-probability of that specific one).
Var log_softmax_pick(Tape& t, Var scores, const std::vector<int>& entries, double const_value,
                     int const_count, int chosen);

/// Probabilities matching log_softmax_pick: one per entry, plus the total mass
/// of the constant group as the last element.
std::vector<double> softmax_probs(const Matrix& scores, const std::vector<int>& entries,
                                  double const_value, int const_count);

}  // namespace udc::nn
