#pragma once

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "udc/nnet/tensor.hpp"

namespace udc::nn {

/// A named tensor. Values are kept representable as 32-bit floats (rounded at
/// initialization and after every optimizer step) so a checkpoint holds them
/// exactly; arithmetic runs in double.
struct Parameter {
  std::string name;
  Matrix value;
  bool trainable = true;
};

struct AdamState {
  long step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Matrix> m;  // aligned with parameters, zero-initialized
  std::vector<Matrix> v;
};

/// Gradients aligned with ParamStore indices. Untouched parameters hold zeros.
using Gradients = std::vector<Matrix>;

class ParamStore {
 public:
  /// Registers a parameter; returns its index. Names must be unique.
  int add(std::string name, Matrix value, bool trainable = true);

  int index(std::string_view name) const;
  bool contains(std::string_view name) const;
  int size() const { return static_cast<int>(params_.size()); }

  Parameter& at(int i) { return params_[i]; }
  const Parameter& at(int i) const { return params_[i]; }
  Parameter& at(std::string_view name) { return params_[index(name)]; }
  const Parameter& at(std::string_view name) const { return params_[index(name)]; }
  const Matrix& value(std::string_view name) const { return at(name).value; }

  AdamState& adam() { return adam_; }
  const AdamState& adam() const { return adam_; }

  Gradients zero_gradients() const;
  /// Gradients keyed by parameter name.
  std::map<std::string, Matrix> named(const Gradients& grads) const;

  std::vector<Parameter>::const_iterator begin() const { return params_.begin(); }
  std::vector<Parameter>::const_iterator end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, int> by_name_;
  AdamState adam_;
};

float round_f32(double v);
void round_to_f32(Matrix& m);

/// Glorot-uniform initialization with an explicit stream.
Matrix glorot(int rows, int cols, Rng& rng);

/// One Adam update (bias-corrected). A non-finite gradient aborts the step
/// before any parameter changes and names the offending tensor.
void adam_step(ParamStore& store, const Gradients& grads);

/// grads += scale * other
void accumulate(Gradients& grads, const Gradients& other, double scale = 1.0);
double global_norm(const Gradients& grads);

}  // namespace udc::nn
