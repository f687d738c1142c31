#include "udc/nnet/params.hpp"

#include <cmath>

namespace udc::nn {

int ParamStore::add(std::string name, Matrix value, bool trainable) {
  if (by_name_.count(name)) throw Error("invalid_argument", "duplicate parameter " + name);
  round_to_f32(value);
  const int id = size();
  by_name_.emplace(name, id);
  adam_.m.emplace_back(value.rows, value.cols);
  adam_.v.emplace_back(value.rows, value.cols);
  params_.push_back(Parameter{std::move(name), std::move(value), trainable});
  return id;
}

int ParamStore::index(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw Error("unknown_parameter", std::string(name));
  return it->second;
}

bool ParamStore::contains(std::string_view name) const {
  return by_name_.count(std::string(name)) != 0;
}

Gradients ParamStore::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.value.rows, p.value.cols);
  return g;
}

std::map<std::string, Matrix> ParamStore::named(const Gradients& grads) const {
  std::map<std::string, Matrix> out;
  for (int i = 0; i < size(); ++i) out.emplace(params_[i].name, grads.at(i));
  return out;
}

float round_f32(double v) { return static_cast<float>(v); }

void round_to_f32(Matrix& m) {
  for (double& x : m.data) x = static_cast<double>(static_cast<float>(x));
}

Matrix glorot(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  const double limit = std::sqrt(6.0 / (rows + cols));
  for (double& x : m.data) x = rng.uniform(-limit, limit);
  return m;
}

void adam_step(ParamStore& store, const Gradients& grads) {
  if (static_cast<int>(grads.size()) != store.size()) {
    throw Error("shape_mismatch", "gradient list does not match parameter store");
  }
  for (int i = 0; i < store.size(); ++i) {
    if (!grads[i].same_shape(store.at(i).value)) {
      throw Error("shape_mismatch", "gradient for " + store.at(i).name);
    }
    for (double g : grads[i].data) {
      if (!std::isfinite(g)) throw Error("nan_gradient", store.at(i).name);
    }
  }
  AdamState& st = store.adam();
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (int i = 0; i < store.size(); ++i) {
    Parameter& p = store.at(i);
    if (!p.trainable) continue;
    Matrix& m = st.m[i];
    Matrix& v = st.v[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = grads[i].data[k];
      m.data[k] = round_f32(st.beta1 * m.data[k] + (1 - st.beta1) * g);
      v.data[k] = round_f32(st.beta2 * v.data[k] + (1 - st.beta2) * g * g);
      const double mhat = m.data[k] / bc1;
      const double vhat = v.data[k] / bc2;
      p.value.data[k] = round_f32(p.value.data[k] - st.lr * mhat / (std::sqrt(vhat) + st.eps));
    }
  }
}

void accumulate(Gradients& grads, const Gradients& other, double scale) {
  if (grads.size() != other.size()) throw Error("shape_mismatch", "gradient lists differ");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (std::size_t k = 0; k < grads[i].size(); ++k) grads[i].data[k] += scale * other[i].data[k];
  }
}

double global_norm(const Gradients& grads) {
  double s = 0;
  for (const auto& g : grads) {
    for (double x : g.data) s += x * x;
  }
  return std::sqrt(s);
}

}  // namespace udc::nn
