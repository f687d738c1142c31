#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include "udc/nnet/checkpoint.hpp"
#include "udc/nnet/tape.hpp"

using namespace udc;
using namespace udc::nn;

namespace {

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (double& x : m.data) x = rng.uniform(-1, 1);
  return m;
}

// Central differences of `f` with respect to every entry of every parameter.
void check_gradients(ParamStore& store, const std::function<Var(Tape&)>& f) {
  Tape t;
  const Var loss = f(t);
  t.backward(loss);
  const Gradients g = t.gradients(store);
  const double h = 1e-6;
  for (int p = 0; p < store.size(); ++p) {
    if (!store.at(p).trainable) continue;
    for (std::size_t e = 0; e < store.at(p).value.size(); ++e) {
      double& x = store.at(p).value.data[e];
      const double orig = x;
      x = orig + h;
      Tape tu(false);
      const double up = tu.scalar_value(f(tu));
      x = orig - h;
      Tape td(false);
      const double dn = td.scalar_value(f(td));
      x = orig;
      const double fd = (up - dn) / (2 * h);
      INFO(store.at(p).name, "[", e, "]");
      CHECK(g[p].data[e] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
}

}  // namespace

TEST_CASE("elementwise and matrix ops differentiate correctly") {
  Rng rng(1);
  ParamStore s;
  s.add("a", random_matrix(4, 3, rng));
  s.add("b", random_matrix(3, 5, rng));
  s.add("row", random_matrix(1, 5, rng));
  s.add("c", random_matrix(4, 5, rng));
  check_gradients(s, [&](Tape& t) {
    Var a = t.parameter(s, "a"), b = t.parameter(s, "b"), row = t.parameter(s, "row"), c = t.parameter(s, "c");
    Var x = add_row(t, matmul(t, a, b), row);
    x = hadamard(t, silu(t, x), sigmoid(t, c));
    x = add(t, tanh(t, x), scale(t, c, 0.5));
    Var y = matmul_nt(t, x, c);
    return add(t, sum(t, y), sum_squares(t, mean_rows(t, x)));
  });
}

TEST_CASE("gather, scatter-mean and concat differentiate correctly") {
  Rng rng(2);
  ParamStore s;
  s.add("a", random_matrix(5, 2, rng));
  s.add("b", random_matrix(5, 3, rng));
  check_gradients(s, [&](Tape& t) {
    Var a = t.parameter(s, "a"), b = t.parameter(s, "b");
    Var g = gather_rows(t, a, {0, 3, 3, 4, 1, 0});
    Var m = scatter_mean_rows(t, g, {1, 1, 0, 2, 2, 2}, 4);
    Var c = concat_cols(t, {a, b});
    return add(t, sum_squares(t, m), sum(t, hadamard(t, c, c)));
  });
}

TEST_CASE("batch norm in train mode differentiates through the batch statistics") {
  Rng rng(3);
  ParamStore s;
  s.add("x", random_matrix(6, 3, rng));
  s.add("gamma", random_matrix(1, 3, rng));
  s.add("beta", random_matrix(1, 3, rng));
  s.add("w", random_matrix(6, 3, rng), false);
  const Matrix rm(1, 3, 0.0), rv(1, 3, 1.0);
  check_gradients(s, [&](Tape& t) {
    Var y = batch_norm(t, t.parameter(s, "x"), t.parameter(s, "gamma"), t.parameter(s, "beta"), BnMode::kTrain, rm, rv);
    return sum(t, hadamard(t, y, t.constant(s.value("w"))));
  });
}

TEST_CASE("batch norm reports unbiased variance and uses running stats in infer mode") {
  Tape t(false);
  Var x = t.constant(Matrix(4, 1, std::vector<double>{1, 2, 3, 4}));
  Var g = t.constant(Matrix(1, 1, 1.0)), b = t.constant(Matrix(1, 1, 0.0));
  BnBatchStats st;
  batch_norm(t, x, g, b, BnMode::kTrain, Matrix(1, 1, 0.0), Matrix(1, 1, 1.0), &st);
  CHECK(st.mean[0] == doctest::Approx(2.5));
  CHECK(st.var[0] == doctest::Approx(5.0 / 3.0));
  Var y = batch_norm(t, x, g, b, BnMode::kInfer, Matrix(1, 1, 1.0), Matrix(1, 1, 4.0));
  CHECK(t.value(y)(3, 0) == doctest::Approx(3.0 / std::sqrt(4.0 + kBnEps)));
}

TEST_CASE("masked log-softmax matches the closed form and its gradient") {
  Rng rng(4);
  ParamStore s;
  s.add("z", random_matrix(6, 1, rng));
  const std::vector<int> entries{0, 2, 5};
  Tape t(false);
  const Matrix& z = s.value("z");
  const double denom = std::exp(z(0, 0)) + std::exp(z(2, 0)) + std::exp(z(5, 0)) + 2 * std::exp(-10.0);
  Var lp = log_softmax_pick(t, t.constant(z), entries, -10.0, 2, 1);
  CHECK(t.scalar_value(lp) == doctest::Approx(z(2, 0) - std::log(denom)));
  Var lc = log_softmax_pick(t, t.constant(z), entries, -10.0, 2, -1);
  CHECK(t.scalar_value(lc) == doctest::Approx(-10.0 - std::log(denom)));
  const auto p = softmax_probs(z, entries, -10.0, 2);
  CHECK(p.size() == 4u);
  CHECK(p[0] + p[1] + p[2] + p[3] == doctest::Approx(1.0));
  check_gradients(s, [&](Tape& tt) { return log_softmax_pick(tt, tt.parameter(s, "z"), entries, -10.0, 2, 2); });
  CHECK_THROWS_AS(softmax_probs(z, {}, -10.0, 0), Error);
}

TEST_CASE("weighted sum of scalars and the empty case") {
  Tape t(false);
  CHECK(t.scalar_value(weighted_sum(t, {t.scalar(2), t.scalar(3)}, {0.5, -1})) == doctest::Approx(-2.0));
  CHECK(t.scalar_value(weighted_sum(t, {}, {})) == 0.0);
}

TEST_CASE("adam step matches the bias-corrected update") {
  ParamStore s;
  s.add("w", Matrix(1, 2, std::vector<double>{0.5, -0.25}));
  s.adam().lr = 0.1;
  Gradients g{Matrix(1, 2, std::vector<double>{0.2, -0.4})};
  adam_step(s, g);
  // First step: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  CHECK(s.value("w")(0, 0) == doctest::Approx(round_f32(0.5 - 0.1 * 0.2 / (0.2 + 1e-8))));
  CHECK(s.value("w")(0, 1) == doctest::Approx(round_f32(-0.25 + 0.1 * 0.4 / (0.4 + 1e-8))));
  CHECK(static_cast<double>(round_f32(s.value("w")(0, 0))) == s.value("w")(0, 0));
  Gradients bad{Matrix(1, 2, std::vector<double>{NAN, 0})};
  const double before = s.value("w")(0, 1);
  CHECK_THROWS_AS(adam_step(s, bad), Error);
  CHECK(s.value("w")(0, 1) == before);
}

TEST_CASE("checkpoint round-trips parameters and optimizer state exactly") {
  Rng rng(5);
  ParamStore s;
  Matrix w = glorot(3, 4, rng);
  s.add("w", w);
  s.add("running", Matrix(1, 4, 1.0), false);
  adam_step(s, Gradients{random_matrix(3, 4, rng), Matrix(1, 4)});
  Checkpoint ck;
  ck.config_hash = 1234;
  ck.header = {{"note", "unit"}};
  store_to_checkpoint(ck, "p/", s);
  const std::string path = "unit_ckpt.bin";
  write_checkpoint(path, ck);
  const Checkpoint back = read_checkpoint(path);
  CHECK(back.config_hash == 1234u);
  CHECK(back.header["note"] == "unit");
  ParamStore t;
  t.add("w", Matrix(3, 4));
  t.add("running", Matrix(1, 4), false);
  store_from_checkpoint(back, "p/", t);
  CHECK(t.value("w").data == s.value("w").data);
  CHECK(t.adam().step == s.adam().step);
  CHECK(t.adam().m[0].data == s.adam().m[0].data);

  ParamStore wrong;
  wrong.add("w", Matrix(4, 3));
  CHECK_THROWS_AS(store_from_checkpoint(back, "p/", wrong), Error);

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(3);
    f.put('X');
  }
  CHECK_THROWS_AS(read_checkpoint(path), Error);
  std::remove(path.c_str());
}
