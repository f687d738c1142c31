#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "udc/nnet/checkpoint.hpp"
#include "udc/train.hpp"

using namespace udc;

namespace {

TrainConfig tiny(ProblemKind k) {
  TrainConfig c;
  c.kind = k;
  c.n_min = 16;
  c.n_max = 24;
  c.n = 4;
  c.alpha = 2;
  c.beta = 2;
  c.epochs = 2;
  c.epoch_size = 3;
  c.batch = 2;
  c.seed = 5;
  c.agnn = {2, 8};
  c.conquer = {8};
  return c;
}

std::string read(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Log rows without the trailing wall_ms column.
std::vector<std::string> strip_wall(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line.substr(0, line.rfind(',')));
  return out;
}

}  // namespace

TEST_CASE("advantages are mean-subtracted") {
  const auto a = advantages({1, 2, 6});
  CHECK(a[0] == doctest::Approx(-2));
  CHECK(a[2] == doctest::Approx(3));
  CHECK(std::accumulate(a.begin(), a.end(), 0.0) == doctest::Approx(0).scale(1));
}

TEST_CASE("surrogate losses follow the shared-baseline formulas") {
  nn::Tape t(false);
  const std::vector<nn::Var> lp{t.scalar(-1), t.scalar(-2), t.scalar(-4)};
  // (1/3) * ((1-3)(-1) + (3-3)(-2) + (5-3)(-4)) = (2 - 8) / 3
  CHECK(t.scalar_value(loss_dividing(t, lp, {1, 3, 5})) == doctest::Approx(-2.0));
  ConquerGroup g{{t.scalar(-1), t.scalar(-3)}, {2, 4}};
  // ((-1)(-1) + (1)(-3)) / (2 * 2 * 3)
  CHECK(t.scalar_value(loss_conquering(t, {g}, 2, 2, 3)) == doctest::Approx(-2.0 / 12.0));
  CHECK_THROWS_AS(loss_dividing(t, {lp[0]}, {1}), Error);
}

TEST_CASE("config validation rejects degenerate baselines") {
  TrainConfig c = tiny(ProblemKind::kTsp);
  c.alpha = 1;
  CHECK_THROWS_AS(validate(c), Error);
  c = tiny(ProblemKind::kTsp);
  c.n = 5;
  CHECK_THROWS_AS(validate(c), Error);
}

TEST_CASE("reunion is disabled for KP by default") {
  CHECK_FALSE(tiny(ProblemKind::kKp).dcr_enabled());
  CHECK(tiny(ProblemKind::kTsp).dcr_enabled());
  const Instance in = generate_instance(ProblemKind::kKp, 20, 1);
  const Policy p(ProblemKind::kKp, {2, 8}, {8}, 1);
  CHECK_FALSE(dcr_step(in, p, tiny(ProblemKind::kKp), 3).metrics.reunion);
}

TEST_CASE("a DCR step is deterministic and its losses replay exactly") {
  for (ProblemKind k : kAllKinds) {
    const Instance in = generate_instance(k, 20, 2);
    const Policy p(k, {2, 8}, {8}, 2);
    const TrainConfig c = tiny(k);
    const DcrStep a = dcr_step(in, p, c, 11);
    const DcrStep b = dcr_step(in, p, c, 11);
    INFO(to_string(k));
    CHECK(a.metrics.loss_d == b.metrics.loss_d);
    CHECK(a.metrics.loss_c == b.metrics.loss_c);
    CHECK(nn::global_norm(a.grad_d) == nn::global_norm(b.grad_d));
    const Surrogates s = replay_surrogates(in, p, a.record);
    CHECK(s.loss_d == doctest::Approx(a.metrics.loss_d).epsilon(1e-12));
    CHECK(s.loss_c == doctest::Approx(a.metrics.loss_c).epsilon(1e-12));
    CHECK(as_cost(k, a.metrics.f_x1) <= as_cost(k, a.metrics.f_x0) + 1e-12);
    CHECK(as_cost(k, a.metrics.f_x2) <= as_cost(k, a.metrics.f_x1) + 1e-12);
  }
}

TEST_CASE("zero epochs writes the initial checkpoint") {
  TrainConfig c = tiny(ProblemKind::kTsp);
  c.epochs = 0;
  Policy p(c.kind, c.agnn, c.conquer, 1);
  train(p, c, {"unit_e0.ckpt", "", nullptr});
  nlohmann::json header;
  const Policy back = load_policy("unit_e0.ckpt", &header);
  CHECK(header["epochs_done"] == 0);
  CHECK(back.divide.store().value("head/w2").data == p.divide.store().value("head/w2").data);
  std::remove("unit_e0.ckpt");
}

TEST_CASE("training is reproducible apart from wall time") {
  const TrainConfig c = tiny(ProblemKind::kCvrp);
  Policy a(c.kind, c.agnn, c.conquer, 1), b(c.kind, c.agnn, c.conquer, 1);
  int epochs_seen = 0;
  train(a, c, {"unit_a.ckpt", "unit_a.csv", [&](const EpochLog&) { ++epochs_seen; }});
  train(b, c, {"unit_b.ckpt", "unit_b.csv", nullptr});
  CHECK(epochs_seen == 2);
  const auto la = strip_wall(read("unit_a.csv")), lb = strip_wall(read("unit_b.csv"));
  CHECK(la.size() == 3u);
  CHECK(la == lb);
  CHECK(read("unit_a.csv").rfind(csv_header(), 0) == 0);
  CHECK(a.conquer.store().value("omega").data == b.conquer.store().value("omega").data);
  nlohmann::json h;
  const Policy back = load_policy("unit_a.ckpt", &h);
  CHECK(h["epochs_done"] == 2);
  CHECK(back.conquer.store().value("omega").data == a.conquer.store().value("omega").data);
  CHECK(back.divide.store().adam().step == a.divide.store().adam().step);
  for (const char* f : {"unit_a.ckpt", "unit_b.ckpt", "unit_a.csv", "unit_b.csv"}) std::remove(f);
}

TEST_CASE("training moves the parameters") {
  const TrainConfig c = tiny(ProblemKind::kTsp);
  Policy p(c.kind, c.agnn, c.conquer, 1);
  const auto before = p.divide.store().value("head/W1").data;
  const auto logs = train(p, c, {});
  CHECK(logs.size() == 2u);
  CHECK(p.divide.store().value("head/W1").data != before);
  CHECK(logs[0].grad_norm_d > 0);
}
