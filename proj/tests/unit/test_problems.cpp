#include <doctest.h>

#include <cmath>

#include "udc/instance_io.hpp"
#include "udc/divide.hpp"
#include "udc/problems.hpp"

using namespace udc;

namespace {

// Independent objective oracle written against the encodings only.
double oracle_objective(const Instance& in, const Solution& s) {
  auto d = [&](int a, int b) { return std::hypot(in.coords[a].x - in.coords[b].x, in.coords[a].y - in.coords[b].y); };
  switch (in.kind) {
    case ProblemKind::kTsp:
    case ProblemKind::kOp:
    case ProblemKind::kPctsp: {
      double len = 0;
      for (std::size_t i = 0; i < s.order.size(); ++i) len += d(s.order[i], s.order[(i + 1) % s.order.size()]);
      if (in.kind == ProblemKind::kTsp) return len;
      double prize = 0, pen = 0;
      std::vector<int> vis(in.n, 0);
      for (int v : s.order) vis[v] = 1;
      for (int v = 1; v < in.n; ++v) {
        if (vis[v]) {
          prize += in.prizes[v];
        } else if (in.kind == ProblemKind::kPctsp) {
          pen += in.penalties[v];
        }
      }
      return in.kind == ProblemKind::kOp ? prize : len + pen;
    }
    case ProblemKind::kCvrp: {
      double len = 0;
      int prev = 0;
      for (std::size_t i = 0; i < s.order.size(); ++i) {
        len += d(prev, s.order[i]);
        prev = s.order[i];
        if (s.flags[i]) {
          len += d(prev, 0);
          prev = 0;
        }
      }
      return len + d(prev, 0);
    }
    case ProblemKind::kKp: {
      double v = 0;
      for (int i : s.subset) v += in.values[i];
      return v;
    }
    case ProblemKind::kMis:
      return static_cast<double>(s.subset.size());
  }
  return 0;
}

}  // namespace

TEST_CASE("unit square tour has length 4") {
  Instance in;
  in.kind = ProblemKind::kTsp;
  in.n = 4;
  in.coords = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  Solution s;
  s.order = {0, 1, 2, 3};
  CHECK(evaluate_objective(in, s) == doctest::Approx(4.0).epsilon(1e-15));
  s.order = {0, 2, 1, 3};
  CHECK(evaluate_objective(in, s) == doctest::Approx(2 + 2 * std::sqrt(2.0)));
}

TEST_CASE("objective matches an independent oracle for random feasible solutions") {
  for (ProblemKind k : kAllKinds) {
    for (int i = 0; i < 30; ++i) {
      const Instance in = generate_instance(k, 10 + 7 * i, derive_seed(1, i));
      const Solution s = heuristic_initial(in, Heuristic::kRandom, derive_seed(2, i));
      INFO(to_string(k), " case ", i);
      REQUIRE(check_feasibility(in, s).ok);
      CHECK(evaluate_objective(in, s) == doctest::Approx(oracle_objective(in, s)).epsilon(1e-12));
    }
  }
}

TEST_CASE("constraint violations are named") {
  Instance in = generate_instance(ProblemKind::kCvrp, 12, 3);
  Solution s;
  for (int v = 1; v < in.n; ++v) s.order.push_back(v);
  s.flags.assign(s.order.size(), 0);
  s.flags.back() = 1;
  in.capacity = 1;  // every demand is at least 1, so one route of 11 cannot fit
  const Verdict v = check_feasibility(in, s);
  CHECK_FALSE(v.ok);
  CHECK_FALSE(v.violation.empty());
  CHECK_THROWS_AS(evaluate_objective(in, s), Error);

  const Instance tsp = generate_instance(ProblemKind::kTsp, 5, 4);
  Solution dup;
  dup.order = {0, 1, 1, 3, 4};
  CHECK_FALSE(check_feasibility(tsp, dup).ok);
}

TEST_CASE("generator is deterministic and validates its input") {
  for (ProblemKind k : kAllKinds) {
    const Instance a = generate_instance(k, 50, 42);
    const Instance b = generate_instance(k, 50, 42);
    CHECK(instance_to_json(a) == instance_to_json(b));
    CHECK_NOTHROW(validate_instance(a));
  }
  CHECK_THROWS_AS(generate_instance(ProblemKind::kTsp, 1, 0), Error);
}

TEST_CASE("instance and solution JSON round-trip") {
  for (ProblemKind k : kAllKinds) {
    const Instance a = generate_instance(k, 25, 9);
    const Instance b = instance_from_json(instance_to_json(a));
    CHECK(instance_to_json(b) == instance_to_json(a));
    const Solution s = heuristic_initial(a, Heuristic::kRandom, 1);
    const Solution t = solution_from_json(solution_to_json(s));
    CHECK(t.order == s.order);
    CHECK(t.subset == s.subset);
    CHECK(t.flags == s.flags);
  }
}

TEST_CASE("gap uses the objective sense") {
  CHECK(gap_percent(110, 100, Sense::kMinimize) == doctest::Approx(10.0));
  CHECK(gap_percent(90, 100, Sense::kMaximize) == doctest::Approx(10.0));
  CHECK(gap_percent(100, 100, Sense::kMinimize) == 0.0);
}

TEST_CASE("kind names round-trip") {
  for (ProblemKind k : kAllKinds) CHECK(parse_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_kind("atsp"), Error);
  CHECK(sense_of(ProblemKind::kOp) == Sense::kMaximize);
  CHECK(sense_of(ProblemKind::kPctsp) == Sense::kMinimize);
}
