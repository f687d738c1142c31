#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "udc/conquer.hpp"
#include "udc/divide.hpp"

using namespace udc;

namespace {

// Uniformly random completion of a sub-problem through the shared masks.
SubSolution random_completion(const SubProblem& sp, Rng& rng) {
  SubConstruction c(sp);
  while (!c.done()) {
    const auto m = c.mask();
    std::vector<int> ok;
    for (int a = 0; a < static_cast<int>(m.size()); ++a) {
      if (m[a]) ok.push_back(a);
    }
    REQUIRE_FALSE(ok.empty());
    c.apply(ok[rng.below(ok.size())]);
  }
  return c.finish();
}

Decomposition decompose(ProblemKind k, int n_nodes, int n, std::uint64_t seed, Solution* out = nullptr) {
  const Instance in = generate_instance(k, n_nodes, seed);
  const Solution x = heuristic_initial(in, is_routing(k) ? Heuristic::kRandomInsertion : Heuristic::kRandom, seed);
  if (out) *out = x;
  Rng rng(seed);
  return extract_subproblems(in, x, n, 1, rng);
}

}  // namespace

TEST_CASE("window positions tile the sequence cyclically") {
  std::vector<int> left;
  const auto w = window_positions(23, 5, 3, &left);
  REQUIRE(w.size() == 4u);
  CHECK(w[0] == std::vector<int>{3, 4, 5, 6, 7});
  CHECK(w[3].back() == 22);
  CHECK(left == std::vector<int>{0, 1, 2});
}

TEST_CASE("each window's original fragment is feasible and priced by sub_cost") {
  for (ProblemKind k : kAllKinds) {
    for (int i = 0; i < 10; ++i) {
      const Decomposition d = decompose(k, 40 + 5 * i, 8, derive_seed(k == ProblemKind::kKp ? 1 : 2, i));
      for (const SubProblem& sp : d.subs) {
        std::string why;
        INFO(to_string(k), " window ", sp.window);
        CHECK(sub_feasible(sp, sp.original, &why));
        CHECK(sp.original.cost == doctest::Approx(sub_cost(sp, sp.original)));
      }
    }
  }
}

TEST_CASE("exact conqueror is never beaten by random feasible completions") {
  for (ProblemKind k : kAllKinds) {
    for (int i = 0; i < 8; ++i) {
      const Decomposition d = decompose(k, 40, 8, derive_seed(3, i));
      Rng rng(derive_seed(4, i));
      for (const SubProblem& sp : d.subs) {
        if (!exact_supported(sp)) continue;
        const SubSolution ex = conquer_exact(sp);
        INFO(to_string(k));
        REQUIRE(sub_feasible(sp, ex));
        CHECK(ex.cost <= sp.original.cost + 1e-12);
        for (int s = 0; s < 200; ++s) CHECK(random_completion(sp, rng).cost >= ex.cost - 1e-12);
      }
    }
  }
}

TEST_CASE("exact KP matches brute-force subset enumeration") {
  for (int i = 0; i < 20; ++i) {
    const Decomposition d = decompose(ProblemKind::kKp, 60, 10, derive_seed(5, i));
    for (const SubProblem& sp : d.subs) {
      const int m = sp.size();
      if (m > 14) continue;
      double best = 0;
      for (int mask = 0; mask < (1 << m); ++mask) {
        double w = 0, v = 0;
        for (int j = 0; j < m; ++j) {
          if (mask >> j & 1) {
            w += sp.weight[j];
            v += sp.value[j];
          }
        }
        if (w <= sp.capacity + kSubTol) best = std::max(best, v);
      }
      CHECK(-conquer_exact(sp).cost == doctest::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("exact MIS matches brute-force enumeration") {
  for (int i = 0; i < 20; ++i) {
    const Decomposition d = decompose(ProblemKind::kMis, 40, 10, derive_seed(6, i));
    for (const SubProblem& sp : d.subs) {
      const int m = sp.size();
      int best = 0;
      for (int mask = 0; mask < (1 << m); ++mask) {
        bool ok = true;
        for (int a = 0; a < m && ok; ++a) {
          if (!(mask >> a & 1)) continue;
          if (sp.forbidden[a]) ok = false;
          for (int b : sp.adj[a]) ok = ok && !(mask >> b & 1);
        }
        if (ok) best = std::max(best, __builtin_popcount(mask));
      }
      CHECK(-conquer_exact(sp).cost == best);
    }
  }
}

TEST_CASE("normalization maps windows into the unit square and scales lengths") {
  const Instance in = generate_instance(ProblemKind::kTsp, 50, 7);
  const Solution x = heuristic_initial(in, Heuristic::kRandom, 7);
  Rng r1(1), r2(1);
  ExtractOptions raw;
  raw.normalize = false;
  const Decomposition a = extract_subproblems(in, x, 10, 0, r1);
  const Decomposition b = extract_subproblems(in, x, 10, 0, r2, raw);
  for (std::size_t w = 0; w < a.subs.size(); ++w) {
    double lo = 1, hi = 0;
    for (const Point& p : a.subs[w].coords) {
      lo = std::min({lo, p.x, p.y});
      hi = std::max({hi, p.x, p.y});
    }
    CHECK(lo >= -1e-12);
    CHECK(hi <= 1 + 1e-12);
    CHECK(a.subs[w].original.cost == doctest::Approx(b.subs[w].original.cost * a.subs[w].transform.sc));
    const Point q = a.subs[w].transform.invert(a.subs[w].coords[3]);
    CHECK(q.x == doctest::Approx(b.subs[w].coords[3].x));
    CHECK(q.y == doctest::Approx(b.subs[w].coords[3].y));
  }
}

TEST_CASE("neural conqueror rollouts are feasible, two-sided and replayable") {
  for (ProblemKind k : kAllKinds) {
    const ConquerModel model(k, {8}, 3);
    const Decomposition d = decompose(k, 50, 8, 8);
    for (const SubProblem& sp : d.subs) {
      nn::Tape t(false);
      ConquerOptions opt;
      opt.beta = 4;
      opt.two_sided = supports_two_sided(k);
      opt.mode = DecodeMode::kSample;
      opt.seed = 5;
      const auto rolls = conquer_neural(t, sp, model, opt);
      REQUIRE(rolls.size() == 4u);
      std::vector<std::vector<int>> acts;
      for (const auto& r : rolls) {
        INFO(to_string(k));
        CHECK(sub_feasible(sp, r.solution));
        CHECK(r.solution.cost == doctest::Approx(sub_cost(sp, r.solution)));
        acts.push_back(r.actions);
      }
      CHECK(rolls[3].reversed == opt.two_sided);
      opt.forced = &acts;
      const auto again = conquer_neural(t, sp, model, opt);
      for (int b = 0; b < 4; ++b) CHECK(again[b].log_prob_value == doctest::Approx(rolls[b].log_prob_value));
    }
  }
}

TEST_CASE("merging never worsens and rejects non-improving windows") {
  for (ProblemKind k : kAllKinds) {
    Solution x;
    const Instance in = generate_instance(k, 60, 9);
    x = heuristic_initial(in, Heuristic::kRandom, 9);
    Rng rng(9);
    const Decomposition d = extract_subproblems(in, x, 8, 0, rng);
    std::vector<SubSolution> same, best;
    for (const SubProblem& sp : d.subs) {
      same.push_back(sp.original);
      best.push_back(exact_supported(sp) ? conquer_exact(sp) : sp.original);
    }
    MergeReport r0;
    const Solution y0 = accept_and_merge(in, x, d.subs, same, &r0);
    CHECK(r0.accepted == 0);
    CHECK(y0.objective == x.objective);
    const Solution y = accept_and_merge(in, x, d.subs, best);
    INFO(to_string(k));
    CHECK(check_feasibility(in, y).ok);
    CHECK(as_cost(k, y.objective) <= as_cost(k, x.objective));
  }
}

TEST_CASE("applying an original fragment leaves the parent unchanged") {
  for (ProblemKind k : kAllKinds) {
    const Instance in = generate_instance(k, 40, 12);
    const Solution x = heuristic_initial(in, Heuristic::kRandom, 12);
    Rng rng(12);
    const Decomposition d = extract_subproblems(in, x, 6, 2, rng);
    for (const SubProblem& sp : d.subs) {
      const Solution y = apply_subsolution(in, x, sp, sp.original);
      CHECK(y.objective == doctest::Approx(x.objective).epsilon(1e-12));
    }
  }
}
