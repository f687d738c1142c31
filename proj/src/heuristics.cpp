#include <algorithm>
#include <limits>
#include <numeric>

#include "udc/divide.hpp"

namespace udc {

std::string to_string(Heuristic h) {
  switch (h) {
    case Heuristic::kRandom: return "random";
    case Heuristic::kNearestGreedy: return "nearest_greedy";
    case Heuristic::kRandomInsertion: return "random_insertion";
  }
  return "?";
}

Heuristic parse_heuristic(const std::string& s) {
  if (s == "random") return Heuristic::kRandom;
  if (s == "nearest_greedy") return Heuristic::kNearestGreedy;
  if (s == "random_insertion") return Heuristic::kRandomInsertion;
  throw Error("invalid_argument", "unknown heuristic " + s);
}

namespace {

Solution random_construction(const Instance& inst, Rng& rng) {
  Construction c(inst);
  if (has_depot(inst.kind)) {
    c.start(0);
  } else if (inst.kind != ProblemKind::kMis) {
    std::vector<int> pool;
    for (int v = 0; v < inst.n; ++v) {
      if (inst.kind != ProblemKind::kKp || inst.weights[v] <= inst.capacity + kFeasibilityTol) {
        pool.push_back(v);
      }
    }
    if (pool.empty()) {
      Solution empty;
      refresh(inst, empty);
      return empty;
    }
    c.start(pool[rng.below(static_cast<int>(pool.size()))]);
  }
  std::vector<int> allowed;
  while (!c.done()) {
    const auto mask = feasible_actions(inst, c);
    allowed.clear();
    for (int v = 0; v < inst.n; ++v) {
      if (mask[v]) allowed.push_back(v);
    }
    c.apply(allowed[rng.below(static_cast<int>(allowed.size()))]);
  }
  return c.finish();
}

Solution nearest_greedy(const Instance& inst) {
  Construction c(inst);
  c.start(0);
  while (!c.done()) {
    const auto mask = feasible_actions(inst, c);
    const bool prefer_depot =
        inst.kind == ProblemKind::kPctsp && mask[0] && c.collected() >= 1.0 - kFeasibilityTol;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    if (!prefer_depot) {
      for (int v = 0; v < inst.n; ++v) {
        if (!mask[v] || (v == 0 && has_depot(inst.kind))) continue;
        const double d = inst.dist(c.current(), v);
        if (d < best_d) {
          best_d = d;
          best = v;
        }
      }
    }
    c.apply(best >= 0 ? best : 0);
  }
  return c.finish();
}

// Cheapest insertion position of v into the closed loop `tour`.
std::pair<std::size_t, double> cheapest_slot(const Instance& inst, const std::vector<int>& tour, int v) {
  if (tour.size() == 1) return {1, 2 * inst.dist(tour[0], v)};
  std::size_t best = 0;
  double best_delta = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < tour.size(); ++k) {
    const int a = tour[k];
    const int b = tour[(k + 1) % tour.size()];
    const double delta = inst.dist(a, v) + inst.dist(v, b) - inst.dist(a, b);
    if (delta < best_delta) {
      best_delta = delta;
      best = k + 1;
    }
  }
  return {best, best_delta};
}

Solution random_insertion(const Instance& inst, Rng& rng) {
  const bool depot = has_depot(inst.kind);
  std::vector<int> rest;
  for (int v = depot ? 1 : 0; v < inst.n; ++v) rest.push_back(v);
  rng.shuffle(rest);
  std::vector<int> tour;
  if (depot) {
    tour.push_back(0);
  } else {
    tour.push_back(rest.front());
    rest.erase(rest.begin());
  }
  double length = 0;
  double prize = 0;
  for (int v : rest) {
    if (inst.kind == ProblemKind::kPctsp && prize >= 1.0) break;
    const auto [slot, delta] = cheapest_slot(inst, tour, v);
    if (inst.kind == ProblemKind::kOp && length + delta > inst.budget + kFeasibilityTol) continue;
    tour.insert(tour.begin() + static_cast<std::ptrdiff_t>(slot), v);
    length += delta;
    if (!inst.prizes.empty()) prize += inst.prizes[v];
  }
  Solution sol;
  if (inst.kind == ProblemKind::kCvrp) {
    double load = 0;
    for (std::size_t k = 1; k < tour.size(); ++k) {
      const int v = tour[k];
      if (!sol.order.empty() && load + inst.demands[v] > inst.capacity + kFeasibilityTol) {
        sol.flags.back() = 1;
        load = 0;
      }
      sol.order.push_back(v);
      sol.flags.push_back(0);
      load += inst.demands[v];
    }
    sol.flags.back() = 1;
  } else {
    sol.order = tour;
  }
  refresh(inst, sol);
  return sol;
}

}  // namespace

Solution heuristic_initial(const Instance& inst, Heuristic method, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x4e75u));
  if (method == Heuristic::kRandom) return random_construction(inst, rng);
  if (!is_routing(inst.kind)) {
    throw Error("unsupported", to_string(method) + " is defined for routing problems only");
  }
  return method == Heuristic::kNearestGreedy ? nearest_greedy(inst) : random_insertion(inst, rng);
}

}  // namespace udc
