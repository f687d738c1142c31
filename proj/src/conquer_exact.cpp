#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>

#include "udc/conquer.hpp"

namespace udc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxPath = 12;
constexpr int kMaxCandidates = 14;
constexpr int kMaxKp = 30;
constexpr int kMaxMis = 25;

double dist(const SubProblem& sp, int a, int b) { return distance(sp.coords[a], sp.coords[b]); }

// Shortest Hamiltonian path from local 0 to local m-1 (Held-Karp).
SubSolution exact_tsp(const SubProblem& sp) {
  const int m = sp.path_len;
  const int k = m - 2;
  SubSolution out;
  if (k <= 0) {
    out.seq = {0, m - 1};
    out.cost = sub_cost(sp, out);
    return out;
  }
  const int full = (1 << k) - 1;
  std::vector<double> dp(static_cast<std::size_t>(full + 1) * k, kInf);
  std::vector<std::int8_t> parent(dp.size(), -1);
  auto at = [k](int mask, int i) { return static_cast<std::size_t>(mask) * k + i; };
  for (int i = 0; i < k; ++i) dp[at(1 << i, i)] = dist(sp, 0, i + 1);
  for (int mask = 1; mask <= full; ++mask) {
    for (int i = 0; i < k; ++i) {
      if (!(mask >> i & 1)) continue;
      const double base = dp[at(mask, i)];
      if (base == kInf) continue;
      for (int j = 0; j < k; ++j) {
        if (mask >> j & 1) continue;
        const int nm = mask | (1 << j);
        const double cand = base + dist(sp, i + 1, j + 1);
        if (cand < dp[at(nm, j)]) {
          dp[at(nm, j)] = cand;
          parent[at(nm, j)] = static_cast<std::int8_t>(i);
        }
      }
    }
  }
  int best = 0;
  double best_len = kInf;
  for (int i = 0; i < k; ++i) {
    const double len = dp[at(full, i)] + dist(sp, i + 1, m - 1);
    if (len < best_len) {
      best_len = len;
      best = i;
    }
  }
  std::vector<int> rev;
  int mask = full;
  for (int i = best; i >= 0;) {
    rev.push_back(i + 1);
    const int p = parent[at(mask, i)];
    mask &= ~(1 << i);
    i = p;
  }
  out.seq.push_back(0);
  out.seq.insert(out.seq.end(), rev.rbegin(), rev.rend());
  out.seq.push_back(m - 1);
  out.cost = sub_cost(sp, out);
  return out;
}

// Label-setting DP over (visited interior set, last node) with Pareto sets
// of (segment load, cost).
SubSolution exact_cvrp(const SubProblem& sp) {
  const int m = sp.path_len;
  const int k = m - 2;
  const int depot = sp.depot_index();
  const double cap = sp.capacity + kSubTol;
  struct Label {
    double load;
    double cost;
    int parent;
    int node;
    bool via;
  };
  std::vector<Label> labels;
  labels.push_back({sp.load_before + sp.demand[0], 0.0, -1, 0, false});
  const int states = 1 << std::max(k, 0);
  // bucket[mask * (k + 1) + slot]; slot k is "still at the start node".
  std::vector<std::vector<int>> bucket(static_cast<std::size_t>(states) * (k + 1));
  auto slot_of = [k](int node) { return node == 0 ? k : node - 1; };
  bucket[static_cast<std::size_t>(0) * (k + 1) + k].push_back(0);

  auto insert = [&](std::vector<int>& b, const Label& l) {
    for (int id : b) {
      const Label& o = labels[id];
      if (o.load <= l.load && o.cost <= l.cost) return;
    }
    b.erase(std::remove_if(b.begin(), b.end(),
                           [&](int id) { return l.load <= labels[id].load && l.cost <= labels[id].cost; }),
            b.end());
    labels.push_back(l);
    b.push_back(static_cast<int>(labels.size()) - 1);
  };

  auto step_cost = [&](int from, int to, bool via) {
    return via ? dist(sp, from, depot) + dist(sp, depot, to) : dist(sp, from, to);
  };

  for (int mask = 0; mask < states; ++mask) {
    for (int s = 0; s <= k; ++s) {
      const auto& here = bucket[static_cast<std::size_t>(mask) * (k + 1) + s];
      if (here.empty()) continue;
      const std::vector<int> ids = here;
      for (int id : ids) {
        const Label l = labels[id];
        for (int j = 0; j < k; ++j) {
          if (mask >> j & 1) continue;
          const int node = j + 1;
          const double dj = sp.demand[node];
          auto& dst = bucket[static_cast<std::size_t>(mask | (1 << j)) * (k + 1) + slot_of(node)];
          if (l.load + dj <= cap) insert(dst, {l.load + dj, l.cost + step_cost(l.node, node, false), id, node, false});
          if (dj <= cap) insert(dst, {dj, l.cost + step_cost(l.node, node, true), id, node, true});
        }
      }
    }
  }
  const int full = states - 1;
  const double need = sp.demand[m - 1] + sp.load_after;
  double best = kInf;
  int best_id = -1;
  bool best_via = false;
  for (int s = 0; s <= k; ++s) {
    if (k > 0 && s == k) continue;
    for (int id : bucket[static_cast<std::size_t>(full) * (k + 1) + s]) {
      const Label& l = labels[id];
      for (bool via : {false, true}) {
        if ((via ? 0.0 : l.load) + need > cap) continue;
        const double c = l.cost + step_cost(l.node, m - 1, via);
        if (c < best) {
          best = c;
          best_id = id;
          best_via = via;
        }
      }
    }
  }
  if (best_id < 0) throw Error("infeasible_subproblem", "no capacity-feasible sub-route");
  std::vector<int> nodes;
  std::vector<std::uint8_t> via_into;
  nodes.push_back(m - 1);
  via_into.push_back(best_via);
  for (int id = best_id; id >= 0; id = labels[id].parent) {
    nodes.push_back(labels[id].node);
    via_into.push_back(labels[id].via);
  }
  std::reverse(nodes.begin(), nodes.end());
  std::reverse(via_into.begin(), via_into.end());
  SubSolution out;
  out.seq = nodes;
  out.flags.assign(m, 0);
  for (int t = 1; t < m; ++t) out.flags[t - 1] = via_into[t];
  out.flags[m - 1] = sp.last_flag;
  // Whole routes strictly inside the window cost the same in either
  // direction and in any order; fix both by node id so ties do not depend on
  // rounding.
  std::vector<std::vector<int>> routes;
  int first = -1;
  for (int a = 1; a < m - 1;) {
    if (!out.flags[a - 1]) {
      ++a;
      continue;
    }
    int b = a;
    while (b < m - 1 && !out.flags[b]) ++b;
    if (b == m - 1) break;
    if (first < 0) first = a;
    std::vector<int> r(out.seq.begin() + a, out.seq.begin() + b + 1);
    if (r.front() > r.back()) std::reverse(r.begin(), r.end());
    routes.push_back(std::move(r));
    a = b + 1;
  }
  std::sort(routes.begin(), routes.end());
  for (const auto& r : routes) {
    for (int v : r) {
      out.seq[first] = v;
      out.flags[first] = 0;
      ++first;
    }
    out.flags[first - 1] = 1;
  }
  out.cost = sub_cost(sp, out);
  return out;
}

// Subset DP for OP / PCTSP: shortest start->...->end path through each
// candidate set, then the best set under the prize or budget constraint.
SubSolution exact_loop(const SubProblem& sp) {
  const int m = sp.size();
  const int end = sp.path_len - 1;
  std::vector<int> cand;
  for (int v = 1; v < m; ++v) {
    if (v != end) cand.push_back(v);
  }
  const int k = static_cast<int>(cand.size());
  const int states = 1 << k;
  std::vector<double> dp(static_cast<std::size_t>(states) * std::max(k, 1), kInf);
  std::vector<std::int8_t> parent(dp.size(), -1);
  auto at = [k](int mask, int i) { return static_cast<std::size_t>(mask) * k + i; };
  for (int i = 0; i < k; ++i) dp[at(1 << i, i)] = dist(sp, 0, cand[i]);
  for (int mask = 1; mask < states; ++mask) {
    for (int i = 0; i < k; ++i) {
      if (!(mask >> i & 1)) continue;
      const double base = dp[at(mask, i)];
      if (base == kInf) continue;
      for (int j = 0; j < k; ++j) {
        if (mask >> j & 1) continue;
        const double c = base + dist(sp, cand[i], cand[j]);
        const std::size_t idx = at(mask | (1 << j), j);
        if (c < dp[idx]) {
          dp[idx] = c;
          parent[idx] = static_cast<std::int8_t>(i);
        }
      }
    }
  }
  int depot_bit = -1;
  for (int i = 0; i < k; ++i) {
    if (cand[i] == sp.depot_local) depot_bit = i;
  }
  const bool op = sp.kind == ProblemKind::kOp;
  double best_obj = kInf;
  double best_len = kInf;
  int best_mask = -1;
  int best_last = -1;
  for (int mask = 0; mask < states; ++mask) {
    if (depot_bit >= 0 && !(mask >> depot_bit & 1)) continue;
    double prize = 0;
    double penalty = 0;
    for (int i = 0; i < k; ++i) {
      if (mask >> i & 1) {
        prize += sp.prize[cand[i]];
      } else if (!op) {
        penalty += sp.penalty[cand[i]];
      }
    }
    if (!op && prize < sp.required_prize - kSubTol) continue;
    double len = kInf;
    int last = -1;
    if (mask == 0) {
      len = dist(sp, 0, end);
    } else {
      for (int i = 0; i < k; ++i) {
        if (!(mask >> i & 1)) continue;
        const double l = dp[at(mask, i)] + dist(sp, cand[i], end);
        if (l < len) {
          len = l;
          last = i;
        }
      }
    }
    if (len == kInf) continue;
    if (op && len > sp.budget + kSubTol) continue;
    const double obj = op ? -prize : len + penalty;
    if (obj < best_obj || (obj == best_obj && len < best_len)) {
      best_obj = obj;
      best_len = len;
      best_mask = mask;
      best_last = last;
    }
  }
  if (best_mask < 0) throw Error("infeasible_subproblem", "no feasible sub-tour");
  std::vector<int> rev;
  int mask = best_mask;
  for (int i = best_last; i >= 0;) {
    rev.push_back(cand[i]);
    const int p = parent[at(mask, i)];
    mask &= ~(1 << i);
    i = p;
  }
  SubSolution out;
  out.seq.push_back(0);
  out.seq.insert(out.seq.end(), rev.rbegin(), rev.rend());
  out.seq.push_back(end);
  out.cost = sub_cost(sp, out);
  return out;
}

// Meet in the middle over the two halves of the item list.
SubSolution exact_kp(const SubProblem& sp) {
  const int m = sp.size();
  const int half = m / 2;
  const int kb = m - half;
  const double cap = sp.capacity + kSubTol;
  struct Entry {
    double w;
    double v;
    std::uint32_t mask;
  };
  std::vector<Entry> right;
  right.reserve(std::size_t{1} << kb);
  for (std::uint32_t mask = 0; mask < (1u << kb); ++mask) {
    double w = 0, v = 0;
    for (int i = 0; i < kb; ++i) {
      if (mask >> i & 1) {
        w += sp.weight[half + i];
        v += sp.value[half + i];
      }
    }
    if (w <= cap) right.push_back({w, v, mask});
  }
  std::sort(right.begin(), right.end(), [](const Entry& a, const Entry& b) {
    return a.w < b.w || (a.w == b.w && a.mask < b.mask);
  });
  // best[i]: index of the most valuable entry among right[0..i].
  std::vector<int> best(right.size());
  for (std::size_t i = 0; i < right.size(); ++i) {
    best[i] = static_cast<int>(i);
    if (i > 0 && right[best[i - 1]].v >= right[i].v) best[i] = best[i - 1];
  }
  double top = -1;
  std::uint32_t top_left = 0, top_right = 0;
  for (std::uint32_t mask = 0; mask < (1u << half); ++mask) {
    double w = 0, v = 0;
    for (int i = 0; i < half; ++i) {
      if (mask >> i & 1) {
        w += sp.weight[i];
        v += sp.value[i];
      }
    }
    if (w > cap) continue;
    auto it = std::upper_bound(right.begin(), right.end(), cap - w,
                               [](double x, const Entry& e) { return x < e.w; });
    if (it == right.begin()) continue;
    const Entry& e = right[best[(it - right.begin()) - 1]];
    if (w + e.w > cap) continue;
    if (v + e.v > top) {
      top = v + e.v;
      top_left = mask;
      top_right = e.mask;
    }
  }
  SubSolution out;
  for (int i = 0; i < half; ++i) {
    if (top_left >> i & 1) out.seq.push_back(i);
  }
  for (int i = 0; i < kb; ++i) {
    if (top_right >> i & 1) out.seq.push_back(half + i);
  }
  out.cost = sub_cost(sp, out);
  return out;
}

// Branch and bound maximum independent set on bitmasks.
void mis_search(const std::vector<std::uint32_t>& nbr, std::uint32_t cand, std::uint32_t chosen,
                std::uint32_t& best) {
  if (std::popcount(chosen) + std::popcount(cand) <= std::popcount(best)) return;
  if (cand == 0) {
    best = chosen;
    return;
  }
  const int v = std::countr_zero(cand);
  mis_search(nbr, cand & ~(1u << v) & ~nbr[v], chosen | (1u << v), best);
  mis_search(nbr, cand & ~(1u << v), chosen, best);
}

SubSolution exact_mis(const SubProblem& sp) {
  const int m = sp.size();
  std::vector<std::uint32_t> nbr(m, 0);
  std::uint32_t cand = 0;
  for (int i = 0; i < m; ++i) {
    for (int u : sp.adj[i]) nbr[i] |= 1u << u;
    if (!sp.forbidden[i]) cand |= 1u << i;
  }
  std::uint32_t best = 0;
  // Seed with the current fragment so ties keep it.
  for (int v : sp.original.seq) best |= 1u << v;
  const std::uint32_t seed = best;
  mis_search(nbr, cand, 0, best);
  SubSolution out;
  const std::uint32_t pick = best == seed ? seed : best;
  for (int i = 0; i < m; ++i) {
    if (pick >> i & 1) out.seq.push_back(i);
  }
  out.cost = sub_cost(sp, out);
  return out;
}

}  // namespace

bool exact_supported(const SubProblem& sp) {
  switch (sp.kind) {
    case ProblemKind::kTsp:
    case ProblemKind::kCvrp:
      return sp.path_len <= kMaxPath;
    case ProblemKind::kOp:
    case ProblemKind::kPctsp:
      return sp.size() - 2 <= kMaxCandidates;
    case ProblemKind::kKp:
      return sp.size() <= kMaxKp;
    case ProblemKind::kMis:
      return sp.size() <= kMaxMis;
  }
  return false;
}

SubSolution conquer_exact(const SubProblem& sp) {
  if (!exact_supported(sp)) {
    throw Error("size_limit", "sub-problem of size " + std::to_string(sp.size()) +
                                  " exceeds the exact solver limit for " + to_string(sp.kind));
  }
  switch (sp.kind) {
    case ProblemKind::kTsp: return exact_tsp(sp);
    case ProblemKind::kCvrp: return exact_cvrp(sp);
    case ProblemKind::kOp:
    case ProblemKind::kPctsp: return exact_loop(sp);
    case ProblemKind::kKp: return exact_kp(sp);
    case ProblemKind::kMis: return exact_mis(sp);
  }
  return {};
}

}  // namespace udc
