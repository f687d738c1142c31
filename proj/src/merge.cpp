#include <algorithm>

#include "udc/conquer.hpp"

namespace udc {

void canonicalize_cvrp(Solution& sol) {
  const int m = static_cast<int>(sol.order.size());
  if (m == 0 || sol.flags.back()) return;
  int last = -1;
  for (int t = m - 1; t >= 0; --t) {
    if (sol.flags[t]) {
      last = t;
      break;
    }
  }
  if (last < 0) return;
  std::rotate(sol.order.begin(), sol.order.begin() + last + 1, sol.order.end());
  std::rotate(sol.flags.begin(), sol.flags.begin() + last + 1, sol.flags.end());
}

namespace {

int position_of(const std::vector<int>& order, int node) {
  auto it = std::find(order.begin(), order.end(), node);
  if (it == order.end()) throw Error("invariant_violation", "window endpoint vanished from the tour");
  return static_cast<int>(it - order.begin());
}

}  // namespace

Solution apply_subsolution(const Instance& inst, const Solution& sol, const SubProblem& sp,
                           const SubSolution& sub) {
  Solution out = sol;
  switch (sp.kind) {
    case ProblemKind::kTsp:
    case ProblemKind::kCvrp: {
      const int tau = static_cast<int>(out.order.size());
      const int p0 = position_of(out.order, sp.nodes[0]);
      for (int k = 0; k < sp.path_len; ++k) {
        const int pos = (p0 + k) % tau;
        out.order[pos] = sp.nodes[sub.seq[k]];
        if (sp.kind == ProblemKind::kCvrp && k + 1 < sp.path_len) out.flags[pos] = sub.flags[k];
      }
      break;
    }
    case ProblemKind::kOp:
    case ProblemKind::kPctsp: {
      const int tau = static_cast<int>(out.order.size());
      const int p0 = position_of(out.order, sp.nodes[0]);
      std::vector<int> lin;
      lin.reserve(tau + sub.seq.size());
      for (int v : sub.seq) lin.push_back(sp.nodes[v]);
      // Everything after the window end, back around to (excluding) the start.
      const int end_node = sp.nodes[sp.path_len - 1];
      int pos = (p0 + 1) % tau;
      while (out.order[pos] != end_node) pos = (pos + 1) % tau;
      for (pos = (pos + 1) % tau; pos != p0; pos = (pos + 1) % tau) lin.push_back(out.order[pos]);
      const auto depot = std::find(lin.begin(), lin.end(), 0);
      if (depot == lin.end()) throw Error("invariant_violation", "depot dropped by a merge");
      std::rotate(lin.begin(), depot, lin.end());
      out.order = std::move(lin);
      break;
    }
    case ProblemKind::kKp:
    case ProblemKind::kMis: {
      std::vector<std::uint8_t> in(inst.n, 0);
      for (int v : out.subset) in[v] = 1;
      for (int v : sp.nodes) in[v] = 0;
      for (int v : sub.seq) in[sp.nodes[v]] = 1;
      out.subset.clear();
      for (int v = 0; v < inst.n; ++v) {
        if (in[v]) out.subset.push_back(v);
      }
      break;
    }
  }
  refresh(inst, out);
  return out;
}

Solution accept_and_merge(const Instance& inst, const Solution& sol, const std::vector<SubProblem>& subs,
                          const std::vector<SubSolution>& chosen, MergeReport* report) {
  if (subs.size() != chosen.size()) throw Error("invalid_argument", "one sub-solution per window");
  Solution cur = sol;
  if (!cur.feasible) refresh(inst, cur);
  double cur_cost = as_cost(inst.kind, cur.objective);
  MergeReport rep;
  for (std::size_t k = 0; k < subs.size(); ++k) {
    const SubSolution& cand = chosen[k];
    if (cand.fallback || !(cand.cost < subs[k].original.cost)) continue;
    ++rep.improved;
    Solution next = apply_subsolution(inst, cur, subs[k], cand);
    if (!next.feasible) continue;
    const double next_cost = as_cost(inst.kind, next.objective);
    if (!(next_cost < cur_cost)) continue;
    cur = std::move(next);
    cur_cost = next_cost;
    ++rep.accepted;
  }
  if (inst.kind == ProblemKind::kCvrp && rep.accepted > 0) {
    canonicalize_cvrp(cur);
    refresh(inst, cur);
  }
  if (!cur.feasible) throw Error("invariant_violation", "merged solution is infeasible");
  if (report != nullptr) *report = rep;
  return cur;
}

}  // namespace udc
