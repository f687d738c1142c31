#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "udc/conquer.hpp"

namespace udc {

Point Transform::apply(Point p) const {
  if (degenerate) return p;
  const double dx = (p.x - x_min) * sc;
  const double dy = (p.y - y_min) * sc;
  return swap ? Point{dy, dx} : Point{dx, dy};
}

Point Transform::invert(Point p) const {
  if (degenerate) return p;
  const double dx = swap ? p.y : p.x;
  const double dy = swap ? p.x : p.y;
  return Point{dx / sc + x_min, dy / sc + y_min};
}

Transform fit_transform(const std::vector<Point>& pts) {
  Transform tr;
  if (pts.empty()) {
    tr.degenerate = true;
    return tr;
  }
  double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
  for (const Point& p : pts) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  const double xs = x1 - x0;
  const double ys = y1 - y0;
  if (xs <= 0 && ys <= 0) {
    tr.degenerate = true;
    return tr;
  }
  tr.x_min = x0;
  tr.y_min = y0;
  tr.swap = !(xs > ys);
  tr.sc = 1.0 / std::max(xs, ys);
  return tr;
}

int sequence_length(const Instance& inst, const Solution& sol) {
  return is_routing(inst.kind) ? static_cast<int>(sol.order.size()) : inst.n;
}

std::vector<std::vector<int>> window_positions(int tau, int n, int p, std::vector<int>* leftover) {
  if (n < 2) throw Error("invalid_argument", "sub-problem size must be >= 2");
  if (n > tau) throw Error("invalid_argument", "sub-problem size " + std::to_string(n) +
                                                   " exceeds solution length " + std::to_string(tau));
  p = ((p % tau) + tau) % tau;
  const int w = tau / n;
  std::vector<std::vector<int>> out(w);
  for (int k = 0; k < w; ++k) {
    for (int j = 0; j < n; ++j) out[k].push_back((p + k * n + j) % tau);
  }
  if (leftover != nullptr) {
    leftover->clear();
    for (int j = w * n; j < tau; ++j) leftover->push_back((p + j) % tau);
  }
  return out;
}

namespace {

double path_length(const std::vector<Point>& c, const std::vector<int>& seq) {
  double s = 0;
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) s += distance(c[seq[k]], c[seq[k + 1]]);
  return s;
}

std::vector<int> iota_vec(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

void extract_tsp(const Instance& inst, const Solution& sol, int n, int p, Decomposition& dec) {
  const auto windows = window_positions(inst.n, n, p, &dec.leftover);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    SubProblem sp;
    sp.kind = inst.kind;
    sp.window = static_cast<int>(k);
    sp.start_pos = windows[k][0];
    for (int pos : windows[k]) {
      sp.nodes.push_back(sol.order[pos]);
      sp.coords.push_back(inst.coords[sol.order[pos]]);
    }
    sp.path_len = n;
    sp.original.seq = iota_vec(n);
    dec.subs.push_back(std::move(sp));
  }
}

void extract_cvrp(const Instance& inst, const Solution& sol, int n, int p, Decomposition& dec) {
  const int tau = static_cast<int>(sol.order.size());
  const auto windows = window_positions(tau, n, p, &dec.leftover);
  std::vector<int> owner(tau, -1);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    for (int pos : windows[k]) owner[pos] = static_cast<int>(k);
  }
  const double cap = inst.capacity;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& win = windows[k];
    const int me = static_cast<int>(k);
    bool ok = true;
    double before = 0;
    for (int pos = (win.front() - 1 + tau) % tau; !sol.flags[pos]; pos = (pos - 1 + tau) % tau) {
      if (owner[pos] == me) {
        ok = false;
        break;
      }
      before += inst.demands[sol.order[pos]];
    }
    double after = 0;
    if (ok && !sol.flags[win.back()]) {
      for (int pos = (win.back() + 1) % tau;; pos = (pos + 1) % tau) {
        if (owner[pos] == me) {
          ok = false;
          break;
        }
        after += inst.demands[sol.order[pos]];
        if (sol.flags[pos]) break;
      }
    }
    if (!ok) {
      dec.skipped.push_back(me);
      for (int pos : win) dec.leftover.push_back(pos);
      continue;
    }
    if (before > cap + kFeasibilityTol || after > cap + kFeasibilityTol) {
      throw Error("context_inconsistent", "negative residual capacity around window " + std::to_string(me));
    }
    SubProblem sp;
    sp.kind = inst.kind;
    sp.window = me;
    sp.start_pos = win.front();
    for (int pos : win) {
      const int v = sol.order[pos];
      sp.nodes.push_back(v);
      sp.coords.push_back(inst.coords[v]);
      sp.demand.push_back(inst.demands[v]);
      sp.original.flags.push_back(sol.flags[pos]);
    }
    sp.coords.push_back(inst.coords[0]);
    sp.path_len = n;
    sp.capacity = cap;
    sp.load_before = before;
    sp.load_after = after;
    const double r1 = cap - before;
    const double r2 = cap - after;
    sp.residual_first = r1 + r2 > 0 ? r1 / (r1 + r2) : 0.5;
    sp.residual_last = r1 + r2 > 0 ? r2 / (r1 + r2) : 0.5;
    sp.last_flag = sol.flags[win.back()];
    sp.original.seq = iota_vec(n);
    dec.subs.push_back(std::move(sp));
  }
  std::sort(dec.leftover.begin(), dec.leftover.end());
}

void extract_loop(const Instance& inst, const Solution& sol, int n, int p, Rng& rng,
                  const ExtractOptions& opt, Decomposition& dec) {
  const int tau = static_cast<int>(sol.order.size());
  const auto windows = window_positions(tau, n, p, &dec.leftover);
  const bool op = inst.kind == ProblemKind::kOp;

  std::vector<std::uint8_t> in_tour(inst.n, 0);
  for (int v : sol.order) in_tour[v] = 1;
  std::vector<int> unvisited;
  for (int v = 1; v < inst.n; ++v) {
    if (!in_tour[v]) unvisited.push_back(v);
  }
  rng.shuffle(unvisited);
  std::vector<std::uint8_t> claimed(inst.n, 0);
  const int cap = opt.max_inject < 0 ? n : opt.max_inject;

  const double length = loop_length(inst, sol.order);
  double collected = 0;
  for (int v : sol.order) collected += inst.prizes[v];
  const double margin = op ? std::max(0.0, inst.budget - length) : std::max(0.0, collected - 1.0);
  const int w = static_cast<int>(windows.size());
  const int lucky = opt.margin_recycling && w > 0 ? rng.below(w) : -1;

  double sub_paths = 0;
  for (int k = 0; k < w; ++k) {
    const auto& win = windows[k];
    SubProblem sp;
    sp.kind = inst.kind;
    sp.window = k;
    sp.start_pos = win.front();
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (int pos : win) {
      const int v = sol.order[pos];
      sp.nodes.push_back(v);
      const Point c = inst.coords[v];
      x0 = std::min(x0, c.x);
      x1 = std::max(x1, c.x);
      y0 = std::min(y0, c.y);
      y1 = std::max(y1, c.y);
    }
    sp.path_len = n;
    for (int j = 1; j + 1 < n; ++j) {
      if (sp.nodes[j] == 0) sp.depot_local = j;
    }
    int injected = 0;
    for (int v : unvisited) {
      if (injected >= cap) break;
      if (claimed[v]) continue;
      const Point c = inst.coords[v];
      if (c.x < x0 || c.x > x1 || c.y < y0 || c.y > y1) continue;
      claimed[v] = 1;
      sp.nodes.push_back(v);
      ++injected;
    }
    for (int v : sp.nodes) {
      sp.coords.push_back(inst.coords[v]);
      sp.prize.push_back(inst.prizes[v]);
      if (!op) sp.penalty.push_back(inst.penalties[v]);
    }
    sp.original.seq = iota_vec(n);
    const double l_orig = path_length(sp.coords, sp.original.seq);
    sub_paths += l_orig;
    if (op) {
      sp.margin = k == lucky ? margin : 0.0;
      sp.budget = l_orig + sp.margin;
      dec.ledger.sub_total += sp.budget;
    } else {
      double interior = 0;
      for (int j = 1; j + 1 < n; ++j) interior += sp.prize[j];
      sp.margin = k == lucky ? margin : 0.0;
      sp.required_prize = std::max(0.0, interior - sp.margin);
    }
    dec.subs.push_back(std::move(sp));
  }
  if (op) {
    dec.ledger.applicable = true;
    dec.ledger.total = inst.budget;
    dec.ledger.fixed = length - sub_paths;
    dec.ledger.unassigned = lucky >= 0 ? 0.0 : margin;
  }
}

void extract_kp(const Instance& inst, const Solution& sol, int n, Rng& rng, const ExtractOptions& opt,
                Decomposition& dec) {
  if (n > inst.n) throw Error("invalid_argument", "sub-problem size exceeds item count");
  std::vector<std::uint8_t> chosen(inst.n, 0);
  double total_w = 0;
  for (int v : sol.subset) {
    chosen[v] = 1;
    total_w += inst.weights[v];
  }
  std::vector<int> sel(sol.subset.begin(), sol.subset.end());
  std::vector<int> un;
  for (int v = 0; v < inst.n; ++v) {
    if (!chosen[v]) un.push_back(v);
  }
  rng.shuffle(sel);
  rng.shuffle(un);
  const int w = inst.n / n;
  const int chunk = sel.empty() ? 0 : std::min<int>(n, (static_cast<int>(sel.size()) + w - 1) / w);
  const double margin = std::max(0.0, inst.capacity - total_w);
  const int lucky = opt.margin_recycling ? rng.below(w) : -1;
  std::size_t si = 0, ui = 0;
  double in_windows = 0;
  for (int k = 0; k < w; ++k) {
    SubProblem sp;
    sp.kind = inst.kind;
    sp.window = k;
    double cap = 0;
    for (int c = 0; c < chunk && si < sel.size(); ++c, ++si) {
      sp.original.seq.push_back(sp.size());
      sp.nodes.push_back(sel[si]);
      cap += inst.weights[sel[si]];
    }
    while (sp.size() < n && ui < un.size()) sp.nodes.push_back(un[ui++]);
    in_windows += cap;
    sp.margin = k == lucky ? margin : 0.0;
    sp.capacity = cap + sp.margin;
    for (int v : sp.nodes) {
      sp.value.push_back(inst.values[v]);
      sp.weight.push_back(inst.weights[v]);
    }
    dec.ledger.sub_total += sp.capacity;
    dec.subs.push_back(std::move(sp));
  }
  for (; si < sel.size(); ++si) dec.leftover.push_back(sel[si]);
  for (; ui < un.size(); ++ui) dec.leftover.push_back(un[ui]);
  std::sort(dec.leftover.begin(), dec.leftover.end());
  dec.ledger.applicable = true;
  dec.ledger.total = inst.capacity;
  dec.ledger.fixed = total_w - in_windows;
  dec.ledger.unassigned = lucky >= 0 ? 0.0 : margin;
}

void extract_mis(const Instance& inst, const Solution& sol, int n, Rng& rng, Decomposition& dec) {
  if (n > inst.n) throw Error("invalid_argument", "sub-problem size exceeds node count");
  std::vector<std::uint8_t> chosen(inst.n, 0);
  for (int v : sol.subset) chosen[v] = 1;
  std::vector<int> perm = iota_vec(inst.n);
  rng.shuffle(perm);
  const int w = inst.n / n;
  std::vector<int> local(inst.n, -1);
  for (int k = 0; k < w; ++k) {
    SubProblem sp;
    sp.kind = inst.kind;
    sp.window = k;
    sp.nodes.assign(perm.begin() + k * n, perm.begin() + (k + 1) * n);
    std::sort(sp.nodes.begin(), sp.nodes.end());
    for (int i = 0; i < n; ++i) local[sp.nodes[i]] = i;
    sp.adj.assign(n, {});
    sp.forbidden.assign(n, 0);
    for (int i = 0; i < n; ++i) {
      const int v = sp.nodes[i];
      if (chosen[v]) sp.original.seq.push_back(i);
      for (int u : inst.adjacency[v]) {
        if (local[u] >= 0) {
          sp.adj[i].push_back(local[u]);
        } else if (chosen[u]) {
          sp.forbidden[i] = 1;
        }
      }
    }
    for (int v : sp.nodes) local[v] = -1;
    dec.subs.push_back(std::move(sp));
  }
  for (int j = w * n; j < inst.n; ++j) dec.leftover.push_back(perm[j]);
  std::sort(dec.leftover.begin(), dec.leftover.end());
}

}  // namespace

Decomposition extract_subproblems(const Instance& inst, const Solution& sol, int n, int p, Rng& rng,
                                  const ExtractOptions& opt) {
  Decomposition dec;
  switch (inst.kind) {
    case ProblemKind::kTsp:
      extract_tsp(inst, sol, n, p, dec);
      break;
    case ProblemKind::kCvrp:
      extract_cvrp(inst, sol, n, p, dec);
      break;
    case ProblemKind::kOp:
    case ProblemKind::kPctsp:
      extract_loop(inst, sol, n, p, rng, opt, dec);
      break;
    case ProblemKind::kKp:
      extract_kp(inst, sol, n, rng, opt, dec);
      break;
    case ProblemKind::kMis:
      extract_mis(inst, sol, n, rng, dec);
      break;
  }
  for (SubProblem& sp : dec.subs) {
    if (opt.normalize) {
      normalize(sp);
    } else {
      sp.original.cost = sub_cost(sp, sp.original);
    }
  }
  return dec;
}

void normalize(SubProblem& sp) {
  if (sp.normalized) return;
  sp.normalized = true;
  if (!is_routing(sp.kind) || sp.coords.empty()) {
    sp.transform.degenerate = true;
    sp.original.cost = sub_cost(sp, sp.original);
    return;
  }
  sp.transform = fit_transform(sp.coords);
  for (Point& c : sp.coords) c = sp.transform.apply(c);
  const double sc = sp.transform.degenerate ? 1.0 : sp.transform.sc;
  sp.budget *= sc;
  for (double& pen : sp.penalty) pen *= sc;
  sp.original.cost = sub_cost(sp, sp.original);
}

double sub_cost(const SubProblem& sp, const SubSolution& sol) {
  const auto& s = sol.seq;
  switch (sp.kind) {
    case ProblemKind::kTsp:
      return path_length(sp.coords, s);
    case ProblemKind::kCvrp: {
      const Point depot = sp.coords[sp.depot_index()];
      double total = 0;
      for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        const Point a = sp.coords[s[k]];
        const Point b = sp.coords[s[k + 1]];
        total += sol.flags[k] ? distance(a, depot) + distance(depot, b) : distance(a, b);
      }
      return total;
    }
    case ProblemKind::kOp: {
      double prize = 0;
      for (int v : s) prize += sp.prize[v];
      return -prize;
    }
    case ProblemKind::kPctsp: {
      std::vector<std::uint8_t> in(sp.size(), 0);
      for (int v : s) in[v] = 1;
      double total = path_length(sp.coords, s);
      for (int v = 1; v < sp.size(); ++v) {
        if (v != sp.path_len - 1 && !in[v]) total += sp.penalty[v];
      }
      return total;
    }
    case ProblemKind::kKp: {
      double value = 0;
      for (int v : s) value += sp.value[v];
      return -value;
    }
    case ProblemKind::kMis:
      return -static_cast<double>(s.size());
  }
  return 0;
}

bool sub_feasible(const SubProblem& sp, const SubSolution& sol, std::string* why) {
  auto fail = [&](const char* msg) {
    if (why != nullptr) *why = msg;
    return false;
  };
  const auto& s = sol.seq;
  const int m = sp.size();
  std::vector<std::uint8_t> seen(m, 0);
  for (int v : s) {
    if (v < 0 || v >= m) return fail("index out of range");
    if (seen[v]) return fail("repeated node");
    seen[v] = 1;
  }
  switch (sp.kind) {
    case ProblemKind::kTsp:
    case ProblemKind::kCvrp: {
      if (static_cast<int>(s.size()) != m || s.front() != 0 || s.back() != m - 1) {
        return fail("endpoints or coverage");
      }
      if (sp.kind == ProblemKind::kTsp) return true;
      if (static_cast<int>(sol.flags.size()) != m || sol.flags.back() != sp.last_flag) {
        return fail("flags");
      }
      double load = sp.load_before;
      for (int k = 0; k < m; ++k) {
        load += sp.demand[s[k]];
        if (load > sp.capacity + kFeasibilityTol) return fail("capacity");
        if (k + 1 < m && sol.flags[k]) load = 0;
      }
      if (load + sp.load_after > sp.capacity + kFeasibilityTol) return fail("capacity");
      return true;
    }
    case ProblemKind::kOp:
    case ProblemKind::kPctsp: {
      if (s.size() < 2 || s.front() != 0 || s.back() != sp.path_len - 1) return fail("endpoints");
      if (sp.depot_local >= 0 && !seen[sp.depot_local]) return fail("depot dropped");
      if (sp.kind == ProblemKind::kOp) {
        if (path_length(sp.coords, s) > sp.budget + kFeasibilityTol) return fail("length_budget");
      } else {
        double prize = 0;
        for (std::size_t k = 1; k + 1 < s.size(); ++k) prize += sp.prize[s[k]];
        if (prize < sp.required_prize - kFeasibilityTol) return fail("min_prize");
      }
      return true;
    }
    case ProblemKind::kKp: {
      double w = 0;
      for (int v : s) w += sp.weight[v];
      if (w > sp.capacity + kFeasibilityTol) return fail("capacity");
      return true;
    }
    case ProblemKind::kMis:
      for (int v : s) {
        if (sp.forbidden[v]) return fail("forbidden");
        for (int u : sp.adj[v]) {
          if (seen[u]) return fail("independence");
        }
      }
      return true;
  }
  return true;
}

double fragment_cost_raw(const Instance& inst, const SubProblem& sp, const SubSolution& sol) {
  const auto& s = sol.seq;
  double total = 0;
  switch (sp.kind) {
    case ProblemKind::kTsp:
    case ProblemKind::kOp:
    case ProblemKind::kPctsp:
      for (std::size_t k = 0; k + 1 < s.size(); ++k) total += inst.dist(sp.nodes[s[k]], sp.nodes[s[k + 1]]);
      return total;
    case ProblemKind::kCvrp:
      for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        const int a = sp.nodes[s[k]];
        const int b = sp.nodes[s[k + 1]];
        total += sol.flags[k] ? inst.dist(a, 0) + inst.dist(0, b) : inst.dist(a, b);
      }
      return total;
    case ProblemKind::kKp:
      for (int v : s) total += inst.values[sp.nodes[v]];
      return total;
    case ProblemKind::kMis:
      return static_cast<double>(s.size());
  }
  return total;
}

}  // namespace udc
