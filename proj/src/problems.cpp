#include "udc/problems.hpp"

#include <algorithm>
#include <numeric>

namespace udc {

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kTsp: return "tsp";
    case ProblemKind::kCvrp: return "cvrp";
    case ProblemKind::kOp: return "op";
    case ProblemKind::kPctsp: return "pctsp";
    case ProblemKind::kKp: return "kp";
    case ProblemKind::kMis: return "mis";
  }
  return "unknown";
}

ProblemKind parse_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (ProblemKind k : kAllKinds) {
    if (to_string(k) == lower) return k;
  }
  throw Error("unsupported", "unknown problem kind '" + std::string(name) + "'");
}

Sense sense_of(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kOp:
    case ProblemKind::kKp:
    case ProblemKind::kMis:
      return Sense::kMaximize;
    default:
      return Sense::kMinimize;
  }
}

bool is_routing(ProblemKind kind) {
  return kind == ProblemKind::kTsp || kind == ProblemKind::kCvrp || kind == ProblemKind::kOp ||
         kind == ProblemKind::kPctsp;
}

bool has_depot(ProblemKind kind) {
  return kind == ProblemKind::kCvrp || kind == ProblemKind::kOp || kind == ProblemKind::kPctsp;
}

void build_adjacency(Instance& inst) {
  inst.adjacency.assign(inst.n, {});
  for (auto [u, v] : inst.edges) {
    inst.adjacency[u].push_back(v);
    inst.adjacency[v].push_back(u);
  }
  for (auto& nbrs : inst.adjacency) std::sort(nbrs.begin(), nbrs.end());
}

namespace {

[[noreturn]] void bad_instance(const std::string& what) { throw Error("invalid_instance", what); }

void expect_size(const std::vector<double>& v, int n, const char* field) {
  if (static_cast<int>(v.size()) != n) {
    bad_instance(std::string(field) + " has " + std::to_string(v.size()) + " entries, expected " +
                 std::to_string(n));
  }
}

}  // namespace

void validate_instance(const Instance& inst) {
  if (inst.n < 2) bad_instance("n must be >= 2");
  if (is_routing(inst.kind)) {
    if (static_cast<int>(inst.coords.size()) != inst.n) bad_instance("coords size != n");
    for (const Point& p : inst.coords) {
      if (!(p.x >= 0 && p.x <= 1 && p.y >= 0 && p.y <= 1)) bad_instance("coordinate outside [0,1]^2");
    }
  }
  switch (inst.kind) {
    case ProblemKind::kCvrp:
      expect_size(inst.demands, inst.n, "demands");
      if (!(inst.capacity > 0)) bad_instance("capacity must be positive");
      if (inst.demands[0] != 0) bad_instance("depot demand must be 0");
      for (int i = 1; i < inst.n; ++i) {
        if (!(inst.demands[i] > 0 && inst.demands[i] <= inst.capacity)) {
          bad_instance("demand of node " + std::to_string(i) + " outside (0, C]");
        }
      }
      break;
    case ProblemKind::kOp:
      expect_size(inst.prizes, inst.n, "prizes");
      if (!(inst.budget > 0)) bad_instance("budget must be positive");
      break;
    case ProblemKind::kPctsp:
      expect_size(inst.prizes, inst.n, "prizes");
      expect_size(inst.penalties, inst.n, "penalties");
      if (std::accumulate(inst.prizes.begin(), inst.prizes.end(), 0.0) < 1.0) {
        bad_instance("total prize below the required 1");
      }
      break;
    case ProblemKind::kKp:
      expect_size(inst.values, inst.n, "values");
      expect_size(inst.weights, inst.n, "weights");
      if (!(inst.capacity > 0)) bad_instance("capacity must be positive");
      for (int i = 0; i < inst.n; ++i) {
        if (!(inst.values[i] > 0 && inst.values[i] <= 1 && inst.weights[i] > 0 &&
              inst.weights[i] <= 1)) {
          bad_instance("item " + std::to_string(i) + " value/weight outside (0,1]");
        }
      }
      break;
    case ProblemKind::kMis:
      for (auto [u, v] : inst.edges) {
        if (u < 0 || v < 0 || u >= inst.n || v >= inst.n) bad_instance("edge endpoint out of range");
        if (u == v) bad_instance("self-loop");
      }
      if (static_cast<int>(inst.adjacency.size()) != inst.n) bad_instance("adjacency not built");
      break;
    case ProblemKind::kTsp:
      break;
  }
}

namespace {

[[noreturn]] void shape_error(const std::string& what) { throw Error("shape_mismatch", what); }

void check_routing_shape(const Instance& inst, const Solution& sol) {
  if (!sol.subset.empty()) shape_error("routing solution carries a subset");
  for (int v : sol.order) {
    if (v < 0 || v >= inst.n) shape_error("node index " + std::to_string(v) + " out of range");
  }
  if (inst.kind == ProblemKind::kCvrp) {
    if (sol.flags.size() != sol.order.size()) shape_error("flags not aligned with order");
    if (sol.order.empty()) shape_error("empty CVRP order");
  } else if (!sol.flags.empty()) {
    shape_error("flags only apply to CVRP");
  }
  if ((inst.kind == ProblemKind::kOp || inst.kind == ProblemKind::kPctsp) && sol.order.empty()) {
    shape_error("tour must start at the depot");
  }
}

void check_subset_shape(const Instance& inst, const Solution& sol) {
  if (!sol.order.empty() || !sol.flags.empty()) shape_error("subset solution carries an order");
  for (int v : sol.subset) {
    if (v < 0 || v >= inst.n) shape_error("index " + std::to_string(v) + " out of range");
  }
}

double cvrp_cost(const Instance& inst, const Solution& sol) {
  const int m = static_cast<int>(sol.order.size());
  double total = 0;
  for (int t = 0; t < m; ++t) {
    const int a = sol.order[t];
    const int b = sol.order[(t + 1) % m];
    total += sol.flags[t] ? inst.dist(a, 0) + inst.dist(0, b) : inst.dist(a, b);
  }
  return total;
}

bool distinct(const std::vector<int>& nodes, int n) {
  std::vector<std::uint8_t> seen(n, 0);
  for (int v : nodes) {
    if (seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

Verdict violation(std::string name) { return Verdict{false, std::move(name)}; }

}  // namespace

double loop_length(const Instance& inst, const std::vector<int>& order) {
  const int m = static_cast<int>(order.size());
  if (m < 2) return 0;
  double total = 0;
  for (int t = 0; t + 1 < m; ++t) total += inst.dist(order[t], order[t + 1]);
  return total + inst.dist(order[m - 1], order[0]);
}

double objective_unchecked(const Instance& inst, const Solution& sol) {
  switch (inst.kind) {
    case ProblemKind::kTsp:
      check_routing_shape(inst, sol);
      return loop_length(inst, sol.order);
    case ProblemKind::kCvrp:
      check_routing_shape(inst, sol);
      return cvrp_cost(inst, sol);
    case ProblemKind::kOp: {
      check_routing_shape(inst, sol);
      double prize = 0;
      for (int v : sol.order) prize += inst.prizes[v];
      return prize;
    }
    case ProblemKind::kPctsp: {
      check_routing_shape(inst, sol);
      std::vector<std::uint8_t> seen(inst.n, 0);
      for (int v : sol.order) seen[v] = 1;
      double total = loop_length(inst, sol.order);
      for (int i = 1; i < inst.n; ++i) {
        if (!seen[i]) total += inst.penalties[i];
      }
      return total;
    }
    case ProblemKind::kKp: {
      check_subset_shape(inst, sol);
      double value = 0;
      for (int v : sol.subset) value += inst.values[v];
      return value;
    }
    case ProblemKind::kMis:
      check_subset_shape(inst, sol);
      return static_cast<double>(sol.subset.size());
  }
  return 0;
}

Verdict check_feasibility(const Instance& inst, const Solution& sol) {
  try {
    if (is_routing(inst.kind)) {
      check_routing_shape(inst, sol);
    } else {
      check_subset_shape(inst, sol);
    }
  } catch (const Error&) {
    return violation("shape");
  }
  switch (inst.kind) {
    case ProblemKind::kTsp:
      if (static_cast<int>(sol.order.size()) != inst.n || !distinct(sol.order, inst.n)) {
        return violation("permutation");
      }
      return {};
    case ProblemKind::kCvrp: {
      const int m = static_cast<int>(sol.order.size());
      if (m != inst.n - 1 || !distinct(sol.order, inst.n)) return violation("permutation");
      for (int v : sol.order) {
        if (v == 0) return violation("permutation");
      }
      int first_flag = -1;
      for (int t = 0; t < m; ++t) {
        if (sol.flags[t]) {
          first_flag = t;
          break;
        }
      }
      if (first_flag < 0) return violation("depot_return");
      double load = 0;
      for (int s = 1; s <= m; ++s) {
        const int t = (first_flag + s) % m;
        load += inst.demands[sol.order[t]];
        if (load > inst.capacity + kFeasibilityTol) return violation("capacity");
        if (sol.flags[t]) load = 0;
      }
      return {};
    }
    case ProblemKind::kOp:
    case ProblemKind::kPctsp: {
      if (sol.order.front() != 0 || !distinct(sol.order, inst.n)) return violation("tour");
      if (inst.kind == ProblemKind::kOp) {
        if (loop_length(inst, sol.order) > inst.budget + kFeasibilityTol) {
          return violation("length_budget");
        }
      } else {
        double prize = 0;
        for (int v : sol.order) prize += inst.prizes[v];
        if (prize < 1.0 - kFeasibilityTol) return violation("min_prize");
      }
      return {};
    }
    case ProblemKind::kKp: {
      if (!std::is_sorted(sol.subset.begin(), sol.subset.end()) ||
          std::adjacent_find(sol.subset.begin(), sol.subset.end()) != sol.subset.end()) {
        return violation("subset");
      }
      double weight = 0;
      for (int v : sol.subset) weight += inst.weights[v];
      if (weight > inst.capacity + kFeasibilityTol) return violation("capacity");
      return {};
    }
    case ProblemKind::kMis: {
      if (!std::is_sorted(sol.subset.begin(), sol.subset.end()) ||
          std::adjacent_find(sol.subset.begin(), sol.subset.end()) != sol.subset.end()) {
        return violation("subset");
      }
      std::vector<std::uint8_t> in(inst.n, 0);
      for (int v : sol.subset) in[v] = 1;
      for (int v : sol.subset) {
        for (int u : inst.adjacency[v]) {
          if (in[u]) return violation("independence");
        }
      }
      return {};
    }
  }
  return {};
}

double evaluate_objective(const Instance& inst, const Solution& sol) {
  const double value = objective_unchecked(inst, sol);
  const Verdict verdict = check_feasibility(inst, sol);
  if (!verdict.ok) throw Error("infeasible", verdict.violation);
  return value;
}

void refresh(const Instance& inst, Solution& sol) {
  sol.objective = objective_unchecked(inst, sol);
  sol.feasible = check_feasibility(inst, sol).ok;
}

// ---------------------------------------------------------------------------
// Construction

Construction::Construction(const Instance& inst) : inst_(&inst) {
  visited_.assign(inst.n, 0);
  if (inst.kind == ProblemKind::kMis) blocked_.assign(inst.n, 0);
  unvisited_ = has_depot(inst.kind) ? inst.n - 1 : inst.n;
}

void Construction::start(int node) {
  if (!sequence_.empty()) throw Error("illegal_action", "construction already started");
  if (node < 0 || node >= inst_->n) throw Error("illegal_action", "start node out of range");
  const ProblemKind kind = inst_->kind;
  if (has_depot(kind)) {
    if (node != 0) throw Error("illegal_action", "depot kinds start at the depot");
    current_ = 0;
    visited_[0] = 1;
    sequence_.push_back(0);
    return;
  }
  if (kind == ProblemKind::kKp && inst_->weights[node] > inst_->capacity + kFeasibilityTol) {
    throw Error("illegal_action", "first item does not fit");
  }
  current_ = -1;
  apply(node);
}

bool Construction::allowed(int a) const {
  if (done_ || a < 0 || a >= inst_->n) return false;
  const Instance& in = *inst_;
  switch (in.kind) {
    case ProblemKind::kTsp:
      return !visited_[a];
    case ProblemKind::kCvrp:
      if (a == 0) return current_ != 0;
      return !visited_[a] && load_ + in.demands[a] <= in.capacity + kFeasibilityTol;
    case ProblemKind::kOp: {
      if (a == 0) {
        if (current_ != 0) return true;
        for (int j = 1; j < in.n; ++j) {
          if (allowed(j)) return false;
        }
        return true;
      }
      return !visited_[a] &&
             length_ + in.dist(current_, a) + in.dist(a, 0) <= in.budget + kFeasibilityTol;
    }
    case ProblemKind::kPctsp:
      if (a == 0) return current_ != 0 && collected_ >= 1.0 - kFeasibilityTol;
      return !visited_[a];
    case ProblemKind::kKp:
      return !visited_[a] && load_ + in.weights[a] <= in.capacity + kFeasibilityTol;
    case ProblemKind::kMis:
      return !visited_[a] && !blocked_[a];
  }
  return false;
}

std::vector<std::uint8_t> Construction::mask() const {
  std::vector<std::uint8_t> m(inst_->n, 0);
  if (done_ || (sequence_.empty() && inst_->kind != ProblemKind::kMis)) return m;
  for (int a = 0; a < inst_->n; ++a) m[a] = allowed(a) ? 1 : 0;
  return m;
}

void Construction::apply(int a) {
  const Instance& in = *inst_;
  if (current_ >= 0 || !sequence_.empty()) {
    if (!allowed(a)) throw Error("illegal_action", "action " + std::to_string(a) + " is masked");
  }
  switch (in.kind) {
    case ProblemKind::kTsp:
      if (current_ >= 0) length_ += in.dist(current_, a);
      visited_[a] = 1;
      current_ = a;
      sequence_.push_back(a);
      done_ = --unvisited_ == 0;
      return;
    case ProblemKind::kCvrp:
      length_ += in.dist(current_, a);
      sequence_.push_back(a);
      if (a == 0) {
        flags_.back() = 1;
        load_ = 0;
        current_ = 0;
        return;
      }
      visited_[a] = 1;
      load_ += in.demands[a];
      customers_.push_back(a);
      flags_.push_back(0);
      current_ = a;
      if (--unvisited_ == 0) {
        flags_.back() = 1;
        done_ = true;
      }
      return;
    case ProblemKind::kOp:
    case ProblemKind::kPctsp:
      length_ += in.dist(current_, a);
      sequence_.push_back(a);
      current_ = a;
      if (a == 0) {
        done_ = true;
        return;
      }
      visited_[a] = 1;
      collected_ += in.prizes[a];
      --unvisited_;
      return;
    case ProblemKind::kKp: {
      visited_[a] = 1;
      load_ += in.weights[a];
      collected_ += in.values[a];
      current_ = a;
      sequence_.push_back(a);
      ++chosen_count_;
      bool any = false;
      for (int j = 0; j < in.n && !any; ++j) any = allowed(j);
      done_ = !any;
      return;
    }
    case ProblemKind::kMis: {
      visited_[a] = 1;
      current_ = a;
      sequence_.push_back(a);
      ++chosen_count_;
      for (int u : in.adjacency[a]) blocked_[u] = 1;
      bool any = false;
      for (int j = 0; j < in.n && !any; ++j) any = allowed(j);
      done_ = !any;
      return;
    }
  }
}

Solution Construction::finish() const {
  if (!done_) throw Error("incomplete", "construction not finished");
  Solution sol;
  switch (inst_->kind) {
    case ProblemKind::kTsp:
      sol.order = sequence_;
      break;
    case ProblemKind::kCvrp:
      sol.order = customers_;
      sol.flags = flags_;
      break;
    case ProblemKind::kOp:
    case ProblemKind::kPctsp:
      sol.order.assign(sequence_.begin(), sequence_.end() - 1);
      break;
    case ProblemKind::kKp:
    case ProblemKind::kMis:
      sol.subset = sequence_;
      std::sort(sol.subset.begin(), sol.subset.end());
      break;
  }
  refresh(*inst_, sol);
  return sol;
}

std::vector<std::uint8_t> feasible_actions(const Instance& inst, const Construction& state) {
  (void)inst;
  auto m = state.mask();
  if (!state.done() && std::find(m.begin(), m.end(), 1) == m.end()) {
    throw Error("no_feasible_action", "dead-end prefix of length " + std::to_string(state.committed()));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Generation

double default_cvrp_capacity(int customers) {
  if (customers <= 20) return 30;
  if (customers <= 50) return 40;
  if (customers <= 100) return 50;
  if (customers <= 500) return 100;
  if (customers <= 1000) return 200;
  return 300;
}

double default_op_budget(int n) {
  if (n <= 20) return 2;
  if (n <= 50) return 3;
  return 4;
}

double default_kp_capacity(int n) {
  if (n <= 100) return n / 4.0;
  return std::max(25.0, n / 8.0);
}

double pctsp_penalty_factor(int n) {
  if (n <= 20) return 2;
  if (n <= 50) return 3;
  if (n <= 100) return 4;
  if (n <= 500) return 9;
  if (n <= 1000) return 12;
  return 15;
}

namespace {

double pick_capacity(const GenerateParams& params, Rng& rng, double fallback, bool integral) {
  if (params.capacity > 0) return params.capacity;
  if (params.capacity_lo > 0 && params.capacity_hi >= params.capacity_lo) {
    const double c = rng.uniform(params.capacity_lo, params.capacity_hi);
    return integral ? std::floor(c) : c;
  }
  return fallback;
}

}  // namespace

Instance generate_instance(ProblemKind kind, int n, std::uint64_t seed, const GenerateParams& params) {
  if (n < 2) throw Error("unsupported", "instances need at least 2 nodes");
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(kind) * 1000003ULL + static_cast<std::uint64_t>(n)));
  Instance inst;
  inst.kind = kind;
  inst.n = n;
  inst.name = to_string(kind) + std::to_string(n) + "_s" + std::to_string(seed);
  if (is_routing(kind)) {
    inst.coords.resize(n);
    for (Point& p : inst.coords) {
      p.x = rng.uniform();
      p.y = rng.uniform();
    }
  }
  switch (kind) {
    case ProblemKind::kTsp:
      break;
    case ProblemKind::kCvrp: {
      inst.capacity = pick_capacity(params, rng, default_cvrp_capacity(n - 1), true);
      if (inst.capacity < 9) throw Error("unsupported", "CVRP capacity must be >= 9 (max demand)");
      inst.demands.assign(n, 0);
      for (int i = 1; i < n; ++i) inst.demands[i] = 1 + rng.below(9);
      break;
    }
    case ProblemKind::kOp: {
      inst.budget = params.budget > 0 ? params.budget : default_op_budget(n);
      double far = 0;
      for (int i = 1; i < n; ++i) far = std::max(far, inst.dist(0, i));
      inst.prizes.assign(n, 0);
      for (int i = 1; i < n; ++i) {
        const double ratio = far > 0 ? inst.dist(0, i) / far : 0;
        inst.prizes[i] = (1.0 + std::floor(99.0 * ratio)) / 100.0;
      }
      break;
    }
    case ProblemKind::kPctsp: {
      const double prize_hi = 4.0 / n;
      const double penalty_hi = 3.0 * pctsp_penalty_factor(n) / n;
      inst.prizes.assign(n, 0);
      inst.penalties.assign(n, 0);
      for (int attempt = 0;; ++attempt) {
        if (attempt == 1000) throw Error("unsupported", "cannot reach total prize 1 at this n");
        double total = 0;
        for (int i = 1; i < n; ++i) {
          inst.prizes[i] = rng.uniform(0, prize_hi);
          total += inst.prizes[i];
        }
        if (total >= 1.0) break;
      }
      for (int i = 1; i < n; ++i) inst.penalties[i] = rng.uniform(0, penalty_hi);
      break;
    }
    case ProblemKind::kKp: {
      inst.values.resize(n);
      inst.weights.resize(n);
      for (int i = 0; i < n; ++i) {
        inst.values[i] = rng.uniform_open0();
        inst.weights[i] = rng.uniform_open0();
      }
      inst.capacity = pick_capacity(params, rng, default_kp_capacity(n), false);
      break;
    }
    case ProblemKind::kMis: {
      for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
          if (rng.uniform() < params.edge_prob) inst.edges.emplace_back(u, v);
        }
      }
      build_adjacency(inst);
      break;
    }
  }
  validate_instance(inst);
  return inst;
}

double gap_percent(double objective, double reference, Sense sense) {
  if (!(reference > 0)) throw Error("invalid_argument", "gap needs a positive reference");
  const double diff = sense == Sense::kMinimize ? objective - reference : reference - objective;
  return 100.0 * diff / reference;
}

}  // namespace udc
