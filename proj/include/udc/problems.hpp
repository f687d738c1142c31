#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "udc/common.hpp"

namespace udc {

enum class ProblemKind { kTsp, kCvrp, kOp, kPctsp, kKp, kMis };
enum class Sense { kMinimize, kMaximize };

inline constexpr ProblemKind kAllKinds[] = {ProblemKind::kTsp, ProblemKind::kCvrp,
                                            ProblemKind::kOp,  ProblemKind::kPctsp,
                                            ProblemKind::kKp,  ProblemKind::kMis};

std::string to_string(ProblemKind kind);
ProblemKind parse_kind(std::string_view name);

Sense sense_of(ProblemKind kind);
/// TSP, CVRP, OP and PCTSP: solutions are node sequences over 2-D points.
bool is_routing(ProblemKind kind);
/// CVRP, OP and PCTSP carry a depot at node 0.
bool has_depot(ProblemKind kind);

struct Point {
  double x = 0;
  double y = 0;
};

inline double distance(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

/// One problem instance. Which payload fields are populated depends on `kind`;
/// the depot, when present, is node 0.
struct Instance {
  ProblemKind kind = ProblemKind::kTsp;
  int n = 0;
  std::vector<Point> coords;       // routing kinds
  std::vector<double> demands;     // CVRP, demands[0] == 0
  double capacity = 0;             // CVRP vehicle capacity or KP capacity W
  std::vector<double> prizes;      // OP, PCTSP, prizes[0] == 0
  std::vector<double> penalties;   // PCTSP, penalties[0] == 0
  double budget = 0;               // OP length limit T
  std::vector<double> values;      // KP
  std::vector<double> weights;     // KP
  std::vector<std::pair<int, int>> edges;     // MIS, undirected, u < v
  std::vector<std::vector<int>> adjacency;    // MIS, derived from edges
  double scale = 1;                // external coordinate scale (TSPLib)
  std::string name;

  double dist(int i, int j) const { return distance(coords[i], coords[j]); }
};

/// Rebuilds `adjacency` from `edges` (sorted neighbor lists).
void build_adjacency(Instance& inst);

/// Throws Error("invalid_instance") if a payload invariant is broken.
void validate_instance(const Instance& inst);

/// Routing kinds use `order` (+ `flags` for CVRP); KP and MIS use `subset`.
///
/// Encodings:
///   TSP    order is a permutation of all nodes (closed tour).
///   CVRP   order is a permutation of the customers 1..n-1; flags[t] == 1 means
///          the vehicle returns to the depot after order[t]. The sequence is
///          read cyclically, so any rotation describes the same routes.
///   OP     order[0] is the depot, followed by the visited nodes (closed loop).
///   PCTSP  same as OP.
///   KP/MIS subset is a sorted list of chosen indices.
struct Solution {
  std::vector<int> order;
  std::vector<std::uint8_t> flags;
  std::vector<int> subset;
  double objective = 0;
  bool feasible = false;
};

struct Verdict {
  bool ok = true;
  std::string violation;  // empty when ok
};

Verdict check_feasibility(const Instance& inst, const Solution& sol);

/// Raw objective: cost for minimization kinds, value for maximization kinds.
/// Throws Error("shape_mismatch") or Error("infeasible") carrying the violated
/// constraint name.
double evaluate_objective(const Instance& inst, const Solution& sol);

/// Objective without the feasibility check (shape is still checked).
double objective_unchecked(const Instance& inst, const Solution& sol);

/// Uniform "smaller is better" view of an objective value.
inline double as_cost(ProblemKind kind, double objective) {
  return sense_of(kind) == Sense::kMinimize ? objective : -objective;
}

/// Evaluates, checks and stores objective/feasible on the solution.
void refresh(const Instance& inst, Solution& sol);

/// Total length of the closed loop through `order` (TSP/OP/PCTSP geometry).
double loop_length(const Instance& inst, const std::vector<int>& order);

/// Incremental construction state shared by the dividing decoder and the
/// random/heuristic constructors. Actions are node indices; for CVRP choosing
/// the depot ends the current route, for OP/PCTSP it terminates the tour.
class Construction {
 public:
  explicit Construction(const Instance& inst);

  /// Picks the first node (depot kinds must start at the depot).
  void start(int node);
  bool started() const { return !sequence_.empty() || chosen_count_ > 0; }

  /// True at the positions that are legal next actions.
  std::vector<std::uint8_t> mask() const;
  bool allowed(int action) const;
  void apply(int action);
  bool done() const { return done_; }

  Solution finish() const;

  int current() const { return current_; }
  /// Nodes committed so far, in order (depot revisits included for CVRP).
  const std::vector<int>& sequence() const { return sequence_; }
  int committed() const { return static_cast<int>(sequence_.size()); }

  double load() const { return load_; }
  double length() const { return length_; }
  double collected() const { return collected_; }

 private:
  const Instance* inst_;
  std::vector<std::uint8_t> visited_;
  std::vector<std::uint8_t> blocked_;  // MIS: neighbor of a chosen node
  std::vector<int> sequence_;
  std::vector<std::uint8_t> flags_;    // CVRP, aligned with customer order
  std::vector<int> customers_;         // CVRP customer order
  int current_ = -1;
  int unvisited_ = 0;
  int chosen_count_ = 0;
  double load_ = 0;
  double length_ = 0;
  double collected_ = 0;
  bool done_ = false;
};

/// Mask of next legal actions. Throws Error("no_feasible_action") when the
/// prefix is a dead end.
std::vector<std::uint8_t> feasible_actions(const Instance& inst, const Construction& state);

struct GenerateParams {
  double capacity = 0;      // CVRP/KP override (0 = default for N)
  double capacity_lo = 0;   // CVRP/KP per-instance sampling range (both > 0)
  double capacity_hi = 0;
  double budget = 0;        // OP override
  double edge_prob = 0.15;  // MIS Erdos-Renyi probability
};

/// Deterministic generator; equal (kind, n, seed, params) gives bit-identical
/// instances. Rejects n < 2.
Instance generate_instance(ProblemKind kind, int n, std::uint64_t seed,
                           const GenerateParams& params = {});

double default_cvrp_capacity(int customers);
double default_op_budget(int n);
double default_kp_capacity(int n);
double pctsp_penalty_factor(int n);

/// Gap in percent against a positive reference.
double gap_percent(double objective, double reference, Sense sense);

}  // namespace udc
