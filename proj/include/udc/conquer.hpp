#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "udc/divide.hpp"
#include "udc/nnet/params.hpp"
#include "udc/nnet/tape.hpp"
#include "udc/problems.hpp"

namespace udc {

/// Shift/scale/axis-swap map into the unit square:
///   x-span > y-span:  (x', y') = sc * (x - x_min, y - y_min)
///   otherwise:        (x', y') = sc * (y - y_min, x - x_min)
/// with sc = 1 / max(x-span, y-span).
struct Transform {
  double x_min = 0;
  double y_min = 0;
  double sc = 1;
  bool swap = false;
  bool degenerate = false;  // both spans zero: identity

  Point apply(Point p) const;
  Point invert(Point p) const;
};

Transform fit_transform(const std::vector<Point>& pts);

/// A candidate replacement for one window, in local indices.
///
///   routing  seq runs from the window's first node to its last node
///            (local ids; CVRP flags[k] = depot visit after seq[k], the
///            last flag is fixed by the parent)
///   KP/MIS   seq is the chosen local subset, sorted
struct SubSolution {
  std::vector<int> seq;
  std::vector<std::uint8_t> flags;
  double cost = 0;        // local sub-objective, smaller is better
  bool fallback = false;  // the policy could not complete; original fragment kept
};

struct SubProblem {
  ProblemKind kind = ProblemKind::kTsp;
  int window = 0;
  int start_pos = 0;         // parent position of the first window node (routing)
  std::vector<int> nodes;    // local -> parent node (KP items, MIS nodes)
  int path_len = 0;          // routing: nodes[0..path_len) is the window path

  // Payload. Geometry is in normalized units once `normalized` is set.
  std::vector<Point> coords;           // routing; CVRP appends the depot last
  std::vector<double> demand;          // CVRP
  std::vector<double> prize;           // OP, PCTSP
  std::vector<double> penalty;         // PCTSP (same length units as coords)
  std::vector<double> value, weight;   // KP
  std::vector<std::vector<int>> adj;   // MIS, local
  std::vector<std::uint8_t> forbidden; // MIS: adjacent to a fixed chosen node

  // Dispatched constraints.
  double capacity = 0;          // CVRP vehicle capacity, KP sub-capacity
  double load_before = 0;       // CVRP load upstream of the window on its route
  double load_after = 0;        // CVRP load downstream of the window on its route
  double residual_first = 0.5;  // (C - load_before) / (2C - load_before - load_after)
  double residual_last = 0.5;
  std::uint8_t last_flag = 0;   // CVRP flag of the last window position (fixed)
  double budget = 0;            // OP sub-path length budget
  double required_prize = 0;    // PCTSP interior prize lower bound
  double margin = 0;            // recycled margin granted to this window
  int depot_local = -1;         // OP/PCTSP interior depot that must stay

  bool normalized = false;
  Transform transform;
  SubSolution original;

  int size() const { return static_cast<int>(nodes.size()); }
  int depot_index() const { return path_len; }  // CVRP local index of the depot
};

/// Accounting of recycled OP length / KP capacity for one stage:
/// sub_total + unassigned == total - fixed.
struct BudgetLedger {
  double total = 0;
  double fixed = 0;
  double sub_total = 0;
  double unassigned = 0;
  bool applicable = false;
};

struct ExtractOptions {
  bool margin_recycling = true;
  bool normalize = true;
  int max_inject = -1;  // OP/PCTSP injected nodes per window; -1 means n
};

struct Decomposition {
  std::vector<SubProblem> subs;
  std::vector<int> leftover;   // routing: parent positions; KP/MIS: node ids
  std::vector<int> skipped;    // window indices dropped (CVRP route wrap)
  BudgetLedger ledger;
};

/// Length of the sequence windows are cut from: tour/customer/visit count
/// for routing kinds, N for KP and MIS.
int sequence_length(const Instance& inst, const Solution& sol);

/// Window start positions for a closed sequence of length tau.
std::vector<std::vector<int>> window_positions(int tau, int n, int p, std::vector<int>* leftover);

/// Splits the solution into floor(tau/n) windows starting at offset p. Routing
/// windows are cyclic; KP and MIS draw random memberships from `rng`.
Decomposition extract_subproblems(const Instance& inst, const Solution& sol, int n, int p, Rng& rng,
                                  const ExtractOptions& opt = {});

/// Maps geometry into the unit square and rescales length-valued constraints.
void normalize(SubProblem& sp);

/// Local objective and local feasibility of a candidate.
double sub_cost(const SubProblem& sp, const SubSolution& sol);
bool sub_feasible(const SubProblem& sp, const SubSolution& sol, std::string* why = nullptr);

/// Objective of the window fragment measured on the parent instance.
double fragment_cost_raw(const Instance& inst, const SubProblem& sp, const SubSolution& sol);

// ---------------------------------------------------------------------------
// Construction inside a sub-problem (shared by the neural conqueror, the
// random-sampling test oracles and the exact solvers).

inline constexpr double kSubTol = 1e-12;
inline constexpr int kConquerNodeFeatures = 6;
inline constexpr int kConquerContext = 4;
inline constexpr int kConquerPhi = 3;

class SubConstruction {
 public:
  /// `reversed` runs the path from the last window node back to the first
  /// (symmetric kinds only).
  SubConstruction(const SubProblem& sp, bool reversed = false);

  /// CVRP: 2m actions (direct j, or via the depot to j: j + m).
  int num_actions() const;
  std::vector<std::uint8_t> mask() const;
  bool allowed(int action) const;
  void apply(int action);
  bool done() const { return done_; }
  SubSolution finish() const;

  int current() const { return cur_; }
  int start_node() const { return start_; }
  int end_node() const { return end_; }
  int committed() const { return static_cast<int>(seq_.size()); }

  nn::Matrix node_features() const;  // m x kConquerNodeFeatures
  std::vector<double> context() const;
  std::vector<double> phi(int action) const;

 private:
  double d(int a, int b) const;
  bool interior_left() const;

  const SubProblem* sp_;
  bool reversed_;
  int m_;
  int start_ = -1;
  int end_ = -1;
  int cur_ = -1;
  std::vector<std::uint8_t> visited_;
  std::vector<std::uint8_t> blocked_;
  std::vector<int> seq_;
  std::vector<std::uint8_t> flags_;
  int interior_total_ = 0;
  int interior_seen_ = 0;
  double load_ = 0;
  double length_ = 0;
  double collected_ = 0;
  bool done_ = false;
};

// ---------------------------------------------------------------------------
// Conquering policies.

struct ConquerConfig {
  int width = 16;
};

nlohmann::json to_json(const ConquerConfig& cfg);
ConquerConfig conquer_config_from_json(const nlohmann::json& j);

/// Lightweight constructive policy: node MLP embedding, a context query and
/// pointer scores  10 tanh(q . k_j / sqrt(d)) + omega . phi_j.
class ConquerModel {
 public:
  ConquerModel(ProblemKind kind, ConquerConfig cfg, std::uint64_t seed);

  ProblemKind kind() const { return kind_; }
  const ConquerConfig& config() const { return cfg_; }
  nn::ParamStore& store() { return store_; }
  const nn::ParamStore& store() const { return store_; }
  void zero_parameters();

  struct Encoded {
    nn::Var h, keys, keys_via, mean;
  };
  Encoded encode(nn::Tape& t, const SubConstruction& c) const;
  /// 1 x num_actions scores for the current state.
  nn::Var scores(nn::Tape& t, const Encoded& enc, const SubConstruction& c) const;

 private:
  ProblemKind kind_;
  ConquerConfig cfg_;
  nn::ParamStore store_;
};

struct ConquerRollout {
  SubSolution solution;
  std::vector<int> actions;
  bool reversed = false;
  nn::Var log_prob;
  double log_prob_value = 0;
};

/// Symmetric sub-problems (TSP, OP, PCTSP) support two-sided sampling.
bool supports_two_sided(ProblemKind kind);
/// Inference rollouts per sub-problem: 2 (both ends) for symmetric kinds, else 1.
int default_inference_beta(ProblemKind kind);

struct ConquerOptions {
  int beta = 1;
  bool two_sided = false;
  DecodeMode mode = DecodeMode::kGreedy;
  std::uint64_t seed = 0;
  const std::vector<std::vector<int>>* forced = nullptr;  // per rollout
};

/// beta rollouts; with two_sided the second half starts from the other end
/// and is reversed back before scoring.
std::vector<ConquerRollout> conquer_neural(nn::Tape& t, const SubProblem& sp, const ConquerModel& model,
                                           const ConquerOptions& opt);

/// Size limits of the exact conqueror.
bool exact_supported(const SubProblem& sp);
/// Provably optimal sub-solution (Held-Karp / DP / meet-in-the-middle /
/// branch and bound depending on the kind). Throws "size_limit".
SubSolution conquer_exact(const SubProblem& sp);

// ---------------------------------------------------------------------------
// Merging.

/// The parent solution with one window replaced (no acceptance test).
Solution apply_subsolution(const Instance& inst, const Solution& sol, const SubProblem& sp,
                           const SubSolution& sub);

struct MergeReport {
  int improved = 0;   // strictly better sub-objective
  int accepted = 0;   // merged into the parent
};

/// Sequential merge: a window is replaced iff its sub-objective strictly
/// improves, the merged parent stays feasible and its objective strictly
/// improves.
Solution accept_and_merge(const Instance& inst, const Solution& sol, const std::vector<SubProblem>& subs,
                          const std::vector<SubSolution>& chosen, MergeReport* report = nullptr);

/// Rotates a CVRP encoding so the last flag sits at the end.
void canonicalize_cvrp(Solution& sol);

}  // namespace udc
