#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "udc/conquer.hpp"
#include "udc/policy.hpp"

namespace udc {

enum class Backend { kNeural, kExact };

std::string to_string(Backend b);
Backend parse_backend(const std::string& s);

struct SolveConfig {
  int stages = 2;                 // r
  int alpha = 1;
  int n = 10;                     // sub-problem size
  int T = 1;                      // heatmap revisits
  int k = 0;                      // KNN size; 0 = default for N
  DecodeMode mode = DecodeMode::kGreedy;
  DecodeMode conquer_mode = DecodeMode::kGreedy;
  int beta = 0;                   // 0 = kind default
  std::uint64_t seed = 0;
  bool margin_recycling = true;
  Backend backend = Backend::kNeural;
  std::optional<Heuristic> init;  // heuristic initial solutions instead of the dividing policy
};

nlohmann::json to_json(const SolveConfig& cfg);

/// Offsets for stages 1..r: n/2, n, then Uniform{1..n} from `rng`.
std::vector<int> stage_offsets(int stages, int n, Rng& rng);

struct StageResult {
  Solution solution;
  Decomposition decomposition;
  std::vector<SubSolution> chosen;
  MergeReport report;
};

/// extract -> prepare -> normalize -> conquer -> accept_and_merge for one
/// solution. Solutions shorter than n pass through unchanged.
StageResult run_stage(const Instance& inst, const Solution& sol, int n, int p, const Policy* policy,
                      const SolveConfig& cfg, std::uint64_t seed);

struct StageTrace {
  int offset = 0;
  std::vector<double> objectives;      // per rollout, after the stage
  std::vector<BudgetLedger> ledgers;   // per rollout
  int accepted = 0;
};

struct SolveResult {
  Solution best;
  std::vector<double> trace;           // best objective after each stage; [0] = initial
  std::vector<double> initial;         // per-rollout initial objectives
  std::vector<StageTrace> stages;
  std::vector<Solution> finals;        // per rollout
  double wall_ms = 0;
};

/// Initial solutions (dividing policy or heuristic) for one instance.
std::vector<Solution> initial_solutions(const Instance& inst, const Policy* policy, const SolveConfig& cfg);

SolveResult solve(const Instance& inst, const Policy* policy, const SolveConfig& cfg);

nlohmann::json to_json(const SolveResult& r);

}  // namespace udc
