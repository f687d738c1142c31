#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "udc/solve.hpp"

namespace udc {

/// Reads a TSPLib file (TYPE: TSP, EDGE_WEIGHT_TYPE: EUC_2D). Coordinates are
/// shifted and divided by the larger axis range so they fit in [0,1]^2; the
/// divisor is stored in Instance::scale.
Instance parse_tsplib(const std::string& path);
Instance parse_tsplib_text(const std::string& text, const std::string& name = "");

/// Writes `inst` as EUC_2D with coordinates multiplied back by inst.scale.
std::string tsplib_text(const Instance& inst);
void write_tsplib(const std::string& path, const Instance& inst);

/// Held-Karp optimum of a closed TSP tour (N <= 13).
double tsp_exact_length(const Instance& inst);
inline constexpr int kExactReferenceMaxN = 13;

struct RunRow {
  std::string name;
  int n = 0;
  double obj = 0;
  std::optional<double> ref;
  std::optional<double> gap;  // percent, from gap_percent(obj, ref, sense)
  bool feasible = false;
  double wall_ms = 0;
};

struct RunReport {
  ProblemKind kind = ProblemKind::kTsp;
  std::vector<RunRow> rows;
  double mean_obj = 0, std_obj = 0;
  double mean_gap = 0, std_gap = 0;  // over rows that have a reference
  double mean_wall_ms = 0, std_wall_ms = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t checkpoint_hash = 0;
};

/// Recomputes the aggregate fields from `rows`.
void aggregate(RunReport& report);

struct BenchConfig {
  ProblemKind kind = ProblemKind::kTsp;
  std::vector<Instance> instances;
  /// Stored reference objectives, aligned with `instances` (missing = none).
  std::vector<std::optional<double>> references;
  SolveConfig solve;
  std::string checkpoint;  // empty: solve.init must name a heuristic
  int threads = 0;         // 0: UDC_THREADS, else 1
};

/// Pool size: UDC_THREADS when set to a positive integer, else 1.
int bench_threads();

/// Solves every instance (bounded pool), fills references (stored value, or
/// the exact TSP optimum for tiny N) and gaps.
RunReport run_benchmark(const BenchConfig& cfg);

/// CSV projection without timing columns, so reruns are byte-identical.
std::string report_csv(const RunReport& report);
nlohmann::json to_json(const RunReport& report);
/// Writes <stem>.csv and <stem>.json.
void write_report(const RunReport& report, const std::string& stem);

}  // namespace udc
