#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "udc/bench.hpp"
#include "udc/nnet/checkpoint.hpp"

namespace udc {

double tsp_exact_length(const Instance& inst) {
  const int n = inst.n;
  if (inst.kind != ProblemKind::kTsp || n < 2 || n > kExactReferenceMaxN)
    throw Error("invalid_argument", "exact reference needs TSP with 2 <= N <= 13");
  // dp[mask][j]: shortest path 0 -> ... -> j visiting mask (over nodes 1..n-1).
  const int m = n - 1;
  const std::size_t full = std::size_t{1} << m;
  std::vector<double> dp(full * m, std::numeric_limits<double>::infinity());
  for (int j = 0; j < m; ++j) dp[(std::size_t{1} << j) * m + j] = inst.dist(0, j + 1);
  for (std::size_t mask = 1; mask < full; ++mask) {
    for (int j = 0; j < m; ++j) {
      const double cur = dp[mask * m + j];
      if (!(mask >> j & 1) || !std::isfinite(cur)) continue;
      for (int k = 0; k < m; ++k) {
        if (mask >> k & 1) continue;
        const std::size_t nm = mask | (std::size_t{1} << k);
        dp[nm * m + k] = std::min(dp[nm * m + k], cur + inst.dist(j + 1, k + 1));
      }
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < m; ++j) best = std::min(best, dp[(full - 1) * m + j] + inst.dist(j + 1, 0));
  return best;
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = sd = 0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(sd / static_cast<double>(v.size() - 1)) : 0.0;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void aggregate(RunReport& r) {
  std::vector<double> obj, gap, wall;
  for (const auto& row : r.rows) {
    obj.push_back(row.obj);
    wall.push_back(row.wall_ms);
    if (row.gap) gap.push_back(*row.gap);
  }
  mean_std(obj, r.mean_obj, r.std_obj);
  mean_std(gap, r.mean_gap, r.std_gap);
  mean_std(wall, r.mean_wall_ms, r.std_wall_ms);
}

int bench_threads() {
  if (const char* env = std::getenv("UDC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min<long>(v, 256));
  }
  return 1;
}

RunReport run_benchmark(const BenchConfig& cfg) {
  RunReport report;
  report.kind = cfg.kind;
  nlohmann::json cj = to_json(cfg.solve);
  cj["kind"] = to_string(cfg.kind);
  report.config_hash = fnv1a(cj.dump());

  std::unique_ptr<Policy> policy;
  if (!cfg.checkpoint.empty()) {
    policy = std::make_unique<Policy>(load_policy(cfg.checkpoint));
    if (policy->kind() != cfg.kind) throw Error("kind_mismatch", "checkpoint is for " + to_string(policy->kind()));
    report.checkpoint_hash = nn::file_hash(cfg.checkpoint);
  } else if (!cfg.solve.init || cfg.solve.backend == Backend::kNeural) {
    throw Error("missing_checkpoint", "a checkpoint is required unless --init and --backend exact are given");
  }
  if (!cfg.references.empty() && cfg.references.size() != cfg.instances.size())
    throw Error("shape_mismatch", "one reference per instance");
  for (const auto& inst : cfg.instances) {
    if (inst.kind != cfg.kind) throw Error("kind_mismatch", "test set mixes problem kinds");
  }

  const std::size_t count = cfg.instances.size();
  report.rows.resize(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        const Instance& inst = cfg.instances[i];
        SolveConfig sc = cfg.solve;
        sc.seed = derive_seed(cfg.solve.seed, i);
        const SolveResult res = solve(inst, policy.get(), sc);
        RunRow& row = report.rows[i];
        row.name = inst.name.empty() ? "instance_" + std::to_string(i) : inst.name;
        row.n = inst.n;
        row.obj = res.best.objective;
        row.feasible = check_feasibility(inst, res.best).ok;
        row.wall_ms = res.wall_ms;
        if (!cfg.references.empty() && cfg.references[i]) {
          row.ref = *cfg.references[i];
        } else if (inst.kind == ProblemKind::kTsp && inst.n <= kExactReferenceMaxN) {
          row.ref = tsp_exact_length(inst);
        }
        if (row.ref) row.gap = gap_percent(row.obj, *row.ref, sense_of(inst.kind));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  const int threads = std::max(1, std::min<int>(cfg.threads > 0 ? cfg.threads : bench_threads(),
                                                static_cast<int>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  aggregate(report);
  return report;
}

std::string report_csv(const RunReport& r) {
  std::ostringstream out;
  out << "name,n,obj,ref,gap_pct,feasible\n";
  for (const auto& row : r.rows) {
    out << row.name << ',' << row.n << ',' << fmt(row.obj) << ',' << (row.ref ? fmt(*row.ref) : "") << ','
        << (row.gap ? fmt(*row.gap) : "") << ',' << (row.feasible ? 1 : 0) << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const RunReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json j{{"name", row.name}, {"n", row.n}, {"obj", row.obj}, {"feasible", row.feasible},
                     {"wall_ms", row.wall_ms}};
    j["ref"] = row.ref ? nlohmann::json(*row.ref) : nlohmann::json();
    j["gap_pct"] = row.gap ? nlohmann::json(*row.gap) : nlohmann::json();
    rows.push_back(j);
  }
  return {{"kind", to_string(r.kind)},
          {"rows", rows},
          {"aggregate",
           {{"mean_obj", r.mean_obj},
            {"std_obj", r.std_obj},
            {"mean_gap_pct", r.mean_gap},
            {"std_gap_pct", r.std_gap},
            {"mean_wall_ms", r.mean_wall_ms},
            {"std_wall_ms", r.std_wall_ms}}},
          {"config_hash", hex(r.config_hash)},
          {"checkpoint_hash", hex(r.checkpoint_hash)}};
}

void write_report(const RunReport& r, const std::string& stem) {
  std::ofstream csv(stem + ".csv", std::ios::trunc);
  std::ofstream js(stem + ".json", std::ios::trunc);
  if (!csv || !js) throw Error("io_error", "cannot write report " + stem);
  csv << report_csv(r);
  js << to_json(r).dump(2) << "\n";
}

}  // namespace udc
