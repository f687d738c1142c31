#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "udc/bench.hpp"
#include "udc/instance_io.hpp"

using namespace udc;

namespace {

const char* kTiny =
    "NAME : tiny\n"
    "COMMENT : three points\n"
    "TYPE : TSP\n"
    "DIMENSION : 3\n"
    "EDGE_WEIGHT_TYPE : EUC_2D\n"
    "NODE_COORD_SECTION\n"
    "1 10 20\n"
    "2 30 20\n"
    "3 10 60\n"
    "EOF\n";

std::string error_of(const std::string& text) {
  try {
    parse_tsplib_text(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("TSPLib: a minimal file parses, rescales and round-trips") {
  const Instance in = parse_tsplib_text(kTiny);
  CHECK(in.n == 3);
  CHECK(in.name == "tiny");
  CHECK(in.scale == 40);
  CHECK(in.coords[1].x == doctest::Approx(0.5));
  CHECK(in.coords[2].y == doctest::Approx(1.0));
  const Instance back = parse_tsplib_text(tsplib_text(in));
  CHECK(back.scale == in.scale);
  for (int i = 0; i < 3; ++i) {
    CHECK(back.coords[i].x == doctest::Approx(in.coords[i].x).epsilon(1e-15));
    CHECK(back.coords[i].y == doctest::Approx(in.coords[i].y).epsilon(1e-15));
  }
}

TEST_CASE("TSPLib: un-scaled tour length equals scale times internal length") {
  Rng rng(3);
  std::string text = "NAME : r\nTYPE : TSP\nDIMENSION : 25\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n";
  std::vector<std::pair<double, double>> raw;
  for (int i = 0; i < 25; ++i) {
    raw.push_back({rng.uniform(-500, 2500), rng.uniform(100, 900)});
    text += std::to_string(i + 1) + " " + std::to_string(raw.back().first) + " " + std::to_string(raw.back().second) + "\n";
  }
  const Instance in = parse_tsplib_text(text + "EOF\n");
  const Solution s = heuristic_initial(in, Heuristic::kRandom, 1);
  double ext = 0;
  for (std::size_t i = 0; i < s.order.size(); ++i) {
    const auto& a = raw[s.order[i]];
    const auto& b = raw[s.order[(i + 1) % s.order.size()]];
    ext += std::hypot(a.first - b.first, a.second - b.second);
  }
  CHECK(in.scale * s.objective == doctest::Approx(ext).epsilon(1e-6));
}

TEST_CASE("TSPLib: errors name the problem") {
  std::string dim = kTiny;
  dim.replace(dim.find("DIMENSION : 3"), 13, "DIMENSION : 5");
  const std::string e1 = error_of(dim);
  CHECK(e1.find("5") != std::string::npos);
  CHECK(e1.find("3") != std::string::npos);

  std::string bad = kTiny;
  bad.replace(bad.find("2 30 20"), 7, "2 30 x");
  CHECK(error_of(bad).find("line 8") != std::string::npos);

  std::string atsp = kTiny;
  atsp.replace(atsp.find("TYPE : TSP"), 10, "TYPE : ATSP");
  CHECK(error_of(atsp).find("unsupported") != std::string::npos);

  std::string geo = kTiny;
  geo.replace(geo.find("EUC_2D"), 6, "GEO");
  CHECK(error_of(geo).find("unsupported") != std::string::npos);
}

TEST_CASE("TSPLib: every header mutation that breaks the grammar is rejected") {
  const std::string good = kTiny;
  std::vector<std::string> lines;
  for (std::size_t a = 0, b; (b = good.find('\n', a)) != std::string::npos; a = b + 1) lines.push_back(good.substr(a, b - a));
  int mutated = 0;
  for (std::size_t i = 1; i <= 5; ++i) {  // header lines after NAME
    for (const std::string& repl : {std::string(""), std::string("GARBAGE"), std::string("TYPE TSP"),
                                    std::string(": 3"), std::string("DIMENSION : -3")}) {
      if (i == 1 && repl.empty()) continue;  // dropping COMMENT is legal
      auto copy = lines;
      if (repl.empty()) {
        copy.erase(copy.begin() + i);
      } else {
        copy[i] = repl;
      }
      std::string text;
      for (const auto& l : copy) text += l + "\n";
      INFO("line ", i, " -> '", repl, "'");
      CHECK_THROWS_AS(parse_tsplib_text(text), Error);
      ++mutated;
    }
  }
  CHECK(mutated == 24);
}

TEST_CASE("exact TSP reference matches brute-force enumeration") {
  for (int i = 0; i < 10; ++i) {
    const Instance in = generate_instance(ProblemKind::kTsp, 4 + i % 5, derive_seed(1, i));
    std::vector<int> perm(in.n - 1);
    std::iota(perm.begin(), perm.end(), 1);
    double best = 1e300;
    do {
      double len = in.dist(0, perm.front()) + in.dist(perm.back(), 0);
      for (std::size_t k = 0; k + 1 < perm.size(); ++k) len += in.dist(perm[k], perm[k + 1]);
      best = std::min(best, len);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(tsp_exact_length(in) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("report gaps and aggregates are recomputable from rows") {
  RunReport r;
  r.rows.push_back({"fixture", 500, 16.78, 16.52, gap_percent(16.78, 16.52, Sense::kMinimize), true, 1});
  r.rows.push_back({"b", 10, 3, 2, gap_percent(3, 2, Sense::kMinimize), true, 3});
  aggregate(r);
  // Published pair (16.78, 16.52) with a 1.58% gap; both objectives are
  // rounded to two decimals, so the gap is only known to about 0.03 points.
  CHECK(std::abs(*r.rows[0].gap - 1.58) < 0.02);
  CHECK(r.mean_obj == doctest::Approx((16.78 + 3) / 2));
  CHECK(r.mean_gap == doctest::Approx((*r.rows[0].gap + 50) / 2));
  CHECK(r.std_wall_ms == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("empty test set gives a header-only report") {
  BenchConfig c;
  c.solve.backend = Backend::kExact;
  c.solve.init = Heuristic::kNearestGreedy;
  const RunReport r = run_benchmark(c);
  CHECK(r.rows.empty());
  CHECK(report_csv(r) == "name,n,obj,ref,gap_pct,feasible\n");
}

TEST_CASE("benchmark is deterministic and uses exact references for tiny TSP") {
  BenchConfig c;
  for (int i = 0; i < 6; ++i) c.instances.push_back(generate_instance(ProblemKind::kTsp, 10 + 4 * i, derive_seed(2, i)));
  c.solve.backend = Backend::kExact;
  c.solve.init = Heuristic::kRandomInsertion;
  c.solve.stages = 3;
  c.solve.seed = 4;
  c.threads = 3;
  const RunReport a = run_benchmark(c);
  c.threads = 1;
  const RunReport b = run_benchmark(c);
  CHECK(report_csv(a) == report_csv(b));
  CHECK(a.config_hash == b.config_hash);
  REQUIRE(a.rows.size() == 6u);
  CHECK(a.rows[0].ref.has_value());
  CHECK(*a.rows[0].gap >= -1e-9);
  CHECK_FALSE(a.rows[5].ref.has_value());
  for (const auto& row : a.rows) CHECK(row.feasible);
  write_report(a, "unit_report");
  std::ifstream js("unit_report.json");
  const auto j = nlohmann::json::parse(js);
  CHECK(j["rows"].size() == 6u);
  std::remove("unit_report.json");
  std::remove("unit_report.csv");
}

TEST_CASE("benchmark requires a checkpoint for the neural pipeline") {
  BenchConfig c;
  c.instances.push_back(generate_instance(ProblemKind::kTsp, 10, 1));
  CHECK_THROWS_AS(run_benchmark(c), Error);
  c.checkpoint = "does_not_exist.ckpt";
  CHECK_THROWS_AS(run_benchmark(c), Error);
}

TEST_CASE("UDC_THREADS caps the pool") {
  setenv("UDC_THREADS", "3", 1);
  CHECK(bench_threads() == 3);
  setenv("UDC_THREADS", "zero", 1);
  CHECK(bench_threads() == 1);
  unsetenv("UDC_THREADS");
  CHECK(bench_threads() == 1);
}
