// Acceptance harness: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 = all pass). `--only 3,7` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "udc/bench.hpp"
#include "udc/solve.hpp"
#include "udc/train.hpp"

using namespace udc;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

AgnnConfig small_agnn() { return {2, 16}; }
ConquerConfig small_conquer() { return {8}; }

// Test-side path length over parent coordinates.
double leg(const Instance& inst, const Solution& x, int t) {
  const int tau = static_cast<int>(x.order.size());
  const int a = x.order[t], b = x.order[(t + 1) % tau];
  if (inst.kind == ProblemKind::kCvrp && x.flags[t]) return inst.dist(a, 0) + inst.dist(0, b);
  return inst.dist(a, b);
}

// ---------------------------------------------------------------------------
// 1 + 2: feasibility and per-rollout monotonicity over 10,000 solves.

struct SuiteStats {
  long solves = 0, infeasible = 0, worsened = 0, stages = 0;
  double wall_ms = 0;
  std::string first_problem;
};

const SuiteStats& feasibility_suite() {
  static SuiteStats st;
  static bool done = false;
  if (done) return st;
  done = true;
  const auto t0 = Clock::now();
  std::vector<Policy> policies;
  for (ProblemKind k : kAllKinds) policies.emplace_back(k, small_agnn(), small_conquer(), 11);
  const int rs[] = {0, 2, 50};
  const int total = 10'000;
  for (int i = 0; i < total; ++i) {
    const ProblemKind kind = kAllKinds[i % 6];
    const int r = rs[(i / 6) % 3];
    Rng rng(derive_seed(2024, i));
    const int n_nodes = 20 + static_cast<int>(rng.below(181));
    const Instance inst = generate_instance(kind, n_nodes, derive_seed(7, i));
    SolveConfig cfg;
    cfg.stages = r;
    cfg.alpha = 1 + static_cast<int>(rng.below(2));
    cfg.mode = rng.below(2) ? DecodeMode::kSample : DecodeMode::kGreedy;
    cfg.n = 10;
    cfg.seed = derive_seed(99, i);
    const SolveResult res = solve(inst, &policies[i % 6], cfg);
    ++st.solves;
    auto note = [&](const std::string& what) {
      if (st.first_problem.empty())
        st.first_problem = what + " (" + to_string(kind) + " N=" + std::to_string(n_nodes) + " r=" +
                           std::to_string(r) + " case " + std::to_string(i) + ")";
    };
    bool ok = check_feasibility(inst, res.best).ok;
    for (const auto& f : res.finals) ok = ok && check_feasibility(inst, f).ok;
    if (!ok) {
      ++st.infeasible;
      note("infeasible");
    }
    std::vector<double> prev = res.initial;
    for (const auto& s : res.stages) {
      ++st.stages;
      for (std::size_t a = 0; a < prev.size(); ++a) {
        if (as_cost(kind, s.objectives[a]) > as_cost(kind, prev[a])) {
          ++st.worsened;
          note("worsened");
        }
      }
      prev = s.objectives;
    }
  }
  st.wall_ms = ms_since(t0);
  return st;
}

Outcome criterion1() {
  const auto& s = feasibility_suite();
  std::ostringstream d;
  d << s.solves << " solves, " << s.infeasible << " infeasible, " << s.wall_ms / 1000.0 << " s";
  if (!s.first_problem.empty()) d << "; first: " << s.first_problem;
  return {s.solves == 10'000 && s.infeasible == 0 && s.wall_ms < 600'000.0, d.str()};
}

Outcome criterion2() {
  const auto& s = feasibility_suite();
  std::ostringstream d;
  d << s.stages << " stages checked, " << s.worsened << " per-rollout regressions";
  return {s.stages > 0 && s.worsened == 0, d.str()};
}

// ---------------------------------------------------------------------------
// 3: objective = sum of window sub-objectives + connection/leftover legs.

Outcome criterion3() {
  double worst = 0;
  int cases = 0;
  for (int i = 0; i < 1000; ++i) {
    const ProblemKind kind = i % 2 ? ProblemKind::kCvrp : ProblemKind::kTsp;
    Rng rng(derive_seed(33, i));
    const int n_nodes = 20 + static_cast<int>(rng.below(181));
    const Instance inst = generate_instance(kind, n_nodes, derive_seed(34, i));
    const Solution x = heuristic_initial(inst, Heuristic::kRandom, derive_seed(35, i));
    const int n = 4 + 2 * static_cast<int>(rng.below(6));
    const int p = static_cast<int>(rng.below(n));
    ExtractOptions eo;
    eo.normalize = false;
    const Decomposition dec = extract_subproblems(inst, x, n, p, rng, eo);
    const int tau = static_cast<int>(x.order.size());
    std::vector<int> owner(tau, -1);
    double windows = 0;
    for (std::size_t w = 0; w < dec.subs.size(); ++w) {
      const SubProblem& sp = dec.subs[w];
      windows += sp.original.cost;
      for (int k = 0; k < sp.path_len; ++k) owner[(sp.start_pos + k) % tau] = static_cast<int>(w);
    }
    double rest = 0;
    for (int t = 0; t < tau; ++t) {
      const int u = owner[t], v = owner[(t + 1) % tau];
      if (u < 0 || u != v || (dec.subs[u].start_pos + dec.subs[u].path_len - 1) % tau == t) rest += leg(inst, x, t);
    }
    const double f = evaluate_objective(inst, x);
    worst = std::max(worst, std::abs(f - (windows + rest)));
    ++cases;
  }
  std::ostringstream d;
  d << cases << " TSP/CVRP cases, max |f - decomposition| = " << worst;
  return {cases == 1000 && worst <= 1e-9, d.str()};
}

// ---------------------------------------------------------------------------
// 4: exact sub-TSP vs random orderings and exhaustive enumeration.

double path_cost(const SubProblem& sp, const std::vector<int>& seq) {
  double s = 0;
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) s += distance(sp.coords[seq[k]], sp.coords[seq[k + 1]]);
  return s;
}

Outcome criterion4() {
  long beaten = 0, enum_mismatch = 0, enum_cases = 0;
  for (int i = 0; i < 1000; ++i) {
    Rng rng(derive_seed(44, i));
    const int n = 3 + static_cast<int>(rng.below(8));  // 3..10
    const Instance inst = generate_instance(ProblemKind::kTsp, 2 * n + static_cast<int>(rng.below(30)), derive_seed(45, i));
    const Solution x = heuristic_initial(inst, Heuristic::kRandom, derive_seed(46, i));
    const Decomposition dec = extract_subproblems(inst, x, n, 0, rng);
    const SubProblem& sp = dec.subs.front();
    const SubSolution ex = conquer_exact(sp);
    const double ex_cost = path_cost(sp, ex.seq);
    std::vector<int> seq(n);
    std::iota(seq.begin(), seq.end(), 0);
    for (int s = 0; s < 1000; ++s) {
      for (int k = n - 2; k > 1; --k) std::swap(seq[k], seq[1 + rng.below(k)]);
      if (path_cost(sp, seq) < ex_cost - 1e-12) ++beaten;
    }
    if (n <= 6) {
      ++enum_cases;
      std::vector<int> mid(seq.begin() + 1, seq.end() - 1);
      std::sort(mid.begin(), mid.end());
      double best = std::numeric_limits<double>::infinity();
      do {
        std::vector<int> full{0};
        full.insert(full.end(), mid.begin(), mid.end());
        full.push_back(n - 1);
        best = std::min(best, path_cost(sp, full));
      } while (std::next_permutation(mid.begin(), mid.end()));
      if (std::abs(best - ex_cost) > 1e-12) ++enum_mismatch;
    }
  }
  std::ostringstream d;
  d << "1000 cases x 1000 orderings: " << beaten << " beat the exact solver; " << enum_cases
    << " enumerated, " << enum_mismatch << " mismatches";
  return {beaten == 0 && enum_mismatch == 0 && enum_cases > 0, d.str()};
}

// ---------------------------------------------------------------------------
// 5: surrogate gradients vs central finite differences.

Outcome criterion5() {
  const Instance inst = generate_instance(ProblemKind::kTsp, 12, 555);
  Policy policy(ProblemKind::kTsp, {2, 8}, {8}, 5);
  TrainConfig cfg;
  cfg.kind = ProblemKind::kTsp;
  cfg.n = 4;
  cfg.alpha = 2;
  cfg.beta = 2;
  const DcrStep step = dcr_step(inst, policy, cfg, 77);
  const double h = 1e-6;
  long checked = 0, failed = 0;
  double worst_abs = 0;
  std::string first;
  auto check = [&](nn::ParamStore& store, const nn::Gradients& g, bool divide) {
    for (int pi = 0; pi < store.size(); ++pi) {
      auto& par = store.at(pi);
      if (!par.trainable) continue;
      for (std::size_t e = 0; e < par.value.size(); ++e) {
        const double orig = par.value.data[e];
        par.value.data[e] = orig + h;
        const Surrogates up = replay_surrogates(inst, policy, step.record);
        par.value.data[e] = orig - h;
        const Surrogates dn = replay_surrogates(inst, policy, step.record);
        par.value.data[e] = orig;
        const double fd = divide ? (up.loss_d - dn.loss_d) / (2 * h) : (up.loss_c - dn.loss_c) / (2 * h);
        const double an = g[pi].data[e];
        const double ad = std::abs(an - fd);
        ++checked;
        if (ad > 1e-5 && ad > 1e-3 * std::abs(fd)) {
          ++failed;
          if (first.empty()) first = par.name + "[" + std::to_string(e) + "] analytic " + std::to_string(an) + " fd " + std::to_string(fd);
        }
        worst_abs = std::max(worst_abs, ad);
      }
    }
  };
  check(policy.divide.store(), step.grad_d, true);
  check(policy.conquer.store(), step.grad_c, false);
  std::ostringstream d;
  d << checked << " parameters, " << failed << " outside tolerance, max abs diff " << worst_abs
    << ", |grad_d| " << nn::global_norm(step.grad_d) << ", |grad_c| " << nn::global_norm(step.grad_c);
  if (!first.empty()) d << "; first: " << first;
  return {failed == 0 && nn::global_norm(step.grad_d) > 0 && nn::global_norm(step.grad_c) > 0, d.str()};
}

// ---------------------------------------------------------------------------
// 6: Reunion repairs a boundary-crossing defect.

Outcome criterion6() {
  Instance inst;
  inst.kind = ProblemKind::kTsp;
  inst.n = 8;
  const double pi = std::acos(-1.0);
  for (int i = 0; i < 8; ++i) inst.coords.push_back({0.5 + 0.4 * std::cos(2 * pi * i / 8), 0.5 + 0.4 * std::sin(2 * pi * i / 8)});
  Solution x;
  x.order = {0, 1, 2, 4, 3, 5, 6, 7};
  refresh(inst, x);
  SolveConfig cfg;
  cfg.backend = Backend::kExact;
  const StageResult conquer = run_stage(inst, x, 4, 0, nullptr, cfg, 1);
  const StageResult reunion = run_stage(inst, conquer.solution, 4, 2, nullptr, cfg, 2);
  const double perimeter = 8 * 2 * 0.4 * std::sin(pi / 8);
  const bool conquer_stuck = conquer.solution.objective == x.objective && conquer.report.accepted == 0;
  const bool repaired = reunion.solution.objective < conquer.solution.objective;
  std::ostringstream d;
  d << "initial " << x.objective << ", after conquer(p=0) " << conquer.solution.objective << ", after reunion(p=2) "
    << reunion.solution.objective << ", optimum " << perimeter;
  return {conquer_stuck && repaired && std::abs(reunion.solution.objective - perimeter) < 1e-9, d.str()};
}

// ---------------------------------------------------------------------------
// 7: learning signal on TSP20.

double mean_pipeline(const std::vector<Instance>& test, const Policy& policy, const SolveConfig& cfg) {
  double s = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    SolveConfig c = cfg;
    c.seed = derive_seed(cfg.seed, i);
    s += solve(test[i], &policy, c).best.objective;
  }
  return s / static_cast<double>(test.size());
}

Outcome criterion7() {
  const auto t0 = Clock::now();
  TrainConfig tc;
  tc.kind = ProblemKind::kTsp;
  tc.n_min = tc.n_max = 20;
  tc.n = 10;
  tc.alpha = 8;
  tc.beta = 8;
  tc.epochs = 30;
  tc.epoch_size = 64;
  tc.batch = 4;
  tc.lr_divide = 3e-3;
  tc.lr_conquer = 3e-3;
  tc.seed = 7;
  tc.agnn = small_agnn();
  tc.conquer = small_conquer();
  Policy policy(tc.kind, tc.agnn, tc.conquer, 7);
  const Policy untrained = policy;

  std::vector<Instance> test;
  for (int i = 0; i < 100; ++i) test.push_back(generate_instance(ProblemKind::kTsp, 20, derive_seed(0x7e57, i)));
  SolveConfig sc;
  sc.stages = 2;
  sc.n = 10;
  sc.alpha = 8;
  sc.seed = 3;

  const double before = mean_pipeline(test, untrained, sc);
  train(policy, tc, {});
  const double train_min = ms_since(t0) / 60000.0;
  const double after = mean_pipeline(test, policy, sc);
  SolveConfig greedy = sc;
  greedy.alpha = 1;
  greedy.init = Heuristic::kNearestGreedy;
  const double nearest = mean_pipeline(test, policy, greedy);
  const double gain = (before - after) / before;
  std::ostringstream d;
  d << "epoch-0 " << before << ", trained " << after << " (" << 100 * gain << "% better), nearest-greedy pipeline "
    << nearest << ", training " << train_min << " min";
  return {gain >= 0.10 && after <= nearest && train_min < 30.0, d.str()};
}

// ---------------------------------------------------------------------------
// 8: exact orders are invariant under normalization.

Outcome criterion8() {
  long windows = 0, differ = 0;
  for (int i = 0; windows < 1000; ++i) {
    const ProblemKind kind = i % 2 ? ProblemKind::kCvrp : ProblemKind::kTsp;
    Rng r1(derive_seed(88, i)), r2(derive_seed(88, i));
    const Instance inst = generate_instance(kind, 30 + static_cast<int>(r1.below(60)), derive_seed(89, i));
    r2.below(60);
    const Solution x = heuristic_initial(inst, Heuristic::kRandom, derive_seed(90, i));
    ExtractOptions on, off;
    off.normalize = false;
    const Decomposition a = extract_subproblems(inst, x, 10, 3, r1, on);
    const Decomposition b = extract_subproblems(inst, x, 10, 3, r2, off);
    for (std::size_t w = 0; w < a.subs.size() && windows < 1000; ++w) {
      const SubSolution sa = conquer_exact(a.subs[w]);
      const SubSolution sb = conquer_exact(b.subs[w]);
      ++windows;
      if (sa.seq != sb.seq || sa.flags != sb.flags) ++differ;
    }
  }
  std::ostringstream d;
  d << windows << " TSP/CVRP windows, " << differ << " orderings differ";
  return {windows == 1000 && differ == 0, d.str()};
}

// ---------------------------------------------------------------------------
// 9: OP/KP recycled budget accounting over 50-stage solves.

Outcome criterion9() {
  double worst = 0;
  long stages = 0;
  for (ProblemKind kind : {ProblemKind::kOp, ProblemKind::kKp}) {
    const Policy policy(kind, small_agnn(), small_conquer(), 9);
    for (int i = 0; i < 10; ++i) {
      const Instance inst = generate_instance(kind, 60 + 20 * i, derive_seed(91, i));
      Solution x = heuristic_initial(inst, kind == ProblemKind::kOp ? Heuristic::kRandomInsertion : Heuristic::kRandom,
                                     derive_seed(92, i));
      SolveConfig cfg;
      cfg.n = 10;
      Rng rng(derive_seed(93, i));
      const auto offsets = stage_offsets(50, cfg.n, rng);
      for (int s = 0; s < 50; ++s) {
        const StageResult sr = run_stage(inst, x, cfg.n, offsets[s], &policy, cfg, derive_seed(94, s));
        const Decomposition& dec = sr.decomposition;
        if (!dec.subs.empty()) {
          ++stages;
          double granted = 0, fixed = 0, total = 0;
          if (kind == ProblemKind::kOp) {
            total = inst.budget;
            fixed = loop_length(inst, x.order);
            for (const SubProblem& sp : dec.subs) {
              granted += sp.transform.degenerate ? sp.budget : sp.budget / sp.transform.sc;
              for (int k = 0; k + 1 < sp.path_len; ++k) fixed -= inst.dist(sp.nodes[k], sp.nodes[k + 1]);
            }
          } else {
            total = inst.capacity;
            std::vector<std::uint8_t> in_window(inst.n, 0);
            for (const SubProblem& sp : dec.subs) {
              granted += sp.capacity;
              for (int v : sp.nodes) in_window[v] = 1;
            }
            for (int v : x.subset) fixed += in_window[v] ? 0.0 : inst.weights[v];
          }
          const double err = std::abs(granted + fixed + dec.ledger.unassigned - total);
          const double ledger_err =
              std::abs(dec.ledger.sub_total + dec.ledger.unassigned + dec.ledger.fixed - dec.ledger.total);
          worst = std::max({worst, err, ledger_err, std::abs(dec.ledger.total - total)});
        }
        x = sr.solution;
      }
    }
  }
  std::ostringstream d;
  d << stages << " OP/KP stages, max accounting error " << worst;
  return {stages > 0 && worst <= 1e-9, d.str()};
}

// ---------------------------------------------------------------------------
// 10: near-linear wall time in N.

Outcome criterion10() {
  const Policy policy(ProblemKind::kTsp, small_agnn(), small_conquer(), 10);
  const int sizes[] = {100, 200, 400, 800};
  std::vector<double> xs, ys;
  for (int n_nodes : sizes) {
    std::vector<double> times;
    for (int rep = 0; rep < 7; ++rep) {
      const Instance inst = generate_instance(ProblemKind::kTsp, n_nodes, derive_seed(101, rep));
      SolveConfig cfg;
      cfg.stages = 2;
      cfg.n = 10;
      cfg.k = 20;
      cfg.T = 1;
      cfg.seed = rep;
      const auto t0 = Clock::now();
      solve(inst, &policy, cfg);
      times.push_back(ms_since(t0));
    }
    std::sort(times.begin(), times.end());
    xs.push_back(n_nodes);
    ys.push_back(times[times.size() / 2]);
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double b = sxy / sxx, a = my - b * mx;
  bool ok = b > 0;
  std::ostringstream d;
  d << "median ms";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double fit = a + b * xs[i];
    const double ratio = ys[i] / fit;
    ok = ok && fit > 0 && ratio <= 1.5 && ratio >= 1 / 1.5;
    d << " N=" << xs[i] << ":" << ys[i] << "(fit " << fit << ")";
  }
  return {ok, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--only") {
      std::stringstream ss(argv[i + 1]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    }
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"feasibility of 10,000 end-to-end solves", criterion1},
      {"per-rollout monotonicity of every stage", criterion2},
      {"objective decomposition over windows", criterion3},
      {"exact sub-TSP dominance and enumeration", criterion4},
      {"surrogate gradients vs finite differences", criterion5},
      {"reunion repairs the boundary defect", criterion6},
      {"TSP20 learning signal", criterion7},
      {"normalization neutrality of exact orders", criterion8},
      {"OP/KP budget conservation", criterion9},
      {"near-linear wall time in N", criterion10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(),
                ms_since(t0) / 1000.0);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed;
}
