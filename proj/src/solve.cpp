#include "udc/solve.hpp"

#include <algorithm>
#include <chrono>

#include "udc/instance_io.hpp"

namespace udc {

std::string to_string(Backend b) { return b == Backend::kExact ? "exact" : "neural"; }

Backend parse_backend(const std::string& s) {
  if (s == "exact") return Backend::kExact;
  if (s == "neural") return Backend::kNeural;
  throw Error("invalid_argument", "backend must be neural or exact, got " + s);
}

nlohmann::json to_json(const SolveConfig& c) {
  return {{"stages", c.stages},
          {"alpha", c.alpha},
          {"n", c.n},
          {"T", c.T},
          {"k", c.k},
          {"mode", to_string(c.mode)},
          {"conquer_mode", to_string(c.conquer_mode)},
          {"beta", c.beta},
          {"seed", c.seed},
          {"margin_recycling", c.margin_recycling},
          {"backend", to_string(c.backend)},
          {"init", c.init ? to_string(*c.init) : "policy"}};
}

std::vector<int> stage_offsets(int stages, int n, Rng& rng) {
  std::vector<int> out;
  for (int i = 1; i <= stages; ++i) {
    if (i <= 2) {
      out.push_back(n / 2 * i);
    } else {
      out.push_back(1 + rng.below(n));
    }
  }
  return out;
}

namespace {

bool better(ProblemKind kind, double a, double b) { return as_cost(kind, a) < as_cost(kind, b); }

}  // namespace

StageResult run_stage(const Instance& inst, const Solution& sol, int n, int p, const Policy* policy,
                      const SolveConfig& cfg, std::uint64_t seed) {
  StageResult res;
  res.solution = sol;
  if (sequence_length(inst, sol) < n) return res;
  const bool exact = cfg.backend == Backend::kExact;
  if (!exact && policy == nullptr) throw Error("invalid_argument", "neural backend needs a policy");
  ExtractOptions eo;
  eo.margin_recycling = cfg.margin_recycling;
  if (exact && (inst.kind == ProblemKind::kOp || inst.kind == ProblemKind::kPctsp)) {
    eo.max_inject = std::max(0, 14 - (n - 2));
  }
  Rng rng(derive_seed(seed, 0x57a9eu));
  res.decomposition = extract_subproblems(inst, sol, n, p, rng, eo);

  ConquerOptions co;
  co.beta = cfg.beta > 0 ? cfg.beta : default_inference_beta(inst.kind);
  co.two_sided = supports_two_sided(inst.kind) && co.beta % 2 == 0;
  co.mode = cfg.conquer_mode;
  nn::Tape tape(false);
  for (const SubProblem& sp : res.decomposition.subs) {
    if (exact && exact_supported(sp)) {
      res.chosen.push_back(conquer_exact(sp));
      continue;
    }
    if (policy == nullptr) {
      res.chosen.push_back(sp.original);
      continue;
    }
    tape.reset();
    co.seed = derive_seed(seed, static_cast<std::uint64_t>(sp.window) + 1);
    auto rolls = conquer_neural(tape, sp, policy->conquer, co);
    std::size_t best = 0;
    for (std::size_t b = 1; b < rolls.size(); ++b) {
      if (rolls[b].solution.cost < rolls[best].solution.cost) best = b;
    }
    res.chosen.push_back(std::move(rolls[best].solution));
  }
  res.solution = accept_and_merge(inst, sol, res.decomposition.subs, res.chosen, &res.report);
  return res;
}

std::vector<Solution> initial_solutions(const Instance& inst, const Policy* policy, const SolveConfig& cfg) {
  std::vector<Solution> out;
  if (cfg.init) {
    for (int a = 0; a < cfg.alpha; ++a) {
      out.push_back(heuristic_initial(inst, *cfg.init, derive_seed(cfg.seed, 0x1000u + a)));
    }
    return out;
  }
  if (policy == nullptr) throw Error("invalid_argument", "no policy and no heuristic initializer");
  const SparseGraph g = build_sparse_graph(inst, cfg.k > 0 ? cfg.k : default_k(inst.n));
  nn::Tape tape(false);
  const auto emb = policy->divide.forward(tape, g, nn::BnMode::kInfer);
  DecodeOptions opt;
  opt.mode = cfg.mode;
  opt.alpha = cfg.alpha;
  opt.T = cfg.T;
  opt.seed = derive_seed(cfg.seed, 0xd0u);
  for (auto& r : decode_t_revisit(tape, policy->divide, emb, g, inst, opt)) out.push_back(std::move(r.solution));
  return out;
}

SolveResult solve(const Instance& inst, const Policy* policy, const SolveConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.stages < 0 || cfg.alpha < 1 || cfg.n < 2) throw Error("invalid_config", "bad solve configuration");
  if (policy != nullptr && policy->kind() != inst.kind) {
    throw Error("kind_mismatch", "checkpoint is for " + to_string(policy->kind()) + ", instance is " +
                                     to_string(inst.kind));
  }
  SolveResult res;
  res.finals = initial_solutions(inst, policy, cfg);
  std::size_t best = 0;
  for (std::size_t a = 0; a < res.finals.size(); ++a) {
    res.initial.push_back(res.finals[a].objective);
    if (better(inst.kind, res.finals[a].objective, res.finals[best].objective)) best = a;
  }
  res.best = res.finals[best];
  res.trace.push_back(res.best.objective);

  Rng rng(derive_seed(cfg.seed, 0x0ff5e7u));
  const auto offsets = stage_offsets(cfg.stages, cfg.n, rng);
  for (int s = 0; s < cfg.stages; ++s) {
    StageTrace st;
    st.offset = offsets[s];
    for (std::size_t a = 0; a < res.finals.size(); ++a) {
      const std::uint64_t seed = derive_seed(cfg.seed, (static_cast<std::uint64_t>(s) << 20) + a);
      StageResult sr = run_stage(inst, res.finals[a], cfg.n, offsets[s], policy, cfg, seed);
      st.accepted += sr.report.accepted;
      st.ledgers.push_back(sr.decomposition.ledger);
      res.finals[a] = std::move(sr.solution);
      st.objectives.push_back(res.finals[a].objective);
      if (better(inst.kind, res.finals[a].objective, res.best.objective)) res.best = res.finals[a];
    }
    res.trace.push_back(res.best.objective);
    res.stages.push_back(std::move(st));
  }
  res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

nlohmann::json to_json(const SolveResult& r) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : r.stages) {
    stages.push_back({{"offset", s.offset}, {"objectives", s.objectives}, {"accepted", s.accepted}});
  }
  return {{"objective", r.best.objective},
          {"feasible", r.best.feasible},
          {"solution", solution_to_json(r.best)},
          {"trace", r.trace},
          {"initial", r.initial},
          {"stages", stages},
          {"wall_ms", r.wall_ms}};
}

}  // namespace udc
