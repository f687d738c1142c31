#include "udc/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "udc/instance_io.hpp"

namespace udc {

using nn::Tape;
using nn::Var;

nlohmann::json to_json(const TrainConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"n_min", c.n_min},
          {"n_max", c.n_max},
          {"n", c.n},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"epochs", c.epochs},
          {"epoch_size", c.epoch_size},
          {"batch", c.batch},
          {"lr_divide", c.lr_divide},
          {"lr_conquer", c.lr_conquer},
          {"seed", c.seed},
          {"two_sided", c.two_sided},
          {"dcr", c.dcr_enabled()},
          {"T", c.T},
          {"k", c.k}};
}

void validate(const TrainConfig& c) {
  auto bad = [](const std::string& why) { throw Error("invalid_config", why); };
  if (c.alpha < 2) bad("alpha must be >= 2 (shared baseline)");
  if (c.beta < 2) bad("beta must be >= 2 (shared baseline)");
  if (c.n < 2 || c.n % 2 != 0) bad("sub-problem size n must be even and >= 2");
  if (c.n_min < 2 || c.n_max < c.n_min) bad("instance size range is empty");
  if (c.epochs < 0 || c.epoch_size < 1 || c.batch < 1) bad("epochs/epoch_size/batch");
  if (c.T < 1) bad("T must be >= 1");
}

std::vector<double> advantages(const std::vector<double>& costs) {
  if (costs.empty()) return {};
  const double mean = std::accumulate(costs.begin(), costs.end(), 0.0) / static_cast<double>(costs.size());
  std::vector<double> a(costs.size());
  for (std::size_t i = 0; i < costs.size(); ++i) a[i] = costs[i] - mean;
  return a;
}

Var loss_dividing(Tape& t, const std::vector<Var>& log_probs, const std::vector<double>& costs) {
  if (log_probs.size() != costs.size()) throw Error("shape_mismatch", "one cost per initial solution");
  if (costs.size() < 2) throw Error("invalid_argument", "the dividing baseline needs alpha >= 2");
  auto w = advantages(costs);
  for (double& x : w) x /= static_cast<double>(costs.size());
  return nn::weighted_sum(t, log_probs, w);
}

Var loss_conquering(Tape& t, const std::vector<ConquerGroup>& groups, int alpha, int beta, int windows) {
  if (beta < 2) throw Error("invalid_argument", "the conquering baseline needs beta >= 2");
  const double pref = 1.0 / (static_cast<double>(alpha) * beta * std::max(1, windows));
  std::vector<Var> lp;
  std::vector<double> w;
  for (const auto& g : groups) {
    if (g.log_probs.size() != g.costs.size()) throw Error("shape_mismatch", "one cost per rollout");
    const auto a = advantages(g.costs);
    for (std::size_t b = 0; b < a.size(); ++b) {
      lp.push_back(g.log_probs[b]);
      w.push_back(a[b] * pref);
    }
  }
  return nn::weighted_sum(t, lp, w);
}

namespace {

double mean_objective(const std::vector<Solution>& xs) {
  double s = 0;
  for (const auto& x : xs) s += x.objective;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

ConquerOptions conquer_options(ProblemKind kind, const TrainConfig& cfg) {
  ConquerOptions co;
  co.beta = cfg.beta;
  co.two_sided = cfg.two_sided && supports_two_sided(kind) && cfg.beta % 2 == 0;
  co.mode = DecodeMode::kSample;
  return co;
}

}  // namespace

DcrStep dcr_step(const Instance& inst, const Policy& policy, const TrainConfig& cfg, std::uint64_t seed) {
  if (cfg.alpha < 2 || cfg.beta < 2) throw Error("invalid_config", "alpha and beta must be >= 2");
  if (policy.kind() != inst.kind) throw Error("kind_mismatch", "policy and instance kinds differ");
  DcrStep out;
  DcrRecord& rec = out.record;
  rec.alpha = cfg.alpha;
  rec.T = cfg.T;
  rec.k = cfg.k > 0 ? cfg.k : default_k(inst.n);
  rec.decode_seed = derive_seed(seed, 1);
  rec.beta = cfg.beta;
  const ConquerOptions base_co = conquer_options(inst.kind, cfg);
  rec.two_sided = base_co.two_sided;
  rec.windows = std::max(1, inst.n / cfg.n);

  // Divide.
  const SparseGraph g = build_sparse_graph(inst, rec.k);
  Tape td(cfg.train_divide);
  const auto emb = policy.divide.forward(td, g, nn::BnMode::kTrain);
  out.bn_stats = emb.stats;
  DecodeOptions dopt;
  dopt.mode = DecodeMode::kSample;
  dopt.alpha = cfg.alpha;
  dopt.T = cfg.T;
  dopt.seed = rec.decode_seed;
  auto rolls = decode_t_revisit(td, policy.divide, emb, g, inst, dopt);

  // Conquer (p = n/2) and Reunion (p = n).
  Tape tc(cfg.train_conquer);
  std::vector<ConquerGroup> groups;
  auto stage = [&](const Solution& x, int p, std::uint64_t sseed) {
    if (sequence_length(inst, x) < cfg.n) return x;
    Rng rng(derive_seed(sseed, 0x57a9eu));
    const Decomposition dec = extract_subproblems(inst, x, cfg.n, p, rng);
    std::vector<SubSolution> chosen;
    for (const SubProblem& sp : dec.subs) {
      ConquerOptions co = base_co;
      co.seed = derive_seed(sseed, static_cast<std::uint64_t>(sp.window) + 1);
      auto cr = conquer_neural(tc, sp, policy.conquer, co);
      ConquerGroup grp;
      DcrRecord::Sub rs;
      rs.sp = sp;
      std::size_t best = 0;
      for (std::size_t b = 0; b < cr.size(); ++b) {
        grp.log_probs.push_back(cr[b].log_prob);
        grp.costs.push_back(cr[b].solution.cost);
        rs.actions.push_back(cr[b].actions);
        if (cr[b].solution.cost < cr[best].solution.cost) best = b;
      }
      rs.costs = grp.costs;
      groups.push_back(std::move(grp));
      rec.subs.push_back(std::move(rs));
      chosen.push_back(cr[best].solution);
    }
    out.metrics.subproblems += static_cast<int>(dec.subs.size());
    return accept_and_merge(inst, x, dec.subs, chosen);
  };

  std::vector<Solution> x0, x1, x2;
  for (int i = 0; i < cfg.alpha; ++i) {
    rec.divide_actions.push_back(rolls[i].actions);
    x0.push_back(rolls[i].solution);
    const std::uint64_t s1 = derive_seed(seed, 0x100u + static_cast<std::uint64_t>(i));
    x1.push_back(stage(x0.back(), cfg.n / 2, s1));
    if (cfg.dcr_enabled()) {
      x2.push_back(stage(x1.back(), cfg.n, derive_seed(s1, 2)));
    } else {
      x2.push_back(x1.back());
    }
  }
  out.metrics.reunion = cfg.dcr_enabled();
  out.metrics.f_x0 = mean_objective(x0);
  out.metrics.f_x1 = mean_objective(x1);
  out.metrics.f_x2 = mean_objective(x2);

  std::vector<Var> lps;
  for (const auto& r : rolls) {
    lps.push_back(r.log_prob);
  }
  for (const auto& x : x2) rec.divide_costs.push_back(as_cost(inst.kind, x.objective));
  Var ld = loss_dividing(td, lps, rec.divide_costs);
  out.metrics.loss_d = td.scalar_value(ld);
  out.grad_d = policy.divide.store().zero_gradients();
  if (cfg.train_divide) {
    td.backward(ld);
    td.accumulate_gradients(policy.divide.store(), out.grad_d);
  }

  out.grad_c = policy.conquer.store().zero_gradients();
  if (!groups.empty()) {
    Var lc = loss_conquering(tc, groups, cfg.alpha, cfg.beta, rec.windows);
    out.metrics.loss_c = tc.scalar_value(lc);
    if (cfg.train_conquer) {
      tc.backward(lc);
      tc.accumulate_gradients(policy.conquer.store(), out.grad_c);
    }
  }
  return out;
}

Surrogates replay_surrogates(const Instance& inst, const Policy& policy, const DcrRecord& rec) {
  Surrogates s;
  const SparseGraph g = build_sparse_graph(inst, rec.k);
  Tape td(false);
  const auto emb = policy.divide.forward(td, g, nn::BnMode::kTrain);
  DecodeOptions dopt;
  dopt.mode = DecodeMode::kSample;
  dopt.alpha = rec.alpha;
  dopt.T = rec.T;
  dopt.seed = rec.decode_seed;
  dopt.forced = &rec.divide_actions;
  const auto rolls = decode_t_revisit(td, policy.divide, emb, g, inst, dopt);
  const auto a = advantages(rec.divide_costs);
  for (int i = 0; i < rec.alpha; ++i) s.loss_d += a[i] / rec.alpha * rolls[i].log_prob_value;

  const double pref = 1.0 / (static_cast<double>(rec.alpha) * rec.beta * rec.windows);
  for (const auto& sub : rec.subs) {
    Tape tc(false);
    ConquerOptions co;
    co.beta = rec.beta;
    co.two_sided = rec.two_sided;
    co.forced = &sub.actions;
    const auto cr = conquer_neural(tc, sub.sp, policy.conquer, co);
    const auto adv = advantages(sub.costs);
    for (std::size_t b = 0; b < cr.size(); ++b) s.loss_c += adv[b] * pref * cr[b].log_prob_value;
  }
  return s;
}

std::string csv_header() { return "epoch,mean_f_x0,mean_f_x1,mean_f_x2,grad_norm_d,grad_norm_c,wall_ms"; }

std::string csv_row(const EpochLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.1f", e.epoch, e.mean_f_x0, e.mean_f_x1,
                e.mean_f_x2, e.grad_norm_d, e.grad_norm_c, e.wall_ms);
  return buf;
}

namespace {

bool finite(const nn::Gradients& g) { return std::isfinite(nn::global_norm(g)); }

void scale_grads(nn::Gradients& g, double s) {
  for (auto& m : g) {
    for (double& x : m.data) x *= s;
  }
}

}  // namespace

std::vector<EpochLog> train(Policy& policy, const TrainConfig& cfg, const TrainOutputs& out) {
  validate(cfg);
  if (policy.kind() != cfg.kind) throw Error("kind_mismatch", "policy and config kinds differ");
  policy.divide.store().adam().lr = cfg.lr_divide;
  policy.conquer.store().adam().lr = cfg.lr_conquer;
  std::ofstream log;
  if (!out.log_csv.empty()) {
    log.open(out.log_csv, std::ios::trunc);
    if (!log) throw Error("io_error", "cannot write " + out.log_csv);
    log << csv_header() << "\n";
  }
  auto header = [&](int epoch) {
    return nlohmann::json{{"train", to_json(cfg)}, {"epochs_done", epoch}};
  };
  if (!out.checkpoint.empty()) save_policy(out.checkpoint, policy, header(0));

  std::vector<EpochLog> logs;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochLog el;
    el.epoch = epoch;
    nn::Gradients acc_d = policy.divide.store().zero_gradients();
    nn::Gradients acc_c = policy.conquer.store().zero_gradients();
    std::vector<std::vector<nn::BnBatchStats>> stats;
    int in_batch = 0;
    int updates = 0;
    for (int i = 0; i < cfg.epoch_size; ++i) {
      const std::uint64_t iseed = derive_seed(cfg.seed, (static_cast<std::uint64_t>(epoch) << 32) + i);
      Rng rng(iseed);
      const int n_nodes = cfg.n_min + rng.below(cfg.n_max - cfg.n_min + 1);
      const Instance inst = generate_instance(cfg.kind, n_nodes, iseed, cfg.gen);
      DcrStep step = dcr_step(inst, policy, cfg, derive_seed(iseed, 7));
      if (!std::isfinite(step.metrics.loss_d) || !std::isfinite(step.metrics.loss_c) ||
          !finite(step.grad_d) || !finite(step.grad_c)) {
        if (!out.checkpoint.empty()) save_policy(out.checkpoint + ".nonfinite", policy, header(epoch - 1));
        throw Error("non_finite", "epoch " + std::to_string(epoch) + " instance " + std::to_string(i) +
                                      ": loss_d=" + std::to_string(step.metrics.loss_d) +
                                      " loss_c=" + std::to_string(step.metrics.loss_c));
      }
      el.mean_f_x0 += step.metrics.f_x0 / cfg.epoch_size;
      el.mean_f_x1 += step.metrics.f_x1 / cfg.epoch_size;
      el.mean_f_x2 += step.metrics.f_x2 / cfg.epoch_size;
      nn::accumulate(acc_d, step.grad_d);
      nn::accumulate(acc_c, step.grad_c);
      stats.push_back(std::move(step.bn_stats));
      if (++in_batch == cfg.batch || i + 1 == cfg.epoch_size) {
        scale_grads(acc_d, 1.0 / in_batch);
        scale_grads(acc_c, 1.0 / in_batch);
        el.grad_norm_d += nn::global_norm(acc_d);
        el.grad_norm_c += nn::global_norm(acc_c);
        if (cfg.train_divide) {
          nn::adam_step(policy.divide.store(), acc_d);
          for (const auto& s : stats) policy.divide.update_running_stats(s);
        }
        if (cfg.train_conquer) nn::adam_step(policy.conquer.store(), acc_c);
        acc_d = policy.divide.store().zero_gradients();
        acc_c = policy.conquer.store().zero_gradients();
        stats.clear();
        in_batch = 0;
        ++updates;
      }
    }
    el.grad_norm_d /= updates;
    el.grad_norm_c /= updates;
    el.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (log) log << csv_row(el) << "\n" << std::flush;
    if (!out.checkpoint.empty()) save_policy(out.checkpoint, policy, header(epoch));
    if (out.on_epoch) out.on_epoch(el);
    logs.push_back(el);
  }
  return logs;
}

}  // namespace udc
