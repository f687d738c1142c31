#include <algorithm>
#include <cmath>

#include "udc/conquer.hpp"

namespace udc {

using nn::Matrix;
using nn::Tape;
using nn::Var;

nlohmann::json to_json(const ConquerConfig& cfg) { return {{"width", cfg.width}}; }

ConquerConfig conquer_config_from_json(const nlohmann::json& j) {
  ConquerConfig cfg;
  cfg.width = j.value("width", cfg.width);
  return cfg;
}

namespace {
constexpr double kLogitClip = 10.0;
}

ConquerModel::ConquerModel(ProblemKind kind, ConquerConfig cfg, std::uint64_t seed) : kind_(kind), cfg_(cfg) {
  if (cfg.width < 2) throw Error("invalid_config", "conquering width must be >= 2");
  Rng rng(derive_seed(seed, 0xc0u));
  const int d = cfg.width;
  store_.add("emb/W1", nn::glorot(kConquerNodeFeatures, d, rng));
  store_.add("emb/b1", Matrix(1, d));
  store_.add("emb/W2", nn::glorot(d, d, rng));
  store_.add("emb/b2", Matrix(1, d));
  store_.add("query/W", nn::glorot(3 * d + kConquerContext, d, rng));
  store_.add("key/W", nn::glorot(d, d, rng));
  store_.add("key/via", Matrix(1, d));
  store_.add("omega", Matrix(1, kConquerPhi));
}

void ConquerModel::zero_parameters() {
  for (int i = 0; i < store_.size(); ++i) {
    for (double& x : store_.at(i).value.data) x = 0.0;
  }
}

ConquerModel::Encoded ConquerModel::encode(Tape& t, const SubConstruction& c) const {
  Encoded enc;
  Var x = t.constant(c.node_features());
  Var hidden = nn::silu(t, nn::add_row(t, nn::matmul(t, x, t.parameter(store_, "emb/W1")),
                                       t.parameter(store_, "emb/b1")));
  enc.h = nn::add_row(t, nn::matmul(t, hidden, t.parameter(store_, "emb/W2")), t.parameter(store_, "emb/b2"));
  enc.keys = nn::matmul(t, enc.h, t.parameter(store_, "key/W"));
  if (kind_ == ProblemKind::kCvrp) enc.keys_via = nn::add_row(t, enc.keys, t.parameter(store_, "key/via"));
  enc.mean = nn::mean_rows(t, enc.h);
  return enc;
}

Var ConquerModel::scores(Tape& t, const Encoded& enc, const SubConstruction& c) const {
  const int d = cfg_.width;
  const bool routed = is_routing(kind_);
  Var cur = routed ? nn::gather_rows(t, enc.h, {c.current()}) : t.constant(Matrix(1, d));
  Var end = routed ? nn::gather_rows(t, enc.h, {c.end_node()}) : t.constant(Matrix(1, d));
  const auto ctx = c.context();
  Var q_in = nn::concat_cols(t, {cur, end, enc.mean, t.constant(Matrix(1, kConquerContext, ctx))});
  Var q = nn::matmul(t, q_in, t.parameter(store_, "query/W"));
  Var s = nn::matmul_nt(t, q, enc.keys);
  if (enc.keys_via.valid()) s = nn::concat_cols(t, {s, nn::matmul_nt(t, q, enc.keys_via)});
  s = nn::scale(t, nn::tanh(t, nn::scale(t, s, 1.0 / std::sqrt(static_cast<double>(d)))), kLogitClip);
  const int actions = c.num_actions();
  Matrix phi(actions, kConquerPhi);
  if (routed) {
    for (int a = 0; a < actions; ++a) {
      const auto f = c.phi(a);
      std::copy(f.begin(), f.end(), phi.row(a));
    }
  }
  return nn::add(t, s, nn::matmul_nt(t, t.parameter(store_, "omega"), t.constant(std::move(phi))));
}

namespace {

ConquerRollout run_one(Tape& t, const SubProblem& sp, const ConquerModel& model, bool reversed,
                       DecodeMode mode, Rng& rng, const std::vector<int>* forced,
                       ConquerModel::Encoded* cached) {
  ConquerRollout ro;
  ro.reversed = reversed;
  SubConstruction c(sp, reversed);
  if (!cached->h.valid()) *cached = model.encode(t, c);
  const bool record = t.requires_grad();
  std::vector<Var> steps;
  std::size_t fpos = 0;
  std::vector<int> entries;
  while (!c.done()) {
    const auto mask = c.mask();
    entries.clear();
    for (int a = 0; a < c.num_actions(); ++a) {
      if (mask[a]) entries.push_back(a);
    }
    if (entries.empty()) throw Error("no_feasible_action", "sub-problem dead end");
    int chosen = 0;
    if (entries.size() > 1 || forced) {
      Var s = model.scores(t, *cached, c);
      const Matrix& sv = t.value(s);
      if (forced) {
        if (fpos >= forced->size()) throw Error("invalid_argument", "forced sub-sequence too short");
        const int a = (*forced)[fpos++];
        auto it = std::find(entries.begin(), entries.end(), a);
        if (it == entries.end()) throw Error("illegal_action", "forced sub-action is masked");
        chosen = static_cast<int>(it - entries.begin());
      } else if (mode == DecodeMode::kGreedy) {
        for (std::size_t k = 1; k < entries.size(); ++k) {
          if (sv.data[entries[k]] > sv.data[entries[chosen]]) chosen = static_cast<int>(k);
        }
      } else {
        const auto p = nn::softmax_probs(sv, entries, 0.0, 0);
        double u = rng.uniform();
        chosen = static_cast<int>(entries.size()) - 1;
        for (std::size_t k = 0; k < entries.size(); ++k) {
          if (u < p[k]) {
            chosen = static_cast<int>(k);
            break;
          }
          u -= p[k];
        }
      }
      const auto p = nn::softmax_probs(sv, entries, 0.0, 0);
      ro.log_prob_value += std::log(p[chosen]);
      if (record && t.needs_grad(s)) steps.push_back(nn::log_softmax_pick(t, s, entries, 0.0, 0, chosen));
    }
    c.apply(entries[chosen]);
    ro.actions.push_back(entries[chosen]);
  }
  ro.solution = c.finish();
  ro.log_prob = steps.empty() ? t.scalar(ro.log_prob_value)
                              : nn::weighted_sum(t, steps, std::vector<double>(steps.size(), 1.0));
  return ro;
}

}  // namespace

std::vector<ConquerRollout> conquer_neural(Tape& t, const SubProblem& sp, const ConquerModel& model,
                                           const ConquerOptions& opt) {
  if (opt.beta < 1) throw Error("invalid_argument", "beta must be >= 1");
  if (sp.kind != model.kind()) throw Error("kind_mismatch", "conquering model kind differs");
  const bool two = opt.two_sided && supports_two_sided(sp.kind);
  if (two && opt.beta % 2 != 0) throw Error("invalid_argument", "two-sided sampling needs an even beta");
  if (opt.forced && static_cast<int>(opt.forced->size()) != opt.beta) {
    throw Error("invalid_argument", "forced sub-sequences must match beta");
  }
  std::vector<ConquerRollout> out;
  out.reserve(opt.beta);
  ConquerModel::Encoded enc[2];
  for (int b = 0; b < opt.beta; ++b) {
    const bool reversed = two && b >= opt.beta / 2;
    Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(b)));
    try {
      out.push_back(run_one(t, sp, model, reversed, opt.mode, rng, opt.forced ? &(*opt.forced)[b] : nullptr,
                            &enc[reversed ? 1 : 0]));
    } catch (const Error& e) {
      if (e.code() != "no_feasible_action" || opt.forced) throw;
      ConquerRollout ro;
      ro.reversed = reversed;
      ro.solution = sp.original;
      ro.solution.fallback = true;
      ro.log_prob = t.scalar(0.0);
      out.push_back(std::move(ro));
    }
  }
  return out;
}

}  // namespace udc
