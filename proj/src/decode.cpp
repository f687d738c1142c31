#include <algorithm>
#include <cmath>
#include <functional>

#include "udc/divide.hpp"

namespace udc {

using nn::Tape;
using nn::Var;

std::string to_string(DecodeMode mode) { return mode == DecodeMode::kGreedy ? "greedy" : "sample"; }

DecodeMode parse_decode_mode(const std::string& s) {
  if (s == "greedy") return DecodeMode::kGreedy;
  if (s == "sample") return DecodeMode::kSample;
  throw Error("invalid_argument", "decode mode must be sample or greedy, got " + s);
}

namespace {

using Regenerate = std::function<Var(const std::vector<int>& committed)>;

struct Candidates {
  std::vector<int> entries;   // indices into the heatmap rows
  std::vector<int> targets;   // node for each entry
  std::vector<int> fallback;  // feasible nodes without an edge (constant logit)
};

Candidates candidates(const SparseGraph& g, const Instance& inst, const Construction& c,
                      const std::vector<std::uint8_t>& mask, std::vector<std::uint8_t>& scratch) {
  Candidates out;
  if (inst.kind == ProblemKind::kMis) {
    for (int v = 0; v < inst.n; ++v) {
      if (mask[v]) {
        out.entries.push_back(v);
        out.targets.push_back(v);
      }
    }
    return out;
  }
  const int cur = c.current();
  for (int e = g.row_offsets[cur]; e < g.row_offsets[cur + 1]; ++e) {
    if (mask[g.dst[e]]) {
      out.entries.push_back(e);
      out.targets.push_back(g.dst[e]);
      scratch[g.dst[e]] = 1;
    }
  }
  for (int v = 0; v < inst.n; ++v) {
    if (mask[v] && !scratch[v]) out.fallback.push_back(v);
  }
  for (int v : out.targets) scratch[v] = 0;
  return out;
}

// Chosen index into entries, or -1 for the fallback group; `node` receives the action.
int choose(const Candidates& cand, const nn::Matrix& scores, DecodeMode mode, Rng& rng, int& node) {
  if (mode == DecodeMode::kGreedy) {
    int best = -1;
    for (std::size_t k = 0; k < cand.entries.size(); ++k) {
      if (best < 0 || scores.data[cand.entries[k]] > scores.data[cand.entries[best]]) {
        best = static_cast<int>(k);
      }
    }
    if (best >= 0 && (cand.fallback.empty() || scores.data[cand.entries[best]] >= kAbsentEdgeLogit)) {
      node = cand.targets[best];
      return best;
    }
    node = cand.fallback.front();
    return -1;
  }
  const auto p = nn::softmax_probs(scores, cand.entries, kAbsentEdgeLogit,
                                   static_cast<int>(cand.fallback.size()));
  double u = rng.uniform();
  for (std::size_t k = 0; k < cand.entries.size(); ++k) {
    if (u < p[k]) {
      node = cand.targets[k];
      return static_cast<int>(k);
    }
    u -= p[k];
  }
  if (cand.fallback.empty()) {
    // Rounding left a sliver of mass; take the last real entry.
    node = cand.targets.back();
    return static_cast<int>(cand.entries.size()) - 1;
  }
  node = cand.fallback[rng.below(static_cast<int>(cand.fallback.size()))];
  return -1;
}

double step_log_prob(const Candidates& cand, const nn::Matrix& scores, int chosen) {
  const auto p = nn::softmax_probs(scores, cand.entries, kAbsentEdgeLogit,
                                   static_cast<int>(cand.fallback.size()));
  if (chosen >= 0) return std::log(p[chosen]);
  return std::log(p.back() / static_cast<double>(cand.fallback.size()));
}

std::vector<Rollout> decode_core(Tape& t, Var first, const SparseGraph& g, const Instance& inst,
                                 const DecodeOptions& opt, const Regenerate& regen) {
  if (opt.alpha < 1) throw Error("invalid_argument", "alpha must be >= 1");
  if (g.n_nodes != inst.n || g.kind != inst.kind) {
    throw Error("shape_mismatch", "graph does not belong to the instance");
  }
  if (opt.forced != nullptr && static_cast<int>(opt.forced->size()) != opt.alpha) {
    throw Error("invalid_argument", "forced sequences must match alpha");
  }
  const int n = inst.n;
  const int T = std::clamp(opt.T, 1, std::max(1, n));
  const int interval = std::max(1, n / T);
  const bool record = t.requires_grad();
  std::vector<std::uint8_t> scratch(n, 0);
  std::vector<Rollout> out;
  out.reserve(opt.alpha);

  for (int r = 0; r < opt.alpha; ++r) {
    Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(r)));
    const std::vector<int>* forced = opt.forced ? &(*opt.forced)[r] : nullptr;
    std::size_t fpos = 0;
    auto next_forced = [&]() {
      if (fpos >= forced->size()) throw Error("invalid_argument", "forced sequence too short");
      return (*forced)[fpos++];
    };

    Rollout ro;
    Construction c(inst);
    std::vector<Var> steps;
    double start_lp = 0;

    if (has_depot(inst.kind)) {
      c.start(0);
      ro.actions.push_back(0);
      if (forced) next_forced();
    } else if (inst.kind != ProblemKind::kMis) {
      std::vector<int> pool;
      for (int v = 0; v < n; ++v) {
        if (inst.kind != ProblemKind::kKp || inst.weights[v] <= inst.capacity + kFeasibilityTol) {
          pool.push_back(v);
        }
      }
      if (pool.empty()) {
        ro.solution.subset = {};
        refresh(inst, ro.solution);
        ro.log_prob = t.scalar(0.0);
        out.push_back(std::move(ro));
        continue;
      }
      int s;
      if (forced) {
        s = next_forced();
      } else if (opt.mode == DecodeMode::kGreedy) {
        s = pool[r % pool.size()];
      } else {
        s = pool[rng.below(static_cast<int>(pool.size()))];
      }
      start_lp = -std::log(static_cast<double>(pool.size()));
      c.start(s);
      ro.actions.push_back(s);
      ro.step_log_probs.push_back(start_lp);
    }

    Var heat = first;
    int revisits = 0;
    int last_regen = -1;
    while (!c.done()) {
      const int committed = c.committed();
      if (regen && T > 1 && committed > 0 && committed % interval == 0 && revisits < T - 1 &&
          committed != last_regen) {
        heat = regen(c.sequence());
        ++revisits;
        last_regen = committed;
        ro.revisit_steps.push_back(committed + 1);
      }
      const auto mask = feasible_actions(inst, c);
      const Candidates cand = candidates(g, inst, c, mask, scratch);
      const nn::Matrix& scores = t.value(heat);
      int node = -1;
      int chosen;
      if (forced) {
        node = next_forced();
        auto it = std::find(cand.targets.begin(), cand.targets.end(), node);
        if (it != cand.targets.end()) {
          chosen = static_cast<int>(it - cand.targets.begin());
        } else if (std::find(cand.fallback.begin(), cand.fallback.end(), node) != cand.fallback.end()) {
          chosen = -1;
        } else {
          throw Error("illegal_action", "forced action " + std::to_string(node) + " is masked");
        }
      } else {
        chosen = choose(cand, scores, opt.mode, rng, node);
      }
      const double lp = step_log_prob(cand, scores, chosen);
      ro.step_log_probs.push_back(lp);
      ro.log_prob_value += lp;
      if (record && t.needs_grad(heat)) {
        steps.push_back(nn::log_softmax_pick(t, heat, cand.entries, kAbsentEdgeLogit,
                                             static_cast<int>(cand.fallback.size()), chosen));
      }
      c.apply(node);
      ro.actions.push_back(node);
    }
    ro.log_prob_value += start_lp;
    ro.solution = c.finish();
    if (!steps.empty()) {
      steps.push_back(t.scalar(start_lp));
      ro.log_prob = nn::weighted_sum(t, steps, std::vector<double>(steps.size(), 1.0));
    } else {
      ro.log_prob = t.scalar(ro.log_prob_value);
    }
    out.push_back(std::move(ro));
  }
  return out;
}

}  // namespace

std::vector<Rollout> decode_initial(Tape& t, Var heatmap, const SparseGraph& g, const Instance& inst,
                                    const DecodeOptions& opt) {
  return decode_core(t, heatmap, g, inst, opt, nullptr);
}

std::vector<Rollout> decode_t_revisit(Tape& t, const DividingModel& model,
                                      const DividingModel::Embeddings& emb, const SparseGraph& g,
                                      const Instance& inst, const DecodeOptions& opt) {
  if (opt.T < 1) throw Error("invalid_argument", "T must be >= 1");
  Var first = model.heatmap(t, emb, model.summary(t, emb, {}));
  Regenerate regen = [&](const std::vector<int>& committed) {
    return model.heatmap(t, emb, model.summary(t, emb, committed));
  };
  return decode_core(t, first, g, inst, opt, regen);
}

}  // namespace udc
