#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "udc/graph.hpp"
#include "udc/nnet/params.hpp"
#include "udc/nnet/tape.hpp"
#include "udc/problems.hpp"

namespace udc {

struct AgnnConfig {
  int layers = 4;
  int width = 32;
};

nlohmann::json to_json(const AgnnConfig& cfg);
AgnnConfig agnn_config_from_json(const nlohmann::json& j);

/// Logit given to candidates that have no edge from the current node.
inline constexpr double kAbsentEdgeLogit = -10.0;
/// Window of committed nodes averaged into the partial-solution summary.
inline constexpr int kSummaryWindow = 10;

/// Anisotropic GNN over a SparseGraph plus the heatmap head.
///
///   h' = h + SiLU(BN(h U + mean_{j in N(i)} sigmoid(e_ij) * (h_j V)))
///   e' = e + SiLU(BN(e P + h_i Q + h_j R))
///   score_ij = w2 . SiLU((e_ij W1 + s S) + b1) + b2
///
/// where s is the partial-solution summary (zero for the first heatmap). MIS
/// applies the head to node embeddings instead of edges.
class DividingModel {
 public:
  DividingModel(ProblemKind kind, AgnnConfig cfg, std::uint64_t seed);

  ProblemKind kind() const { return kind_; }
  const AgnnConfig& config() const { return cfg_; }
  nn::ParamStore& store() { return store_; }
  const nn::ParamStore& store() const { return store_; }

  struct Embeddings {
    nn::Var h;  // n x d
    nn::Var e;  // |E| x d
    nn::Var head_base;  // rows x d: (e or h) W1 + b1, reused across revisits
    std::vector<nn::BnBatchStats> stats;  // per BN layer, train mode only
  };

  Embeddings forward(nn::Tape& t, const SparseGraph& g, nn::BnMode mode) const;

  /// Scores per edge (|E| x 1), or per node for MIS.
  nn::Var heatmap(nn::Tape& t, const Embeddings& emb, nn::Var summary) const;
  /// 1 x 2d summary of a committed prefix; zeros when it is empty.
  nn::Var summary(nn::Tape& t, const Embeddings& emb, const std::vector<int>& committed) const;

  /// Applies the running-statistics update from one training forward pass.
  void update_running_stats(const std::vector<nn::BnBatchStats>& stats);

  /// Zeroes every message-passing weight (U, V, P, Q, R).
  void zero_message_weights();

 private:
  nn::Var bn(nn::Tape& t, nn::Var x, const std::string& prefix, nn::BnMode mode,
             std::vector<nn::BnBatchStats>& stats) const;

  ProblemKind kind_;
  AgnnConfig cfg_;
  nn::ParamStore store_;
};

enum class DecodeMode { kSample, kGreedy };

std::string to_string(DecodeMode mode);
DecodeMode parse_decode_mode(const std::string& s);

struct DecodeOptions {
  DecodeMode mode = DecodeMode::kSample;
  int alpha = 1;
  int T = 1;
  std::uint64_t seed = 0;
  /// Replays recorded action sequences (one per rollout) instead of choosing.
  const std::vector<std::vector<int>>* forced = nullptr;
};

struct Rollout {
  Solution solution;
  std::vector<int> actions;     // start node first (if any), then each choice
  nn::Var log_prob;             // on the tape when it records gradients
  double log_prob_value = 0;
  std::vector<double> step_log_probs;
  std::vector<int> revisit_steps;  // 1-based decode steps that used a new heatmap
};

/// Decodes from a fixed heatmap (|E| x 1, or n x 1 for MIS).
std::vector<Rollout> decode_initial(nn::Tape& t, nn::Var heatmap, const SparseGraph& g,
                                    const Instance& inst, const DecodeOptions& opt);

/// Decodes with the heatmap regenerated every floor(N/T) committed nodes.
/// T == 1 is exactly decode_initial on the zero-summary heatmap.
std::vector<Rollout> decode_t_revisit(nn::Tape& t, const DividingModel& model,
                                      const DividingModel::Embeddings& emb, const SparseGraph& g,
                                      const Instance& inst, const DecodeOptions& opt);

enum class Heuristic { kRandom, kNearestGreedy, kRandomInsertion };

std::string to_string(Heuristic h);
Heuristic parse_heuristic(const std::string& s);

/// Heuristic initial solutions. `random` works for every kind; the other two
/// are routing-only.
Solution heuristic_initial(const Instance& inst, Heuristic method, std::uint64_t seed);

}  // namespace udc
