#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "udc/conquer.hpp"
#include "udc/policy.hpp"

namespace udc {

struct TrainConfig {
  ProblemKind kind = ProblemKind::kTsp;
  int n_min = 20;            // instance sizes are drawn uniformly from [n_min, n_max]
  int n_max = 60;
  int n = 10;                // sub-problem size
  int alpha = 8;
  int beta = 8;
  int epochs = 1;
  int epoch_size = 32;       // instances per epoch
  int batch = 1;             // instances per Adam step
  double lr_divide = 1e-3;
  double lr_conquer = 1e-3;
  std::uint64_t seed = 0;
  bool two_sided = true;
  std::optional<bool> dcr;   // Reunion step; default on except KP
  int T = 1;
  int k = 0;                 // 0 = default_k(N)
  bool train_divide = true;
  bool train_conquer = true;
  AgnnConfig agnn;
  ConquerConfig conquer;
  GenerateParams gen;

  bool dcr_enabled() const { return dcr.value_or(kind != ProblemKind::kKp); }
};

nlohmann::json to_json(const TrainConfig& c);
void validate(const TrainConfig& c);

/// Mean-subtracted costs (smaller is better); they sum to zero.
std::vector<double> advantages(const std::vector<double>& costs);

/// (1/alpha) sum_i (c_i - mean c) log pi_i, advantages held constant.
nn::Var loss_dividing(nn::Tape& t, const std::vector<nn::Var>& log_probs, const std::vector<double>& costs);

struct ConquerGroup {
  std::vector<nn::Var> log_probs;  // beta rollouts of one sub-problem
  std::vector<double> costs;
};

/// sum_groups sum_b (c_b - mean c) log pi_b / (alpha * beta * windows).
nn::Var loss_conquering(nn::Tape& t, const std::vector<ConquerGroup>& groups, int alpha, int beta,
                        int windows);

/// Everything needed to re-evaluate the surrogate losses for fixed choices.
struct DcrRecord {
  int alpha = 0;
  int T = 1;
  int k = 0;
  std::uint64_t decode_seed = 0;
  std::vector<std::vector<int>> divide_actions;
  std::vector<double> divide_costs;
  struct Sub {
    SubProblem sp;
    std::vector<std::vector<int>> actions;
    std::vector<double> costs;
  };
  std::vector<Sub> subs;
  int beta = 0;
  bool two_sided = false;
  int windows = 1;
};

struct DcrMetrics {
  double f_x0 = 0, f_x1 = 0, f_x2 = 0;  // mean raw objectives over the alpha rollouts
  double loss_d = 0, loss_c = 0;
  bool reunion = false;
  int subproblems = 0;
};

struct DcrStep {
  nn::Gradients grad_d;
  nn::Gradients grad_c;
  DcrMetrics metrics;
  std::vector<nn::BnBatchStats> bn_stats;
  DcrRecord record;
};

/// One Divide-Conquer-Reunion pass on one instance (no parameter update).
DcrStep dcr_step(const Instance& inst, const Policy& policy, const TrainConfig& cfg, std::uint64_t seed);

/// Surrogate losses re-evaluated with the recorded choices and advantages.
struct Surrogates {
  double loss_d = 0;
  double loss_c = 0;
};
Surrogates replay_surrogates(const Instance& inst, const Policy& policy, const DcrRecord& rec);

struct EpochLog {
  int epoch = 0;
  double mean_f_x0 = 0, mean_f_x1 = 0, mean_f_x2 = 0;
  double grad_norm_d = 0, grad_norm_c = 0;
  double wall_ms = 0;
};

std::string csv_header();
std::string csv_row(const EpochLog& e);

struct TrainOutputs {
  std::string checkpoint;  // written atomically after every epoch (empty: skip)
  std::string log_csv;     // empty: skip
  std::function<void(const EpochLog&)> on_epoch;
};

/// Runs the DCR training loop on `policy` in place and returns the epoch log.
std::vector<EpochLog> train(Policy& policy, const TrainConfig& cfg, const TrainOutputs& out = {});

}  // namespace udc
