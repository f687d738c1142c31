#include "udc/divide.hpp"

#include <algorithm>

namespace udc {

using nn::Matrix;
using nn::Tape;
using nn::Var;

nlohmann::json to_json(const AgnnConfig& cfg) {
  return {{"layers", cfg.layers}, {"width", cfg.width}};
}

AgnnConfig agnn_config_from_json(const nlohmann::json& j) {
  AgnnConfig cfg;
  cfg.layers = j.value("layers", cfg.layers);
  cfg.width = j.value("width", cfg.width);
  return cfg;
}

namespace {

std::string layer_name(int l, const char* what) { return "l" + std::to_string(l) + "/" + what; }

}  // namespace

DividingModel::DividingModel(ProblemKind kind, AgnnConfig cfg, std::uint64_t seed)
    : kind_(kind), cfg_(cfg) {
  if (cfg.layers < 1 || cfg.width < 2) {
    throw Error("invalid_config", "AGNN needs layers >= 1 and width >= 2");
  }
  Rng rng(derive_seed(seed, 0xd1u));
  const int d = cfg.width;
  store_.add("in/A", nn::glorot(node_feature_width(kind), d, rng));
  store_.add("in/a", Matrix(1, d));
  store_.add("in/B", nn::glorot(edge_feature_width(kind), d, rng));
  store_.add("in/b", Matrix(1, d));
  for (int l = 0; l < cfg.layers; ++l) {
    for (const char* w : {"U", "V", "P", "Q", "R"}) store_.add(layer_name(l, w), nn::glorot(d, d, rng));
    for (const char* b : {"bn_h", "bn_e"}) {
      const std::string p = layer_name(l, b);
      store_.add(p + "/gamma", Matrix(1, d, 1.0));
      store_.add(p + "/beta", Matrix(1, d));
      store_.add(p + "/running_mean", Matrix(1, d), false);
      store_.add(p + "/running_var", Matrix(1, d, 1.0), false);
    }
  }
  store_.add("head/W1", nn::glorot(d, d, rng));
  store_.add("head/b1", Matrix(1, d));
  store_.add("head/S", nn::glorot(2 * d, d, rng));
  store_.add("head/w2", nn::glorot(d, 1, rng));
  store_.add("head/b2", Matrix(1, 1));
}

void DividingModel::zero_message_weights() {
  for (int l = 0; l < cfg_.layers; ++l) {
    for (const char* w : {"U", "V", "P", "Q", "R"}) {
      for (double& x : store_.at(layer_name(l, w)).value.data) x = 0.0;
    }
  }
}

Var DividingModel::bn(Tape& t, Var x, const std::string& prefix, nn::BnMode mode,
                      std::vector<nn::BnBatchStats>& stats) const {
  nn::BnBatchStats s;
  Var out = nn::batch_norm(t, x, t.parameter(store_, prefix + "/gamma"),
                           t.parameter(store_, prefix + "/beta"), mode,
                           store_.value(prefix + "/running_mean"),
                           store_.value(prefix + "/running_var"),
                           mode == nn::BnMode::kTrain ? &s : nullptr);
  stats.push_back(std::move(s));
  return out;
}

DividingModel::Embeddings DividingModel::forward(Tape& t, const SparseGraph& g, nn::BnMode mode) const {
  if (g.kind != kind_ || g.node_dim != node_feature_width(kind_) ||
      g.edge_dim != edge_feature_width(kind_)) {
    throw Error("shape_mismatch", "graph features do not match the " + to_string(kind_) + " model");
  }
  const int n = g.n_nodes;
  const int m = g.n_edges();
  Embeddings emb;
  Var x = t.constant(Matrix(n, g.node_dim, g.node_features));
  Var h = nn::add_row(t, nn::matmul(t, x, t.parameter(store_, "in/A")), t.parameter(store_, "in/a"));
  Var e;
  if (m > 0) {
    Var xe = t.constant(Matrix(m, g.edge_dim, g.edge_features));
    e = nn::add_row(t, nn::matmul(t, xe, t.parameter(store_, "in/B")), t.parameter(store_, "in/b"));
  }
  for (int l = 0; l < cfg_.layers; ++l) {
    Var hu = nn::matmul(t, h, t.parameter(store_, layer_name(l, "U")));
    Var pre_h = hu;
    Var pre_e;
    if (m > 0) {
      Var hv = nn::matmul(t, h, t.parameter(store_, layer_name(l, "V")));
      Var msg = nn::hadamard(t, nn::sigmoid(t, e), nn::gather_rows(t, hv, g.dst));
      pre_h = nn::add(t, hu, nn::scatter_mean_rows(t, msg, g.src, n));
      Var ep = nn::matmul(t, e, t.parameter(store_, layer_name(l, "P")));
      Var hq = nn::gather_rows(t, nn::matmul(t, h, t.parameter(store_, layer_name(l, "Q"))), g.src);
      Var hr = nn::gather_rows(t, nn::matmul(t, h, t.parameter(store_, layer_name(l, "R"))), g.dst);
      pre_e = nn::add(t, nn::add(t, ep, hq), hr);
    }
    Var h_next = nn::add(t, h, nn::silu(t, bn(t, pre_h, layer_name(l, "bn_h"), mode, emb.stats)));
    if (m > 0) {
      e = nn::add(t, e, nn::silu(t, bn(t, pre_e, layer_name(l, "bn_e"), mode, emb.stats)));
    } else {
      emb.stats.emplace_back();
    }
    h = h_next;
  }
  emb.h = h;
  emb.e = e;
  Var rows = kind_ == ProblemKind::kMis ? h : e;
  if (rows.valid()) {
    emb.head_base =
        nn::add_row(t, nn::matmul(t, rows, t.parameter(store_, "head/W1")), t.parameter(store_, "head/b1"));
  }
  return emb;
}

Var DividingModel::summary(Tape& t, const Embeddings& emb, const std::vector<int>& committed) const {
  const int d = cfg_.width;
  if (committed.empty()) return t.constant(Matrix(1, 2 * d));
  const int k = std::min<int>(kSummaryWindow, static_cast<int>(committed.size()));
  std::vector<int> recent(committed.end() - k, committed.end());
  Var mean = nn::mean_rows(t, nn::gather_rows(t, emb.h, recent));
  Var last = nn::gather_rows(t, emb.h, {committed.back()});
  return nn::concat_cols(t, {mean, last});
}

Var DividingModel::heatmap(Tape& t, const Embeddings& emb, Var summary) const {
  if (!emb.head_base.valid()) return t.constant(Matrix(0, 1));
  const Matrix& sv = t.value(summary);
  if (sv.rows != 1 || sv.cols != 2 * cfg_.width) {
    throw Error("shape_mismatch", "summary must be 1 x " + std::to_string(2 * cfg_.width));
  }
  Var ctx = nn::matmul(t, summary, t.parameter(store_, "head/S"));
  Var hidden = nn::silu(t, nn::add_row(t, emb.head_base, ctx));
  return nn::add_row(t, nn::matmul(t, hidden, t.parameter(store_, "head/w2")),
                     t.parameter(store_, "head/b2"));
}

void DividingModel::update_running_stats(const std::vector<nn::BnBatchStats>& stats) {
  const double mom = nn::kBnMomentum;
  std::size_t k = 0;
  for (int l = 0; l < cfg_.layers; ++l) {
    for (const char* b : {"bn_h", "bn_e"}) {
      if (k >= stats.size()) return;
      const nn::BnBatchStats& s = stats[k++];
      if (s.rows == 0) continue;
      const std::string p = layer_name(l, b);
      Matrix& rm = store_.at(p + "/running_mean").value;
      Matrix& rv = store_.at(p + "/running_var").value;
      for (int j = 0; j < rm.cols; ++j) {
        rm.data[j] = nn::round_f32((1 - mom) * rm.data[j] + mom * s.mean[j]);
        rv.data[j] = nn::round_f32((1 - mom) * rv.data[j] + mom * s.var[j]);
      }
    }
  }
}

}  // namespace udc
