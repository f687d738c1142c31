#include "udc/graph.hpp"

#include <algorithm>
#include <numeric>

namespace udc {

int node_feature_width(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kTsp: return 2;
    case ProblemKind::kCvrp: return 4;
    case ProblemKind::kOp: return 4;
    case ProblemKind::kPctsp: return 5;
    case ProblemKind::kKp: return 3;
    case ProblemKind::kMis: return 2;
  }
  return 0;
}

int edge_feature_width(ProblemKind) { return 1; }

int default_k(int n) { return std::max(1, std::min(20, n - 1)); }

int SparseGraph::find_edge(int u, int v) const {
  for (int e = row_offsets[u]; e < row_offsets[u + 1]; ++e) {
    if (dst[e] == v) return e;
  }
  return -1;
}

double kp_affinity(const Instance& inst, int i, int j) {
  return (inst.values[i] + inst.values[j]) / (inst.weights[i] + inst.weights[j]);
}

double kp_edge_weight(const Instance& inst, int i, int j, double row_max) {
  return 1.0 - kp_affinity(inst, i, j) / row_max;
}

namespace {

void node_features(const Instance& inst, SparseGraph& g) {
  const int n = inst.n;
  const int w = g.node_dim;
  g.node_features.assign(static_cast<std::size_t>(n) * w, 0.0);
  auto at = [&](int i, int c) -> double& { return g.node_features[static_cast<std::size_t>(i) * w + c]; };
  switch (inst.kind) {
    case ProblemKind::kTsp:
      for (int i = 0; i < n; ++i) {
        at(i, 0) = inst.coords[i].x;
        at(i, 1) = inst.coords[i].y;
      }
      break;
    case ProblemKind::kCvrp:
      for (int i = 0; i < n; ++i) {
        at(i, 0) = inst.coords[i].x;
        at(i, 1) = inst.coords[i].y;
        at(i, 2) = inst.demands[i] / inst.capacity;
        at(i, 3) = i == 0 ? 1.0 : 0.0;
      }
      break;
    case ProblemKind::kOp:
      for (int i = 0; i < n; ++i) {
        at(i, 0) = inst.coords[i].x;
        at(i, 1) = inst.coords[i].y;
        at(i, 2) = inst.prizes[i];
        at(i, 3) = i == 0 ? 1.0 : 0.0;
      }
      break;
    case ProblemKind::kPctsp: {
      const double prize_scale = n / 4.0;
      const double penalty_scale = n / (3.0 * pctsp_penalty_factor(n));
      for (int i = 0; i < n; ++i) {
        at(i, 0) = inst.coords[i].x;
        at(i, 1) = inst.coords[i].y;
        at(i, 2) = inst.prizes[i] * prize_scale;
        at(i, 3) = inst.penalties[i] * penalty_scale;
        at(i, 4) = i == 0 ? 1.0 : 0.0;
      }
      break;
    }
    case ProblemKind::kKp: {
      const double total_w = std::accumulate(inst.weights.begin(), inst.weights.end(), 0.0);
      const double fill = total_w > 0 ? std::min(1.0, inst.capacity / total_w) : 1.0;
      for (int i = 0; i < n; ++i) {
        at(i, 0) = inst.values[i];
        at(i, 1) = inst.weights[i];
        at(i, 2) = fill;
      }
      break;
    }
    case ProblemKind::kMis: {
      std::size_t max_deg = 1;
      for (const auto& nb : inst.adjacency) max_deg = std::max(max_deg, nb.size());
      for (int i = 0; i < n; ++i) {
        at(i, 0) = static_cast<double>(inst.adjacency[i].size()) / static_cast<double>(max_deg);
        at(i, 1) = 1.0;
      }
      break;
    }
  }
}

}  // namespace

SparseGraph build_sparse_graph(const Instance& inst, int k) {
  SparseGraph g;
  g.kind = inst.kind;
  g.n_nodes = inst.n;
  g.node_dim = node_feature_width(inst.kind);
  g.edge_dim = edge_feature_width(inst.kind);
  node_features(inst, g);
  const int n = inst.n;
  g.row_offsets.assign(n + 1, 0);

  if (inst.kind == ProblemKind::kMis) {
    for (int u = 0; u < n; ++u) {
      for (int v : inst.adjacency[u]) {
        g.src.push_back(u);
        g.dst.push_back(v);
        g.edge_features.push_back(1.0);
      }
      g.row_offsets[u + 1] = static_cast<int>(g.src.size());
    }
    g.k = 0;
    return g;
  }

  if (k < 1) throw Error("invalid_argument", "K must be >= 1");
  if (k >= n) {
    g.warnings.push_back("K=" + std::to_string(k) + " clamped to " + std::to_string(n - 1));
    k = n - 1;
  }
  g.k = k;
  g.src.reserve(static_cast<std::size_t>(n) * k);
  std::vector<std::pair<double, int>> cand;
  cand.reserve(n);
  for (int i = 0; i < n; ++i) {
    cand.clear();
    if (inst.kind == ProblemKind::kKp) {
      double row_max = 0;
      for (int j = 0; j < n; ++j) {
        if (j != i) row_max = std::max(row_max, kp_affinity(inst, i, j));
      }
      for (int j = 0; j < n; ++j) {
        if (j != i) cand.emplace_back(kp_edge_weight(inst, i, j, row_max), j);
      }
    } else {
      for (int j = 0; j < n; ++j) {
        if (j != i) cand.emplace_back(inst.dist(i, j), j);
      }
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int r = 0; r < k; ++r) {
      g.src.push_back(i);
      g.dst.push_back(cand[r].second);
      g.edge_features.push_back(cand[r].first);
    }
    g.row_offsets[i + 1] = static_cast<int>(g.src.size());
  }
  return g;
}

}  // namespace udc
