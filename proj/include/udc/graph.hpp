#pragma once

#include <string>
#include <vector>

#include "udc/problems.hpp"

namespace udc {

/// Bumped whenever the per-kind node/edge feature layout changes; stored in
/// checkpoints so models reject graphs built with another layout.
inline constexpr int kFeatureLayoutVersion = 1;

int node_feature_width(ProblemKind kind);
int edge_feature_width(ProblemKind kind);

/// Directed sparse graph with edges grouped by source (CSR order).
struct SparseGraph {
  ProblemKind kind = ProblemKind::kTsp;
  int n_nodes = 0;
  int node_dim = 0;
  int edge_dim = 0;
  std::vector<double> node_features;  // n_nodes x node_dim, row-major
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<double> edge_features;  // n_edges x edge_dim
  std::vector<int> row_offsets;       // n_nodes + 1
  int k = 0;                          // neighborhood size actually used
  std::vector<std::string> warnings;

  int n_edges() const { return static_cast<int>(src.size()); }
  /// Edge id of (u -> v) or -1.
  int find_edge(int u, int v) const;
};

/// KNN graph for routing kinds (Euclidean, ties by lower index), KNN on the
/// item-affinity weight for KP, and the instance adjacency (both directions)
/// for MIS. K >= n clamps to n - 1 with a warning.
SparseGraph build_sparse_graph(const Instance& inst, int k);

/// Desk-scale default: min(20, n - 1).
int default_k(int n);

/// KP neighborhood weight 1 - d'(i,j) / max_q d'(i,q), d' = (v_i+v_j)/(w_i+w_j).
double kp_edge_weight(const Instance& inst, int i, int j, double row_max);
double kp_affinity(const Instance& inst, int i, int j);

}  // namespace udc
