#pragma once

// Brute-force reference evaluations. Nothing here includes or calls the
// optimized objective code: graphs are passed as dense 0/1 adjacency
// matrices and every quantity is recomputed from first principles.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace graphdpo::oracle {

/// Row-major K x K, adjacency[i*K + j] != 0 means i is preferred to j.
struct DenseAdjacency {
  std::size_t num_nodes = 0;
  std::vector<std::uint8_t> cells;

  bool at(std::size_t i, std::size_t j) const { return cells[i * num_nodes + j] != 0; }
};

/// A(i,j) = label_i > label_j, built by comparing every pair.
DenseAdjacency adjacency_from_labels(std::span<const double> labels);

/// Mean over nodes with a nonempty dominated set of
/// -s_i + log sum_{k in {i} + N-(i)} exp(s_k); 0 when no node dominates.
double naive_dominated_loss(std::span<const double> scores, const DenseAdjacency& adj);

/// Per-node local losses (0 for nodes that dominate nothing).
std::vector<double> naive_local_losses(std::span<const double> scores,
                                       const DenseAdjacency& adj);

/// Negative log Plackett-Luce likelihood of `order` (best first) over nested
/// suffix sets. Throws std::invalid_argument if `order` is not a permutation.
double pl_permutation_nll(std::span<const double> scores, std::span<const std::size_t> order);

/// Mean over edges of -log sigmoid(s_i - s_j). Returns 0 and warns on stderr
/// when the graph has no edges.
double pairwise_dpo_loss(std::span<const double> scores, const DenseAdjacency& adj);

}  // namespace graphdpo::oracle
