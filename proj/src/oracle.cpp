#include "graphdpo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace graphdpo::oracle {
namespace {

double plain_log_sum_exp(const std::vector<double>& v) {
  const double hi = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

void check(std::span<const double> scores, const DenseAdjacency& adj) {
  if (adj.cells.size() != adj.num_nodes * adj.num_nodes || scores.size() != adj.num_nodes)
    throw std::invalid_argument("oracle: score/adjacency size mismatch");
}

}  // namespace

DenseAdjacency adjacency_from_labels(std::span<const double> labels) {
  DenseAdjacency adj{labels.size(), std::vector<std::uint8_t>(labels.size() * labels.size())};
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < labels.size(); ++j)
      adj.cells[i * labels.size() + j] = labels[i] > labels[j] ? 1 : 0;
  return adj;
}

std::vector<double> naive_local_losses(std::span<const double> scores,
                                       const DenseAdjacency& adj) {
  check(scores, adj);
  std::vector<double> out(scores.size(), 0.0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::vector<double> choice{scores[i]};
    for (std::size_t j = 0; j < scores.size(); ++j)
      if (adj.at(i, j)) choice.push_back(scores[j]);
    if (choice.size() > 1) out[i] = -scores[i] + plain_log_sum_exp(choice);
  }
  return out;
}

double naive_dominated_loss(std::span<const double> scores, const DenseAdjacency& adj) {
  const auto local = naive_local_losses(scores, adj);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool dominates = false;
    for (std::size_t j = 0; j < scores.size(); ++j) dominates = dominates || adj.at(i, j);
    if (!dominates) continue;
    sum += local[i];
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

double pl_permutation_nll(std::span<const double> scores, std::span<const std::size_t> order) {
  if (order.size() != scores.size())
    throw std::invalid_argument("oracle: order must list every item exactly once");
  std::vector<bool> used(scores.size(), false);
  for (std::size_t o : order) {
    if (o >= scores.size() || used[o])
      throw std::invalid_argument("oracle: order is not a permutation");
    used[o] = true;
  }
  double nll = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    std::vector<double> suffix;
    for (std::size_t q = r; q < order.size(); ++q) suffix.push_back(scores[order[q]]);
    nll += plain_log_sum_exp(suffix) - scores[order[r]];
  }
  return nll;
}

double pairwise_dpo_loss(std::span<const double> scores, const DenseAdjacency& adj) {
  check(scores, adj);
  double sum = 0.0;
  std::size_t edges = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (!adj.at(i, j)) continue;
      sum += std::log(1.0 + std::exp(-(scores[i] - scores[j])));
      ++edges;
    }
  if (edges == 0) {
    std::cerr << "warning: pairwise DPO loss on a graph without edges is 0\n";
    return 0.0;
  }
  return sum / static_cast<double>(edges);
}

}  // namespace graphdpo::oracle
