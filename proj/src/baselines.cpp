#include "graphdpo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "graphdpo/errors.hpp"
#include "graphdpo/numeric.hpp"

namespace graphdpo {

ObjectiveValue pairwise_dpo(std::span<const double> scores, const PreferenceGraph& graph) {
  if (scores.size() != graph.num_nodes())
    throw InvalidInput("score count does not match graph size");
  ObjectiveValue out{0.0, std::vector<double>(scores.size(), 0.0)};
  const std::size_t edges = graph.layered_edge_count();
  if (edges == 0) return out;
  const double w = 1.0 / static_cast<double>(edges);
  for (std::size_t g = 0; g < graph.num_classes(); ++g)
    for (std::size_t h = g + 1; h < graph.num_classes(); ++h)
      for (NodeIndex i : graph.class_members(g))
        for (NodeIndex j : graph.class_members(h)) {
          const double margin = scores[i] - scores[j];
          out.loss += w * neg_log_sigmoid(margin);
          const double pull = w * sigmoid(-margin);
          out.grad[i] -= pull;
          out.grad[j] += pull;
        }
  return out;
}

ObjectiveValue pro_listmle(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw InvalidInput("scores and labels differ in length");
  if (scores.size() < 2) throw InvalidInput("list-MLE needs at least two responses");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] > labels[b]; });

  // suffix[r] = log-sum-exp of scores at ranks r..K-1.
  const std::size_t k = order.size();
  std::vector<double> suffix(k + 1, kNegInf);
  for (std::size_t r = k; r-- > 0;) suffix[r] = log_add_exp(suffix[r + 1], scores[order[r]]);

  ObjectiveValue out{0.0, std::vector<double>(k, 0.0)};
  for (std::size_t r = 0; r < k; ++r) out.loss += suffix[r] - scores[order[r]];

  // d/ds_{o(q)} = -1 + sum_{r <= q} exp(s_{o(q)} - suffix[r]).
  double inv_mass = kNegInf;  // log sum_{r<=q} exp(-suffix[r])
  for (std::size_t q = 0; q < k; ++q) {
    inv_mass = log_add_exp(inv_mass, -suffix[q]);
    out.grad[order[q]] = std::exp(scores[order[q]] + inv_mass) - 1.0;
  }
  return out;
}

ObjectiveValue multi_negative(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw InvalidInput("scores and labels differ in length");
  if (labels.empty()) throw InvalidInput("multi-negative loss needs responses");
  const auto [lo_it, hi_it] = std::minmax_element(labels.begin(), labels.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  for (double l : labels)
    if (l != lo && l != hi)
      throw InvalidInput("multi-negative loss needs exactly two preference classes");
  if (lo == hi) throw InvalidInput("multi-negative loss needs exactly two preference classes");

  double neg = kNegInf;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == lo) neg = log_add_exp(neg, scores[i]);
    else ++positives;
  }
  const double w = 1.0 / static_cast<double>(positives);

  ObjectiveValue out{0.0, std::vector<double>(scores.size(), 0.0)};
  double neg_weight = 0.0;  // sum over positives of 1 / Z_i, scaled later by exp(s_j)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == lo) continue;
    const double z = log_add_exp(scores[i], neg);
    out.loss += w * (z - scores[i]);
    out.grad[i] += w * (std::exp(scores[i] - z) - 1.0);
    neg_weight += w * std::exp(-(z - neg));
  }
  // Every negative j sees sum_i w * exp(s_j - z_i) = neg_weight * exp(s_j - neg).
  for (std::size_t j = 0; j < labels.size(); ++j)
    if (labels[j] == lo) out.grad[j] = neg_weight * std::exp(scores[j] - neg);
  return out;
}

}  // namespace graphdpo
