#pragma once

#include <span>
#include <vector>

#include "graphdpo/pref_graph.hpp"

namespace graphdpo {

/// Loss value and its gradient with respect to the scores that were passed
/// in. All objectives here depend on score differences only, so the gradient
/// is the same in raw and centered space.
struct ObjectiveValue {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean over all graph edges of -log sigmoid(s_i - s_j); 0 without edges.
ObjectiveValue pairwise_dpo(std::span<const double> scores, const PreferenceGraph& graph);

/// List-MLE (PRO): negative log Plackett-Luce likelihood of the total order
/// obtained by sorting labels descending and breaking ties by ascending
/// response index. Tied responses therefore receive spurious supervision.
ObjectiveValue pro_listmle(std::span<const double> scores, std::span<const double> labels);

/// Mean over positives i of -s_i + log(exp(s_i) + sum_neg exp(s_j)).
/// Labels must form exactly two distinct values; throws InvalidInput otherwise.
ObjectiveValue multi_negative(std::span<const double> scores, std::span<const double> labels);

inline double baseline_pro_listmle(std::span<const double> scores,
                                   std::span<const double> labels) {
  return pro_listmle(scores, labels).loss;
}

inline double baseline_multi_negative(std::span<const double> scores,
                                      std::span<const double> labels) {
  return multi_negative(scores, labels).loss;
}

}  // namespace graphdpo
