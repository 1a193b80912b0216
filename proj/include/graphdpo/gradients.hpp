#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "graphdpo/objective.hpp"
#include "graphdpo/pref_graph.hpp"

namespace graphdpo {

/// Partial derivatives of a loss with respect to one prompt's scores.
///
/// `scores` is the raw-score gradient (what a trainer back-propagates);
/// `centered` is the same loss differentiated in centered-score space and is
/// kept as a diagnostic. The two are related by the centering Jacobian
/// d s~_i / d s_j = delta_ij - 1/K, which also couples the ground-truth score.
struct GradientVector {
  std::vector<double> scores;
  std::vector<double> centered;
  std::optional<double> gt;
  /// d loss / d (policy token log-prob), one constant per response; empty
  /// when no KL term is present.
  std::vector<double> policy_token;
};

GradientVector grad_graph_loss(const ScoreSet& scores, const PreferenceGraph& graph);

GradientVector grad_anchor_loss(const ScoreSet& scores, const PreferenceGraph& graph,
                                std::size_t worse_from_class);

/// Gradient of total_loss at the given weights. `kl_token_counts` holds T_i for
/// every response; pass an empty span when the KL term is absent.
GradientVector grad_total(const ScoreSet& scores, const PreferenceGraph& graph,
                          std::optional<std::size_t> anchor_from_class,
                          std::span<const std::size_t> kl_token_counts,
                          LossWeights weights);

/// Maps a centered-space gradient (plus optional gt component) to raw space.
std::vector<double> centered_to_raw(std::span<const double> centered,
                                    std::optional<double> gt_centered_grad);

/// For every node j: sum over its ancestors i of p_i(j), the softmax weight of
/// j inside i's choice set. Uses the unnormalized sum over nodes.
std::vector<double> node_influence(const ScoreSet& scores, const PreferenceGraph& graph);

using ScalarFunction = std::function<double(std::span<const double>)>;

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::vector<double> numeric;
  std::vector<double> analytic;
};

/// Central differences per coordinate; relative error is
/// |analytic - numeric| / max(1e-12, |numeric|). Throws InvalidConfig for h <= 0.
FiniteDiffReport finite_diff_check(const ScalarFunction& f, std::span<const double> point,
                                   std::span<const double> analytic, double h = 1e-6);

}  // namespace graphdpo
