#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "graphdpo/pref_graph.hpp"

namespace graphdpo {

/// Per-token log-probabilities of one response under one model.
using TokenLogProbs = std::vector<double>;

/// Summed token log-probabilities. Throws InvalidInput on an empty list or on
/// entries that are not log-probabilities (positive or NaN).
double sequence_logprob(std::span<const double> tokens);

/// beta * (policy_lp - ref_lp). Throws InvalidConfig unless beta > 0.
double log_ratio_score(double policy_lp, double ref_lp, double beta);

/// Raw and per-prompt centered scores. The mean is taken over the K sampled
/// responses only; a ground-truth score is shifted by that same mean.
struct ScoreSet {
  std::vector<double> raw;
  std::vector<double> centered;
  std::optional<double> gt_raw;
  std::optional<double> gt_centered;

  std::size_t size() const { return raw.size(); }
};

ScoreSet center(std::span<const double> raw, std::optional<double> gt_raw = std::nullopt);

/// Mean local loss over the nodes that dominate at least one other node.
struct GraphLossTerm {
  double loss = 0.0;
  std::size_t contributing_nodes = 0;
};

/// Reference evaluation: one explicit log-sum-exp over {i} + dominated_set(i)
/// for every node. O(K^2) on layered graphs; also handles adjacency overrides.
GraphLossTerm graph_loss_naive(const ScoreSet& scores, const PreferenceGraph& graph);

/// O(K) evaluation. A single backward sweep accumulates the log-sum-exp of all
/// classes strictly below each class; each node then needs one log_add_exp.
GraphLossTerm graph_loss_layered(const ScoreSet& scores, const PreferenceGraph& graph);

/// Ground-truth anchoring term over {gt} + V_worse, where V_worse is every
/// node in a class with index >= `worse_from_class` (see first_class_below).
/// Returns 0 when V_worse is empty. Throws InvalidInput without a gt score.
double anchor_loss(const ScoreSet& scores, const PreferenceGraph& graph,
                   std::size_t worse_from_class);

/// Sequence-mean token-mean log ratio between policy and reference. This is a
/// single-sample estimate and may be negative; no clamping is applied.
double kl_regularizer(std::span<const TokenLogProbs> policy_tokens,
                      std::span<const TokenLogProbs> ref_tokens);

/// Anchoring and KL weight schedules.
///
/// lambda_gt decays linearly from gt_init to gt_final over total_steps.
/// lambda_kl ramps linearly from 0 to kl_peak over the first
/// kl_warmup_frac * total_steps steps, then follows a half cosine back to 0.
/// The KL shape and its defaults are local choices, not published values.
struct ScheduleParams {
  double gt_init = 2.5;
  double gt_final = 1.0;
  std::int64_t total_steps = 1;
  double kl_peak = 0.1;
  double kl_warmup_frac = 0.1;

  /// Defaults with gt_init = K/4. gt_final is lowered to gt_init when K < 4.
  static ScheduleParams for_rollouts(std::size_t k, std::int64_t total_steps);

  /// Throws InvalidConfig when an invariant does not hold.
  void validate() const;
};

/// Steps outside [0, total_steps] are clamped and reported through warn().
double lambda_gt(std::int64_t step, const ScheduleParams& params);
double lambda_kl(std::int64_t step, const ScheduleParams& params);

struct LossWeights {
  double lambda_gt = 0.0;
  double lambda_kl = 0.0;
};

LossWeights weights_at(std::int64_t step, const ScheduleParams& params);

struct LossBreakdown {
  double graph_loss = 0.0;
  std::size_t contributing_nodes = 0;
  std::optional<double> anchor_loss;
  double kl_loss = 0.0;
  double lambda_gt = 0.0;
  double lambda_kl = 0.0;
  double total = 0.0;
};

/// graph + lambda_gt * anchor + lambda_kl * kl. The anchor term is skipped
/// when `anchor_from_class` is empty; the KL term when `kl` is empty.
LossBreakdown total_loss(const ScoreSet& scores, const PreferenceGraph& graph,
                         std::optional<std::size_t> anchor_from_class,
                         std::optional<double> kl, LossWeights weights);

LossBreakdown total_loss(const ScoreSet& scores, const PreferenceGraph& graph,
                         std::optional<std::size_t> anchor_from_class,
                         std::optional<double> kl, std::int64_t step,
                         const ScheduleParams& params);

/// Unweighted mean of per-prompt totals, reduced in input order.
double batch_mean_total(std::span<const LossBreakdown> prompts);

}  // namespace graphdpo
