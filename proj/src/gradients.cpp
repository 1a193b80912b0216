#include "graphdpo/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "graphdpo/errors.hpp"
#include "graphdpo/numeric.hpp"

namespace graphdpo {
namespace {

// Per-node local normalizer log-sum-exp over {i} + N-(i); -inf for nodes
// with an empty dominated set.
std::vector<double> local_normalizers(const std::vector<double>& s,
                                      const PreferenceGraph& graph) {
  std::vector<double> lse(s.size(), kNegInf);
  double below = kNegInf;
  for (std::size_t g = graph.num_classes(); g-- > 0;) {
    const NodeSet& members = graph.class_members(g);
    if (below != kNegInf)
      for (NodeIndex i : members) lse[i] = log_add_exp(s[i], below);
    for (NodeIndex i : members) below = log_add_exp(below, s[i]);
  }
  return lse;
}

// influence_j = exp(s_j + log sum_{i above j} exp(-lse_i)), accumulated
// top-down so the whole pass stays O(K).
std::vector<double> influence_from(const std::vector<double>& s,
                                   const std::vector<double>& lse,
                                   const PreferenceGraph& graph) {
  std::vector<double> out(s.size(), 0.0);
  double above = kNegInf;
  for (std::size_t g = 0; g < graph.num_classes(); ++g) {
    const NodeSet& members = graph.class_members(g);
    if (above != kNegInf)
      for (NodeIndex j : members) out[j] = std::exp(s[j] + above);
    for (NodeIndex i : members)
      if (lse[i] != kNegInf) above = log_add_exp(above, -lse[i]);
  }
  return out;
}

void require_size(const ScoreSet& scores, const PreferenceGraph& graph) {
  if (scores.centered.size() != graph.num_nodes())
    throw InvalidInput("score count " + std::to_string(scores.centered.size()) +
                       " does not match graph size " + std::to_string(graph.num_nodes()));
}

}  // namespace

std::vector<double> centered_to_raw(std::span<const double> centered,
                                    std::optional<double> gt_centered_grad) {
  double pooled = gt_centered_grad.value_or(0.0);
  for (double c : centered) pooled += c;
  const double shift = pooled / static_cast<double>(centered.size());
  std::vector<double> raw(centered.begin(), centered.end());
  for (double& r : raw) r -= shift;
  return raw;
}

GradientVector grad_graph_loss(const ScoreSet& scores, const PreferenceGraph& graph) {
  require_size(scores, graph);
  const auto& s = scores.centered;
  const auto lse = local_normalizers(s, graph);
  const auto influence = influence_from(s, lse, graph);

  std::size_t contributing = 0;
  for (double v : lse) contributing += v != kNegInf;

  GradientVector out;
  out.centered.assign(s.size(), 0.0);
  if (contributing > 0) {
    const double norm = 1.0 / static_cast<double>(contributing);
    for (NodeIndex j = 0; j < s.size(); ++j) {
      double c = influence[j];
      if (lse[j] != kNegInf) c += std::exp(s[j] - lse[j]) - 1.0;
      out.centered[j] = c * norm;
    }
  }
  out.scores = centered_to_raw(out.centered, std::nullopt);
  if (scores.gt_centered) out.gt = 0.0;
  return out;
}

GradientVector grad_anchor_loss(const ScoreSet& scores, const PreferenceGraph& graph,
                                 std::size_t worse_from_class) {
  require_size(scores, graph);
  if (!scores.gt_centered) throw InvalidInput("anchor gradient needs a ground-truth score");
  const double gt = *scores.gt_centered;

  double lse = gt;
  bool any = false;
  for (std::size_t g = worse_from_class; g < graph.num_classes(); ++g)
    for (NodeIndex j : graph.class_members(g)) {
      lse = log_add_exp(lse, scores.centered[j]);
      any = true;
    }

  GradientVector out;
  out.centered.assign(scores.size(), 0.0);
  double gt_grad = 0.0;
  if (any) {
    gt_grad = std::exp(gt - lse) - 1.0;
    for (std::size_t g = worse_from_class; g < graph.num_classes(); ++g)
      for (NodeIndex j : graph.class_members(g))
        out.centered[j] = std::exp(scores.centered[j] - lse);
  }
  out.gt = gt_grad;
  out.scores = centered_to_raw(out.centered, gt_grad);
  return out;
}

GradientVector grad_total(const ScoreSet& scores, const PreferenceGraph& graph,
                          std::optional<std::size_t> anchor_from_class,
                          std::span<const std::size_t> kl_token_counts,
                          LossWeights weights) {
  GradientVector out = grad_graph_loss(scores, graph);
  if (anchor_from_class) {
    const GradientVector a = grad_anchor_loss(scores, graph, *anchor_from_class);
    for (std::size_t j = 0; j < out.scores.size(); ++j) {
      out.scores[j] += weights.lambda_gt * a.scores[j];
      out.centered[j] += weights.lambda_gt * a.centered[j];
    }
    out.gt = weights.lambda_gt * *a.gt;
  }
  if (!kl_token_counts.empty()) {
    if (kl_token_counts.size() != scores.size())
      throw InvalidInput("KL token counts must cover every response");
    const double k = static_cast<double>(kl_token_counts.size());
    out.policy_token.reserve(kl_token_counts.size());
    for (std::size_t t : kl_token_counts) {
      if (t == 0) throw InvalidInput("KL token count must be positive");
      out.policy_token.push_back(weights.lambda_kl / (k * static_cast<double>(t)));
    }
  }
  return out;
}

std::vector<double> node_influence(const ScoreSet& scores, const PreferenceGraph& graph) {
  require_size(scores, graph);
  const auto lse = local_normalizers(scores.centered, graph);
  return influence_from(scores.centered, lse, graph);
}

FiniteDiffReport finite_diff_check(const ScalarFunction& f, std::span<const double> point,
                                   std::span<const double> analytic, double h) {
  if (!(h > 0.0)) throw InvalidConfig("finite-difference step must be positive");
  if (analytic.size() != point.size())
    throw InvalidInput("analytic gradient and point sizes differ");

  FiniteDiffReport report;
  report.analytic.assign(analytic.begin(), analytic.end());
  report.numeric.resize(point.size());
  std::vector<double> x(point.begin(), point.end());
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double saved = x[c];
    // Divide by the representable step, not 2h.
    const double hi = saved + h;
    const double lo = saved - h;
    x[c] = hi;
    const double up = f(x);
    x[c] = lo;
    const double down = f(x);
    x[c] = saved;
    const double numeric = (up - down) / (hi - lo);
    report.numeric[c] = numeric;
    const double rel = std::abs(analytic[c] - numeric) / std::max(1e-12, std::abs(numeric));
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = c;
    }
  }
  return report;
}

}  // namespace graphdpo
