#include "graphdpo/objective.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "graphdpo/errors.hpp"
#include "graphdpo/numeric.hpp"
#include "graphdpo/warnings.hpp"

namespace graphdpo {
namespace {

void require_matching(const ScoreSet& scores, const PreferenceGraph& graph) {
  if (scores.centered.size() != graph.num_nodes()) {
    std::ostringstream os;
    os << "score count " << scores.centered.size() << " does not match graph size "
       << graph.num_nodes();
    throw InvalidInput(os.str());
  }
}

std::int64_t clamp_step(std::int64_t step, const ScheduleParams& p, const char* what) {
  if (step < 0 || step > p.total_steps) {
    const std::int64_t clamped = step < 0 ? 0 : p.total_steps;
    warn(std::string(what) + ": step " + std::to_string(step) + " outside [0, " +
         std::to_string(p.total_steps) + "], clamped to " + std::to_string(clamped));
    return clamped;
  }
  return step;
}

}  // namespace

double sequence_logprob(std::span<const double> tokens) {
  if (tokens.empty()) throw InvalidInput("token log-probability list is empty");
  double sum = 0.0;
  for (double lp : tokens) {
    if (!(lp <= 0.0)) throw InvalidInput("token log-probability must be <= 0");
    sum += lp;
  }
  return sum;
}

double log_ratio_score(double policy_lp, double ref_lp, double beta) {
  if (!(beta > 0.0)) throw InvalidConfig("beta must be positive");
  return beta * (policy_lp - ref_lp);
}

ScoreSet center(std::span<const double> raw, std::optional<double> gt_raw) {
  if (raw.empty()) throw InvalidInput("cannot center an empty score list");
  double mean = 0.0;
  for (double s : raw) mean += s;
  mean /= static_cast<double>(raw.size());

  ScoreSet out;
  out.raw.assign(raw.begin(), raw.end());
  out.centered.reserve(raw.size());
  for (double s : raw) out.centered.push_back(s - mean);
  if (gt_raw) {
    out.gt_raw = gt_raw;
    out.gt_centered = *gt_raw - mean;
  }
  return out;
}

GraphLossTerm graph_loss_naive(const ScoreSet& scores, const PreferenceGraph& graph) {
  require_matching(scores, graph);
  const auto& s = scores.centered;
  GraphLossTerm out;
  double sum = 0.0;
  std::vector<double> choice;
  for (NodeIndex i = 0; i < graph.num_nodes(); ++i) {
    const NodeSet below = dominated_set(graph, i);
    if (below.empty()) continue;
    choice.assign(1, s[i]);
    for (NodeIndex j : below) choice.push_back(s[j]);
    sum += log_sum_exp(choice) - s[i];
    ++out.contributing_nodes;
  }
  if (out.contributing_nodes > 0) out.loss = sum / static_cast<double>(out.contributing_nodes);
  return out;
}

GraphLossTerm graph_loss_layered(const ScoreSet& scores, const PreferenceGraph& graph) {
  require_matching(scores, graph);
  const auto& s = scores.centered;
  GraphLossTerm out;
  double sum = 0.0;
  double below = kNegInf;  // log-sum-exp over classes after g
  for (std::size_t g = graph.num_classes(); g-- > 0;) {
    const NodeSet& members = graph.class_members(g);
    if (below != kNegInf) {
      for (NodeIndex i : members) sum += log_add_exp(s[i], below) - s[i];
      out.contributing_nodes += members.size();
    }
    for (NodeIndex i : members) below = log_add_exp(below, s[i]);
  }
  if (out.contributing_nodes > 0) out.loss = sum / static_cast<double>(out.contributing_nodes);
  return out;
}

double anchor_loss(const ScoreSet& scores, const PreferenceGraph& graph,
                   std::size_t worse_from_class) {
  require_matching(scores, graph);
  if (!scores.gt_centered) throw InvalidInput("anchor loss needs a ground-truth score");
  const double gt = *scores.gt_centered;
  double acc = gt;
  bool any = false;
  for (std::size_t g = worse_from_class; g < graph.num_classes(); ++g)
    for (NodeIndex j : graph.class_members(g)) {
      acc = log_add_exp(acc, scores.centered[j]);
      any = true;
    }
  return any ? acc - gt : 0.0;
}

double kl_regularizer(std::span<const TokenLogProbs> policy_tokens,
                      std::span<const TokenLogProbs> ref_tokens) {
  if (policy_tokens.size() != ref_tokens.size())
    throw InvalidInput("policy and reference response counts differ");
  if (policy_tokens.empty()) throw InvalidInput("KL needs at least one response");
  double total = 0.0;
  for (std::size_t i = 0; i < policy_tokens.size(); ++i) {
    const auto& p = policy_tokens[i];
    const auto& r = ref_tokens[i];
    if (p.size() != r.size())
      throw InvalidInput("token counts differ for response " + std::to_string(i));
    if (p.empty()) throw InvalidInput("response " + std::to_string(i) + " has no tokens");
    double diff = 0.0;
    for (std::size_t t = 0; t < p.size(); ++t) diff += p[t] - r[t];
    total += diff / static_cast<double>(p.size());
  }
  return total / static_cast<double>(policy_tokens.size());
}

ScheduleParams ScheduleParams::for_rollouts(std::size_t k, std::int64_t total_steps) {
  ScheduleParams p;
  p.total_steps = total_steps;
  p.gt_init = static_cast<double>(k) / 4.0;
  if (p.gt_final > p.gt_init) p.gt_final = p.gt_init;
  return p;
}

void ScheduleParams::validate() const {
  if (total_steps < 1) throw InvalidConfig("total_steps must be >= 1");
  if (!(gt_final >= 0.0)) throw InvalidConfig("gt_final must be >= 0");
  if (!(gt_init >= gt_final)) throw InvalidConfig("gt_init must be >= gt_final");
  if (!(kl_peak >= 0.0)) throw InvalidConfig("kl_peak must be >= 0");
  if (!(kl_warmup_frac > 0.0 && kl_warmup_frac <= 1.0))
    throw InvalidConfig("kl_warmup_frac must lie in (0, 1]");
}

double lambda_gt(std::int64_t step, const ScheduleParams& params) {
  params.validate();
  const std::int64_t t = clamp_step(step, params, "lambda_gt");
  const double frac = static_cast<double>(t) / static_cast<double>(params.total_steps);
  return params.gt_init + (params.gt_final - params.gt_init) * frac;
}

double lambda_kl(std::int64_t step, const ScheduleParams& params) {
  params.validate();
  const double t = static_cast<double>(clamp_step(step, params, "lambda_kl"));
  const double total = static_cast<double>(params.total_steps);
  const double warmup = params.kl_warmup_frac * total;
  if (t <= warmup) return params.kl_peak * t / warmup;
  const double progress = (t - warmup) / (total - warmup);
  return params.kl_peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

LossWeights weights_at(std::int64_t step, const ScheduleParams& params) {
  return {lambda_gt(step, params), lambda_kl(step, params)};
}

LossBreakdown total_loss(const ScoreSet& scores, const PreferenceGraph& graph,
                         std::optional<std::size_t> anchor_from_class,
                         std::optional<double> kl, LossWeights weights) {
  const GraphLossTerm g = graph_loss_layered(scores, graph);
  LossBreakdown out;
  out.graph_loss = g.loss;
  out.contributing_nodes = g.contributing_nodes;
  out.lambda_gt = weights.lambda_gt;
  out.lambda_kl = weights.lambda_kl;
  out.total = g.loss;
  if (anchor_from_class) {
    out.anchor_loss = anchor_loss(scores, graph, *anchor_from_class);
    out.total += weights.lambda_gt * *out.anchor_loss;
  }
  if (kl) {
    out.kl_loss = *kl;
    out.total += weights.lambda_kl * *kl;
  }
  return out;
}

LossBreakdown total_loss(const ScoreSet& scores, const PreferenceGraph& graph,
                         std::optional<std::size_t> anchor_from_class,
                         std::optional<double> kl, std::int64_t step,
                         const ScheduleParams& params) {
  return total_loss(scores, graph, anchor_from_class, kl, weights_at(step, params));
}

double batch_mean_total(std::span<const LossBreakdown> prompts) {
  if (prompts.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : prompts) sum += p.total;
  return sum / static_cast<double>(prompts.size());
}

}  // namespace graphdpo
