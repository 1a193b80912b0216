#include "graphdpo/synth_lab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "graphdpo/baselines.hpp"
#include "graphdpo/errors.hpp"
#include "graphdpo/gradients.hpp"
#include "graphdpo/numeric.hpp"
#include "graphdpo/pref_graph.hpp"

namespace graphdpo::synth {
namespace {

// Independent stream per (seed, purpose, a, b) so that results do not depend
// on evaluation order or thread count.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

enum Purpose : std::uint64_t { kTask = 1, kBatch = 2, kRollout = 3, kTieBreak = 4 };

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<int> quantile_levels(const std::vector<double>& values, std::size_t levels) {
  const std::size_t m = values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<int> out(m);
  for (std::size_t rank = 0; rank < m; ++rank)
    out[order[rank]] = static_cast<int>(rank * levels / m);
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits, double temperature = 1.0) {
  std::vector<double> out(logits.size());
  for (std::size_t a = 0; a < logits.size(); ++a) out[a] = logits[a] / temperature;
  const double lse = log_sum_exp(out);
  for (double& v : out) v -= lse;
  return out;
}

double kendall_tau_b(std::span<const double> x, std::span<const int> y) {
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0, pairs = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      ++pairs;
      const double dx = x[i] - x[j];
      const int dy = y[i] - y[j];
      if (dx == 0.0) ++ties_x;
      if (dy == 0) ++ties_y;
      if (dx == 0.0 || dy == 0) continue;
      ((dx > 0) == (dy > 0) ? concordant : discordant) += 1;
    }
  const double denom = std::sqrt(static_cast<double>(pairs - ties_x) *
                                 static_cast<double>(pairs - ties_y));
  return denom > 0.0 ? static_cast<double>(concordant - discordant) / denom : 0.0;
}

struct PromptWork {
  std::size_t prompt = 0;
  double loss = 0.0;
  std::vector<double> logit_grad;
};

}  // namespace

ToyTask gen_task(std::uint64_t seed, std::size_t num_prompts, std::size_t m, std::size_t g,
                 double utility_noise) {
  if (m < 2) throw InvalidInput("toy task needs at least two responses per prompt");
  if (g < 1 || g > m) throw InvalidInput("levels must lie in [1, responses_per_prompt]");
  if (num_prompts == 0) throw InvalidInput("toy task needs at least one prompt");
  if (!(utility_noise >= 0.0)) throw InvalidInput("utility noise must be nonnegative");

  ToyTask task;
  task.num_prompts = num_prompts;
  task.responses_per_prompt = m;
  task.levels = g;
  task.utility_noise = utility_noise;
  task.seed = seed;
  auto rng = stream(seed, kTask);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t p = 0; p < num_prompts; ++p) {
    std::vector<double> u(m), observed(m);
    for (double& v : u) v = normal(rng);
    for (std::size_t a = 0; a < m; ++a) observed[a] = u[a] + utility_noise * normal(rng);
    task.true_level.push_back(quantile_levels(u, g));
    task.observed_level.push_back(utility_noise == 0.0 ? task.true_level.back()
                                                       : quantile_levels(observed, g));
    task.gt_response.push_back(static_cast<std::size_t>(
        std::max_element(u.begin(), u.end()) - u.begin()));
    task.utility.push_back(std::move(u));
  }
  return task;
}

TabularPolicy::TabularPolicy(std::size_t num_prompts, std::size_t m)
    : num_prompts_(num_prompts), m_(m), logits_(num_prompts * m, 0.0) {}

TabularPolicy TabularPolicy::uniform_like(const ToyTask& task) {
  return TabularPolicy(task.num_prompts, task.responses_per_prompt);
}

TabularPolicy TabularPolicy::greedy(const ToyTask& task, double scale) {
  TabularPolicy p = uniform_like(task);
  for (std::size_t x = 0; x < task.num_prompts; ++x)
    for (std::size_t a = 0; a < task.responses_per_prompt; ++a)
      p.logits(x)[a] = scale * task.true_level[x][a];
  return p;
}

std::span<double> TabularPolicy::logits(std::size_t prompt) {
  return std::span<double>(logits_).subspan(prompt * m_, m_);
}

std::span<const double> TabularPolicy::logits(std::size_t prompt) const {
  return std::span<const double>(logits_).subspan(prompt * m_, m_);
}

std::vector<double> TabularPolicy::log_probs(std::size_t prompt) const {
  return log_softmax(logits(prompt));
}

Rollout sample_rollouts(const TabularPolicy& policy, const ToyTask& task, std::size_t prompt,
                        std::size_t k, double temperature, std::uint64_t seed) {
  if (k < 2) throw InvalidInput("need at least two rollouts per prompt");
  if (!(temperature > 0.0)) throw InvalidConfig("temperature must be positive");
  if (prompt >= task.num_prompts) throw InvalidInput("prompt index out of range");

  const auto logp = log_softmax(policy.logits(prompt), temperature);
  std::vector<double> cdf(logp.size());
  double acc = 0.0;
  for (std::size_t a = 0; a < logp.size(); ++a) cdf[a] = acc += std::exp(logp[a]);

  auto rng = stream(seed, kRollout, prompt);
  Rollout out;
  out.gt = task.gt_response[prompt];
  for (std::size_t n = 0; n < k; ++n) {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    // Skip zero-probability slots that share the cumulative value.
    std::size_t a = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
    while (a > 0 && std::exp(logp[a]) == 0.0) --a;
    out.responses.push_back(a);
    out.labels.push_back(task.observed_level[prompt][a]);
  }
  return out;
}

std::string_view objective_name(Objective objective) {
  switch (objective) {
    case Objective::kGraphDpo: return "graphdpo";
    case Objective::kGraphDpoGt: return "graphdpo+gt";
    case Objective::kDpoPairwise: return "dpo-pairwise";
    case Objective::kProListMle: return "pro-listmle";
    case Objective::kMultiNegative: return "multi-negative";
  }
  return "unknown";
}

Objective parse_objective(std::string_view name) {
  for (Objective o : {Objective::kGraphDpo, Objective::kGraphDpoGt, Objective::kDpoPairwise,
                      Objective::kProListMle, Objective::kMultiNegative})
    if (objective_name(o) == name) return o;
  throw InvalidConfig("unknown objective '" + std::string(name) +
                      "' (expected graphdpo, graphdpo+gt, dpo-pairwise, pro-listmle or "
                      "multi-negative)");
}

void TrainConfig::validate() const {
  if (k < 2) throw InvalidConfig("K must be >= 2");
  if (steps < 1) throw InvalidConfig("steps must be positive");
  if (!(temperature > 0.0)) throw InvalidConfig("temperature must be positive");
  if (!(beta > 0.0)) throw InvalidConfig("beta must be positive");
  if (batch_prompts == 0) throw InvalidConfig("batch_prompts must be positive");
  if (!(learning_rate >= 0.0)) throw InvalidConfig("learning rate must be nonnegative");
  if (!(warmup_frac >= 0.0 && warmup_frac < 1.0))
    throw InvalidConfig("warmup_frac must lie in [0, 1)");
  if (!(min_lr_frac >= 0.0 && min_lr_frac <= 1.0))
    throw InvalidConfig("min_lr_frac must lie in [0, 1]");
  if (eval_every < 1) throw InvalidConfig("eval_every must be positive");
  if (threads == 0) throw InvalidConfig("threads must be positive");
  ScheduleParams s = schedule;
  s.total_steps = steps;
  s.validate();
}

double learning_rate_at(std::int64_t step, const TrainConfig& config) {
  const auto warmup = static_cast<std::int64_t>(
      std::ceil(config.warmup_frac * static_cast<double>(config.steps)));
  if (step < warmup)
    return config.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const double span = static_cast<double>(std::max<std::int64_t>(1, config.steps - warmup));
  const double progress = std::min(1.0, static_cast<double>(step - warmup) / span);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return config.learning_rate * (config.min_lr_frac + (1.0 - config.min_lr_frac) * cosine);
}

PromptStep objective_step(Objective objective, std::span<const double> scores,
                          std::span<const double> labels, double gt_score, double gt_label,
                          std::span<const double> kl_terms, LossWeights weights) {
  const std::size_t k = scores.size();
  const bool anchored = objective == Objective::kGraphDpoGt;
  const ScoreSet set = center(scores, anchored ? std::optional(gt_score) : std::nullopt);
  const PreferenceLabeling labeling{{labels.begin(), labels.end()}, 0.0};
  const PreferenceGraph graph = build_from_labels(labeling);

  PromptStep out;
  switch (objective) {
    case Objective::kGraphDpo:
    case Objective::kGraphDpoGt: {
      std::optional<std::size_t> anchor;
      if (anchored) anchor = first_class_below(labeling, graph, gt_label);
      const LossBreakdown b = total_loss(set, graph, anchor, std::nullopt, weights);
      const GradientVector g = grad_total(set, graph, anchor, {}, weights);
      out.loss = b.total;
      out.score_grad = g.scores;
      out.gt_grad = g.gt.value_or(0.0);
      break;
    }
    case Objective::kDpoPairwise: {
      auto v = pairwise_dpo(set.centered, graph);
      out.loss = v.loss;
      out.score_grad = std::move(v.grad);
      break;
    }
    case Objective::kProListMle: {
      auto v = pro_listmle(set.centered, labels);
      out.loss = v.loss;
      out.score_grad = std::move(v.grad);
      break;
    }
    case Objective::kMultiNegative: {
      // Binary correctness: the best level counts as correct.
      std::vector<double> binary(k);
      bool any_pos = false, any_neg = false;
      for (std::size_t i = 0; i < k; ++i) {
        binary[i] = labels[i] >= gt_label ? 1.0 : 0.0;
        (binary[i] > 0.0 ? any_pos : any_neg) = true;
      }
      if (any_pos && any_neg) {
        auto v = multi_negative(set.centered, binary);
        out.loss = v.loss;
        out.score_grad = std::move(v.grad);
      } else {
        out.score_grad.assign(k, 0.0);
      }
      break;
    }
  }

  if (!kl_terms.empty()) {
    double kl = 0.0;
    for (double d : kl_terms) kl += d;
    kl /= static_cast<double>(kl_terms.size());
    out.loss += weights.lambda_kl * kl;
    out.kl_grad = weights.lambda_kl / static_cast<double>(kl_terms.size());
  }
  return out;
}

Metrics evaluate(const TabularPolicy& policy, const TabularPolicy& reference,
                 const ToyTask& task) {
  Metrics m;
  double top1 = 0.0, tau = 0.0, kl = 0.0;
  for (std::size_t x = 0; x < task.num_prompts; ++x) {
    const auto logits = policy.logits(x);
    const double best = *std::max_element(logits.begin(), logits.end());
    std::vector<std::size_t> argmax;
    for (std::size_t a = 0; a < logits.size(); ++a)
      if (logits[a] == best) argmax.push_back(a);
    std::size_t pick = argmax.front();
    if (argmax.size() > 1) {
      auto rng = stream(task.seed, kTieBreak, x);
      pick = argmax[static_cast<std::size_t>(uniform01(rng) * argmax.size())];
    }
    const int top_level = static_cast<int>(task.levels) - 1;
    top1 += task.true_level[x][pick] == top_level ? 1.0 : 0.0;
    tau += kendall_tau_b(logits, task.true_level[x]);

    const auto lp = policy.log_probs(x);
    const auto lr = reference.log_probs(x);
    for (std::size_t a = 0; a < lp.size(); ++a) kl += std::exp(lp[a]) * (lp[a] - lr[a]);
  }
  const double n = static_cast<double>(task.num_prompts);
  m.top1_accuracy = top1 / n;
  m.kendall_tau = tau / n;
  m.kl_to_reference = kl / n;
  return m;
}

TrainResult train(const ToyTask& task, const TrainConfig& config) {
  config.validate();
  if (config.objective == Objective::kMultiNegative && task.levels < 2)
    throw InvalidConfig("multi-negative objective needs at least two levels");
  ScheduleParams schedule = config.schedule;
  schedule.total_steps = config.steps;

  TabularPolicy policy = TabularPolicy::uniform_like(task);
  const TabularPolicy reference = policy;
  std::vector<double> m1(policy.raw().size(), 0.0), m2(policy.raw().size(), 0.0);
  const std::string name(objective_name(config.objective));
  const std::size_t width = task.responses_per_prompt;
  const double gt_label = static_cast<double>(task.levels) - 1.0;

  TrainResult result{{}, policy};
  auto record = [&](std::int64_t step, double loss) {
    Metrics m = evaluate(policy, reference, task);
    m.step = step;
    m.objective = name;
    m.loss = loss;
    result.trajectory.push_back(std::move(m));
  };
  record(0, std::numeric_limits<double>::quiet_NaN());

  std::vector<std::size_t> all(task.num_prompts);
  std::iota(all.begin(), all.end(), std::size_t{0});

  for (std::int64_t step = 0; step < config.steps; ++step) {
    // Batch without replacement (partial Fisher-Yates on a per-step stream).
    std::vector<std::size_t> batch = all;
    const std::size_t b = std::min(config.batch_prompts, batch.size());
    auto rng = stream(config.seed, kBatch, static_cast<std::uint64_t>(step));
    for (std::size_t n = 0; n < b; ++n) {
      const std::size_t pick = n + static_cast<std::size_t>(uniform01(rng) * (batch.size() - n));
      std::swap(batch[n], batch[pick]);
    }
    batch.resize(b);

    const LossWeights weights = weights_at(step, schedule);
    std::vector<PromptWork> work(b);
    auto run = [&](std::size_t slot) {
      const std::size_t x = batch[slot];
      const std::uint64_t rollout_seed =
          config.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(step + 1));
      const Rollout r = sample_rollouts(policy, task, x, config.k, config.temperature,
                                        rollout_seed);
      const auto lp = policy.log_probs(x);
      const auto lr = reference.log_probs(x);
      std::vector<double> scores(config.k), kl_terms(config.k);
      for (std::size_t i = 0; i < config.k; ++i) {
        const std::size_t a = r.responses[i];
        scores[i] = log_ratio_score(lp[a], lr[a], config.beta);
        kl_terms[i] = lp[a] - lr[a];
      }
      const double gt_score = log_ratio_score(lp[r.gt], lr[r.gt], config.beta);
      const PromptStep ps = objective_step(config.objective, scores, r.labels, gt_score,
                                           gt_label, kl_terms, weights);

      // Coefficients on log pi(a); chain through the log-softmax.
      std::vector<double> coeff(width, 0.0);
      for (std::size_t i = 0; i < config.k; ++i)
        coeff[r.responses[i]] += config.beta * ps.score_grad[i] + ps.kl_grad;
      coeff[r.gt] += config.beta * ps.gt_grad;
      const double total = std::accumulate(coeff.begin(), coeff.end(), 0.0);
      PromptWork& w = work[slot];
      w.prompt = x;
      w.loss = ps.loss;
      w.logit_grad.resize(width);
      for (std::size_t a = 0; a < width; ++a) w.logit_grad[a] = coeff[a] - std::exp(lp[a]) * total;
    };

    if (config.threads > 1) {
      std::vector<std::jthread> pool;
      const std::size_t t = std::min(config.threads, b);
      for (std::size_t w = 0; w < t; ++w)
        pool.emplace_back([&, w] {
          for (std::size_t slot = w; slot < b; slot += t) run(slot);
        });
    } else {
      for (std::size_t slot = 0; slot < b; ++slot) run(slot);
    }

    // Fixed-order reduction.
    double batch_loss = 0.0;
    std::vector<double> grad(policy.raw().size(), 0.0);
    for (const PromptWork& w : work) {
      if (!std::isfinite(w.loss))
        throw Divergence(fmt::format("non-finite loss at step {} ({}) on prompt {}", step,
                                     name, w.prompt));
      batch_loss += w.loss;
      for (std::size_t a = 0; a < width; ++a)
        grad[w.prompt * width + a] += w.logit_grad[a] / static_cast<double>(b);
    }
    batch_loss /= static_cast<double>(b);

    // Decoupled weight decay (AdamW).
    const double lr = learning_rate_at(step, config);
    const double t = static_cast<double>(step + 1);
    const double c1 = 1.0 - std::pow(config.adam_beta1, t);
    const double c2 = 1.0 - std::pow(config.adam_beta2, t);
    auto& theta = policy.raw();
    for (std::size_t p = 0; p < theta.size(); ++p) {
      m1[p] = config.adam_beta1 * m1[p] + (1.0 - config.adam_beta1) * grad[p];
      m2[p] = config.adam_beta2 * m2[p] + (1.0 - config.adam_beta2) * grad[p] * grad[p];
      const double update = (m1[p] / c1) / (std::sqrt(m2[p] / c2) + config.adam_eps);
      theta[p] -= lr * (update + config.weight_decay * theta[p]);
    }
    for (double v : theta)
      if (!std::isfinite(v))
        throw Divergence(fmt::format("non-finite policy parameter after step {} ({})", step,
                                     name));

    const std::int64_t done = step + 1;
    if (done % config.eval_every == 0 || done == config.steps) record(done, batch_loss);
  }
  result.policy = policy;
  return result;
}

std::optional<std::int64_t> steps_to_accuracy(std::span<const Metrics> trajectory,
                                              double threshold) {
  for (const Metrics& m : trajectory)
    if (m.top1_accuracy >= threshold) return m.step;
  return std::nullopt;
}

std::vector<SweepRow> sweep_lambda_gt(const ToyTask& task, const TrainConfig& config,
                                      std::span<const double> grid) {
  if (grid.empty()) throw InvalidConfig("lambda_gt grid is empty");
  const double lo = static_cast<double>(config.k) / 4.0;
  const double hi = static_cast<double>(config.k) / 3.0;
  std::vector<SweepRow> rows;
  for (double init : grid) {
    TrainConfig c = config;
    c.objective = Objective::kGraphDpoGt;
    c.schedule.gt_init = init;
    if (c.schedule.gt_final > init) c.schedule.gt_final = init;
    const TrainResult r = train(task, c);
    rows.push_back({init, r.trajectory.back().top1_accuracy,
                    init >= lo - 1e-12 && init <= hi + 1e-12});
  }
  return rows;
}

std::string metrics_csv_header() { return "step,objective,loss,top1,tau,kl"; }

std::string metrics_csv_row(const Metrics& m) {
  const std::string loss = std::isfinite(m.loss) ? fmt::format("{:.6f}", m.loss) : "nan";
  return fmt::format("{},{},{},{:.6f},{:.6f},{:.6f}", m.step, m.objective, loss,
                     m.top1_accuracy, m.kendall_tau, m.kl_to_reference);
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "lambda_gt_init,final_top1,in_guidance_band\n";
  for (const SweepRow& r : rows)
    out += fmt::format("{:.6f},{:.6f},{}\n", r.gt_init, r.final_top1,
                       r.in_guidance_band ? 1 : 0);
  return out;
}

}  // namespace graphdpo::synth
