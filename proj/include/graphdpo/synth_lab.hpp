#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graphdpo/objective.hpp"

namespace graphdpo::synth {

/// Synthetic prompts with known utilities.
///
/// Each prompt has M candidate responses with a latent utility drawn from a
/// standard normal. Utilities are quantile-binned per prompt into G levels
/// (0 = worst, G-1 = best); ties inside a level model discrete correctness
/// signals. `observed_level` bins utility plus Gaussian noise and is what
/// training sees as the preference label; with zero noise it equals
/// `true_level`.
struct ToyTask {
  std::size_t num_prompts = 0;
  std::size_t responses_per_prompt = 0;
  std::size_t levels = 0;
  double utility_noise = 0.0;
  std::uint64_t seed = 0;

  std::vector<std::vector<double>> utility;
  std::vector<std::vector<int>> true_level;
  std::vector<std::vector<int>> observed_level;
  std::vector<std::size_t> gt_response;  ///< argmax utility per prompt
};

/// Throws InvalidInput when M < 2, G == 0, G > M or noise < 0.
ToyTask gen_task(std::uint64_t seed, std::size_t num_prompts, std::size_t m, std::size_t g,
                 double utility_noise = 0.0);

/// One logit per (prompt, response); log pi(y|x) is a log-softmax per prompt.
class TabularPolicy {
 public:
  TabularPolicy(std::size_t num_prompts, std::size_t m);
  static TabularPolicy uniform_like(const ToyTask& task);
  /// Logits equal to scale * true level: the greedy-on-utility policy.
  static TabularPolicy greedy(const ToyTask& task, double scale = 10.0);

  std::size_t num_prompts() const { return num_prompts_; }
  std::size_t responses() const { return m_; }
  std::span<double> logits(std::size_t prompt);
  std::span<const double> logits(std::size_t prompt) const;
  std::vector<double>& raw() { return logits_; }
  const std::vector<double>& raw() const { return logits_; }

  std::vector<double> log_probs(std::size_t prompt) const;

 private:
  std::size_t num_prompts_;
  std::size_t m_;
  std::vector<double> logits_;
};

struct Rollout {
  std::vector<std::size_t> responses;  ///< sampled indices, duplicates allowed
  std::vector<double> labels;          ///< observed level of each sample
  std::size_t gt = 0;
};

/// K samples with replacement from softmax(logits / temperature).
Rollout sample_rollouts(const TabularPolicy& policy, const ToyTask& task, std::size_t prompt,
                        std::size_t k, double temperature, std::uint64_t seed);

enum class Objective { kGraphDpo, kGraphDpoGt, kDpoPairwise, kProListMle, kMultiNegative };

std::string_view objective_name(Objective objective);
/// Accepts graphdpo, graphdpo+gt, dpo-pairwise, pro-listmle, multi-negative.
Objective parse_objective(std::string_view name);

struct TrainConfig {
  std::size_t k = 8;
  double temperature = 0.8;
  double beta = 0.05;
  std::int64_t steps = 600;
  std::size_t batch_prompts = 32;
  double learning_rate = 0.1;
  double warmup_frac = 0.05;
  double min_lr_frac = 0.1;  ///< cosine floor as a fraction of the peak
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-2;
  ScheduleParams schedule;  ///< total_steps is overwritten with `steps`
  Objective objective = Objective::kGraphDpo;
  std::uint64_t seed = 0;
  std::int64_t eval_every = 10;
  std::size_t threads = 1;

  void validate() const;
};

struct Metrics {
  std::int64_t step = 0;
  std::string objective;
  double loss = 0.0;
  double top1_accuracy = 0.0;
  double kendall_tau = 0.0;
  double kl_to_reference = 0.0;
};

struct TrainResult {
  std::vector<Metrics> trajectory;
  TabularPolicy policy;
};

/// Learning rate at a 0-based step: linear warmup, then cosine decay to
/// min_lr_frac of the peak.
double learning_rate_at(std::int64_t step, const TrainConfig& config);

/// Loss and score gradients for one prompt under the selected objective.
struct PromptStep {
  double loss = 0.0;
  std::vector<double> score_grad;  ///< d loss / d raw score, per sample
  double gt_grad = 0.0;            ///< d loss / d gt score
  double kl_grad = 0.0;            ///< d loss / d policy log-prob, per sample
};

/// `scores` are raw log-ratio scores of the K samples; the gt score is only
/// used by the anchored objective.
PromptStep objective_step(Objective objective, std::span<const double> scores,
                          std::span<const double> labels, double gt_score, double gt_label,
                          std::span<const double> kl_terms, LossWeights weights);

/// Runs the optimizer loop. Metrics are recorded at step 0, every
/// `eval_every` steps and after the final step. Throws Divergence on a
/// non-finite batch loss. Results do not depend on `threads`.
TrainResult train(const ToyTask& task, const TrainConfig& config);

/// top-1 accuracy (argmax in the best true level, exact ties broken by a
/// seeded draw), Kendall tau-b between logits and true levels averaged over
/// prompts, and mean KL(policy || reference).
Metrics evaluate(const TabularPolicy& policy, const TabularPolicy& reference,
                 const ToyTask& task);

/// First recorded step with top1_accuracy >= threshold.
std::optional<std::int64_t> steps_to_accuracy(std::span<const Metrics> trajectory,
                                              double threshold);

struct SweepRow {
  double gt_init = 0.0;
  double final_top1 = 0.0;
  bool in_guidance_band = false;  ///< gt_init within [K/4, K/3]
};

/// One anchored training run per initial weight, all sharing the config seed.
/// A grid value below the configured gt_final is held constant.
std::vector<SweepRow> sweep_lambda_gt(const ToyTask& task, const TrainConfig& config,
                                      std::span<const double> grid);

std::string metrics_csv_header();
std::string metrics_csv_row(const Metrics& m);
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace graphdpo::synth
