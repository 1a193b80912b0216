#include "graphdpo/synth_lab.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "graphdpo/errors.hpp"

namespace graphdpo::synth {
namespace {

TrainConfig small_config(Objective objective = Objective::kGraphDpo) {
  TrainConfig c;
  c.steps = 40;
  c.batch_prompts = 8;
  c.eval_every = 10;
  c.objective = objective;
  return c;
}

TEST(GenTask, DeterministicForSeed) {
  const auto a = gen_task(3, 10, 8, 4);
  const auto b = gen_task(3, 10, 8, 4);
  EXPECT_EQ(a.utility, b.utility);
  EXPECT_EQ(a.true_level, b.true_level);
  EXPECT_NE(gen_task(4, 10, 8, 4).utility, a.utility);
}

TEST(GenTask, LevelsEqualResponsesIsStrictChain) {
  const auto t = gen_task(1, 5, 8, 8);
  for (const auto& lv : t.true_level) {
    const std::set<int> distinct(lv.begin(), lv.end());
    EXPECT_EQ(distinct.size(), 8u);
  }
}

TEST(GenTask, TwoLevelsSplitInHalf) {
  const auto t = gen_task(2, 5, 8, 2);
  for (std::size_t x = 0; x < 5; ++x) {
    int top = 0;
    for (int v : t.true_level[x]) top += v;
    EXPECT_EQ(top, 4);
    EXPECT_EQ(t.true_level[x][t.gt_response[x]], 1);
  }
}

TEST(GenTask, NoiseOnlyChangesObservedLevels) {
  const auto clean = gen_task(9, 20, 8, 4, 0.0);
  const auto noisy = gen_task(9, 20, 8, 4, 1.0);
  EXPECT_EQ(clean.observed_level, clean.true_level);
  EXPECT_NE(noisy.observed_level, noisy.true_level);
}

TEST(GenTask, InvalidShapes) {
  EXPECT_THROW(gen_task(0, 1, 1, 1), InvalidInput);
  EXPECT_THROW(gen_task(0, 1, 4, 5), InvalidInput);
  EXPECT_THROW(gen_task(0, 1, 4, 0), InvalidInput);
  EXPECT_THROW(gen_task(0, 1, 4, 2, -1.0), InvalidInput);
}

TEST(SampleRollouts, LowTemperatureSamplesArgmax) {
  const auto t = gen_task(5, 3, 8, 8);
  const auto policy = TabularPolicy::greedy(t, 1.0);
  const auto r = sample_rollouts(policy, t, 1, 16, 1e-4, 11);
  for (std::size_t a : r.responses) EXPECT_EQ(a, t.gt_response[1]);
  EXPECT_EQ(r.gt, t.gt_response[1]);
}

TEST(SampleRollouts, DistinctCountUnderUniformPolicy) {
  // E[distinct] = M (1 - (1 - 1/M)^K) = 6.45249 for M = 16, K = 8.
  const auto t = gen_task(5, 1, 16, 4);
  const auto policy = TabularPolicy::uniform_like(t);
  const int trials = 100000;
  double sum = 0.0, sq = 0.0;
  for (int n = 0; n < trials; ++n) {
    const auto r = sample_rollouts(policy, t, 0, 8, 1.0, static_cast<std::uint64_t>(n));
    const double d = double(std::set<std::size_t>(r.responses.begin(), r.responses.end()).size());
    sum += d;
    sq += d * d;
  }
  const double mean = sum / trials;
  const double sd = std::sqrt(sq / trials - mean * mean);
  EXPECT_NEAR(mean, 6.45249, 3.0 * sd / std::sqrt(double(trials)));
}

TEST(SampleRollouts, LabelsFollowObservedLevels) {
  const auto t = gen_task(6, 2, 8, 4, 0.5);
  const auto r = sample_rollouts(TabularPolicy::uniform_like(t), t, 0, 8, 1.0, 1);
  for (std::size_t i = 0; i < r.responses.size(); ++i)
    EXPECT_EQ(r.labels[i], t.observed_level[0][r.responses[i]]);
}

TEST(Evaluate, GreedyPolicyIsPerfect) {
  const auto t = gen_task(7, 30, 16, 4);
  const auto m = evaluate(TabularPolicy::greedy(t), TabularPolicy::uniform_like(t), t);
  EXPECT_EQ(m.top1_accuracy, 1.0);
  EXPECT_NEAR(m.kendall_tau, 1.0, 1e-12);
}

TEST(Evaluate, ReferenceHasZeroKl) {
  const auto t = gen_task(7, 30, 16, 4);
  const auto ref = TabularPolicy::greedy(t, 0.3);
  EXPECT_EQ(evaluate(ref, ref, t).kl_to_reference, 0.0);
  EXPECT_GT(evaluate(TabularPolicy::uniform_like(t), ref, t).kl_to_reference, 0.0);
}

TEST(Evaluate, UniformPolicyTopOneNearChance) {
  // One response per level when G = M; ties are broken at random.
  double sum = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const auto t = gen_task(100 + s, 200, 16, 16);
    const auto u = TabularPolicy::uniform_like(t);
    sum += evaluate(u, u, t).top1_accuracy;
  }
  const double mean = sum / seeds;
  const double se = std::sqrt((1.0 / 16) * (15.0 / 16) / (200.0 * seeds));
  EXPECT_NEAR(mean, 1.0 / 16.0, 4.0 * se);
}

TEST(LearningRate, WarmupThenCosineFloor) {
  TrainConfig c;
  c.steps = 100;
  c.learning_rate = 1.0;
  c.warmup_frac = 0.1;
  c.min_lr_frac = 0.1;
  EXPECT_NEAR(learning_rate_at(0, c), 0.1, 1e-15);
  EXPECT_NEAR(learning_rate_at(9, c), 1.0, 1e-15);
  EXPECT_NEAR(learning_rate_at(10, c), 1.0, 1e-15);
  EXPECT_NEAR(learning_rate_at(100, c), 0.1, 1e-15);
  EXPECT_LT(learning_rate_at(60, c), learning_rate_at(40, c));
}

TEST(Train, DeterministicTrajectories) {
  const auto t = gen_task(1, 40, 16, 4);
  const auto a = train(t, small_config());
  const auto b = train(t, small_config());
  ASSERT_EQ(a.trajectory.size(), b.trajectory.size());
  for (std::size_t n = 0; n < a.trajectory.size(); ++n) {
    EXPECT_EQ(a.trajectory[n].top1_accuracy, b.trajectory[n].top1_accuracy);
    EXPECT_EQ(a.trajectory[n].kendall_tau, b.trajectory[n].kendall_tau);
    if (n > 0) EXPECT_EQ(a.trajectory[n].loss, b.trajectory[n].loss);
  }
  EXPECT_EQ(a.policy.raw(), b.policy.raw());
}

TEST(Train, ThreadCountDoesNotChangeResults) {
  const auto t = gen_task(1, 40, 16, 4);
  auto c = small_config(Objective::kGraphDpoGt);
  const auto one = train(t, c);
  c.threads = 4;
  const auto four = train(t, c);
  EXPECT_EQ(one.policy.raw(), four.policy.raw());
}

TEST(Train, RecordsExpectedSteps) {
  const auto t = gen_task(1, 20, 8, 4);
  auto c = small_config();
  c.steps = 25;
  const auto r = train(t, c);
  std::vector<std::int64_t> steps;
  for (const auto& m : r.trajectory) steps.push_back(m.step);
  EXPECT_EQ(steps, (std::vector<std::int64_t>{0, 10, 20, 25}));
  EXPECT_TRUE(std::isnan(r.trajectory[0].loss));
  EXPECT_EQ(r.trajectory[1].objective, "graphdpo");
}

TEST(Train, ZeroLearningRateKeepsMetricsConstant) {
  const auto t = gen_task(2, 30, 16, 4);
  auto c = small_config();
  c.learning_rate = 0.0;
  const auto r = train(t, c);
  for (const auto& m : r.trajectory) {
    EXPECT_EQ(m.top1_accuracy, r.trajectory[0].top1_accuracy);
    EXPECT_EQ(m.kendall_tau, r.trajectory[0].kendall_tau);
    EXPECT_EQ(m.kl_to_reference, 0.0);
  }
}

TEST(Train, PairOfRolloutsMatchesPairwiseDpo) {
  const auto t = gen_task(3, 30, 16, 4);
  auto c = small_config();
  c.k = 2;
  const auto g = train(t, c);
  c.objective = Objective::kDpoPairwise;
  const auto d = train(t, c);
  ASSERT_EQ(g.trajectory.size(), d.trajectory.size());
  for (std::size_t n = 1; n < g.trajectory.size(); ++n)
    EXPECT_NEAR(g.trajectory[n].loss, d.trajectory[n].loss, 1e-9);
  for (std::size_t p = 0; p < g.policy.raw().size(); ++p)
    ASSERT_NEAR(g.policy.raw()[p], d.policy.raw()[p], 1e-9);
}

TEST(Train, TwoLevelGraphMatchesMultiNegative) {
  const auto t = gen_task(4, 30, 16, 2);
  auto c = small_config();
  const auto g = train(t, c);
  c.objective = Objective::kMultiNegative;
  const auto m = train(t, c);
  for (std::size_t n = 1; n < g.trajectory.size(); ++n)
    EXPECT_NEAR(g.trajectory[n].loss, m.trajectory[n].loss, 1e-9);
}

TEST(Train, GraphDpoImprovesAccuracy) {
  const auto t = gen_task(5, 40, 16, 4);
  auto c = small_config();
  c.steps = 150;
  c.batch_prompts = 16;
  const auto r = train(t, c);
  EXPECT_GT(r.trajectory.back().top1_accuracy, r.trajectory.front().top1_accuracy + 0.3);
  EXPECT_GT(r.trajectory.back().kendall_tau, 0.5);
}

TEST(Train, AllObjectivesRun) {
  const auto t = gen_task(6, 20, 8, 4);
  for (auto name : {"graphdpo", "graphdpo+gt", "dpo-pairwise", "pro-listmle", "multi-negative"}) {
    auto c = small_config(parse_objective(name));
    c.steps = 10;
    const auto r = train(t, c);
    EXPECT_TRUE(std::isfinite(r.trajectory.back().loss)) << name;
  }
  EXPECT_THROW(parse_objective("lambda-loss"), InvalidConfig);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.k = 1;
  EXPECT_THROW(c.validate(), InvalidConfig);
  c = TrainConfig{};
  c.beta = 0.0;
  EXPECT_THROW(c.validate(), InvalidConfig);
  c = TrainConfig{};
  c.threads = 0;
  EXPECT_THROW(c.validate(), InvalidConfig);
}

TEST(Sweep, ShapeAndBandMarking) {
  const auto t = gen_task(8, 20, 16, 4);
  auto c = small_config();
  c.steps = 10;
  const std::vector<double> grid{0.0, 2.0, 8.0 / 3.0, 2.5, 8.0};
  const auto rows = sweep_lambda_gt(t, c, grid);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_FALSE(rows[0].in_guidance_band);
  EXPECT_TRUE(rows[1].in_guidance_band);
  EXPECT_TRUE(rows[2].in_guidance_band);
  EXPECT_TRUE(rows[3].in_guidance_band);
  EXPECT_FALSE(rows[4].in_guidance_band);
  const std::string csv = sweep_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda_gt_init,final_top1,in_guidance_band");
  EXPECT_THROW(sweep_lambda_gt(t, c, {}), InvalidConfig);
}

TEST(MetricsCsv, Format) {
  Metrics m{20, "graphdpo", 0.5, 0.25, 0.125, 0.0};
  EXPECT_EQ(metrics_csv_header(), "step,objective,loss,top1,tau,kl");
  EXPECT_EQ(metrics_csv_row(m), "20,graphdpo,0.500000,0.250000,0.125000,0.000000");
}

TEST(StepsToAccuracy, FirstHit) {
  std::vector<Metrics> traj{{0, "", 0, 0.1}, {10, "", 0, 0.96}, {20, "", 0, 0.99}};
  EXPECT_EQ(steps_to_accuracy(traj, 0.95), 10);
  EXPECT_FALSE(steps_to_accuracy(traj, 0.995).has_value());
}

}  // namespace
}  // namespace graphdpo::synth
