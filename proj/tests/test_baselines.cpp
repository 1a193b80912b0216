#include "graphdpo/baselines.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "graphdpo/errors.hpp"
#include "graphdpo/gradients.hpp"
#include "graphdpo/numeric.hpp"
#include "graphdpo/objective.hpp"
#include "graphdpo/oracle.hpp"

namespace graphdpo {
namespace {

TEST(PairwiseDpo, MatchesOracle) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 2 + rng() % 8;
    std::vector<double> labels(k), s(k);
    for (std::size_t i = 0; i < k; ++i) {
      labels[i] = double(rng() % 3);
      s[i] = normal(rng);
    }
    const auto g = build_from_labels({labels, 0.0});
    if (g.edge_count() == 0) continue;
    ASSERT_NEAR(pairwise_dpo(s, g).loss,
                oracle::pairwise_dpo_loss(s, oracle::adjacency_from_labels(labels)), 1e-12);
  }
}

TEST(PairwiseDpo, GradientByFiniteDifferences) {
  const std::vector<double> labels{2, 0, 1, 1};
  const std::vector<double> s{0.2, 0.7, -0.4, 0.1};
  const auto g = build_from_labels({labels, 0.0});
  const auto v = pairwise_dpo(s, g);
  const auto rep =
      finite_diff_check([&](std::span<const double> x) { return pairwise_dpo(x, g).loss; }, s,
                        v.grad);
  EXPECT_LT(rep.max_rel_error, 1e-6);
}

TEST(ProListMle, StrictLabelsEqualPlackettLuce) {
  const std::vector<double> s{0.1, 1.2, -0.3, 0.4};
  const std::vector<double> labels{3, 1, 0, 2};
  EXPECT_NEAR(baseline_pro_listmle(s, labels),
              oracle::pl_permutation_nll(s, std::vector<std::size_t>{0, 3, 1, 2}), 1e-12);
}

TEST(ProListMle, AllTiedGivesLogFactorial) {
  const std::vector<double> s{0.0, 0.0, 0.0};
  const std::vector<double> labels{1, 1, 1};
  EXPECT_NEAR(baseline_pro_listmle(s, labels), std::log(6.0), 1e-12);
  EXPECT_EQ(graph_loss_layered(center(s), build_from_labels({labels, 0.0})).loss, 0.0);
}

TEST(ProListMle, TieBreakingByIndexWitness) {
  const std::vector<double> labels{1, 1, 0, 0};
  const std::vector<double> o1{0.3, -0.2, 0.5, -0.6};
  const std::vector<double> o2{-0.2, 0.3, 0.5, -0.6};
  EXPECT_NEAR(baseline_pro_listmle(o1, labels), 2.765229, 1e-6);
  EXPECT_NEAR(baseline_pro_listmle(o2, labels), 2.927423, 1e-6);
  // GraphDPO is indifferent to the swap.
  const auto g = build_from_labels({labels, 0.0});
  EXPECT_NEAR(graph_loss_layered(center(o1), g).loss, graph_loss_layered(center(o2), g).loss,
              1e-12);
}

TEST(ProListMle, GradientByFiniteDifferences) {
  const std::vector<double> s{0.3, -0.2, 0.5, -0.6, 0.05};
  const std::vector<double> labels{1, 1, 0, 2, 0};
  const auto v = pro_listmle(s, labels);
  const auto rep = finite_diff_check(
      [&](std::span<const double> x) { return pro_listmle(x, labels).loss; }, s, v.grad);
  EXPECT_LT(rep.max_rel_error, 1e-6);
}

TEST(MultiNegative, EqualsGraphLossOnTwoClasses) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 2 + rng() % 12;
    std::vector<double> labels(k), s(k);
    for (std::size_t i = 0; i < k; ++i) {
      labels[i] = double(rng() % 2);
      s[i] = normal(rng);
    }
    labels[0] = 1;
    labels[1] = 0;
    const auto g = build_from_labels({labels, 0.0});
    ASSERT_NEAR(baseline_multi_negative(s, labels), graph_loss_layered(center(s), g).loss, 1e-9);
  }
}

TEST(MultiNegative, SinglePairIsDpo) {
  const std::vector<double> s{0.8, -0.1};
  const std::vector<double> labels{1, 0};
  EXPECT_NEAR(baseline_multi_negative(s, labels), neg_log_sigmoid(0.9), 1e-12);
}

TEST(MultiNegative, ThreeClassesRejected) {
  const std::vector<double> s{0, 0, 0};
  EXPECT_THROW(multi_negative(s, std::vector<double>{2, 1, 0}), InvalidInput);
  EXPECT_THROW(multi_negative(s, std::vector<double>{1, 1, 1}), InvalidInput);
}

TEST(TieRobustness, AllTiedBatchGradients) {
  const std::vector<double> s{0.4, -0.1, 0.9, 0.2};
  const std::vector<double> labels{1, 1, 1, 1};
  const auto g = build_from_labels({labels, 0.0});
  const auto graph_grad = grad_graph_loss(center(s), g);
  for (double v : graph_grad.scores) EXPECT_EQ(v, 0.0);
  const auto pro = pro_listmle(s, labels);
  double norm = 0.0;
  for (double v : pro.grad) norm += v * v;
  EXPECT_GT(norm, 1e-3);
}

}  // namespace
}  // namespace graphdpo
