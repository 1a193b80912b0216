#include "graphdpo/oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace graphdpo::oracle {
namespace {

TEST(PlPermutationNll, ChainOfThree) {
  const std::vector<double> s{1, 0, -1};
  const std::vector<std::size_t> order{0, 1, 2};
  EXPECT_NEAR(pl_permutation_nll(s, order), 0.720868, 1e-6);
}

TEST(PlPermutationNll, EqualScoresGiveLogFactorial) {
  const std::vector<double> s{0.4, 0.4, 0.4};
  const std::vector<std::size_t> order{2, 0, 1};
  EXPECT_NEAR(pl_permutation_nll(s, order), std::log(6.0), 1e-12);
}

TEST(PlPermutationNll, SingleItemIsZero) {
  const std::vector<double> s{3.0};
  const std::vector<std::size_t> order{0};
  EXPECT_EQ(pl_permutation_nll(s, order), 0.0);
}

TEST(PlPermutationNll, RejectsNonPermutation) {
  const std::vector<double> s{1, 2, 3};
  EXPECT_THROW(pl_permutation_nll(s, std::vector<std::size_t>{0, 0, 1}), std::invalid_argument);
  EXPECT_THROW(pl_permutation_nll(s, std::vector<std::size_t>{0, 1}), std::invalid_argument);
  EXPECT_THROW(pl_permutation_nll(s, std::vector<std::size_t>{0, 1, 3}), std::invalid_argument);
}

TEST(PairwiseDpoLoss, ChainOfThree) {
  const std::vector<double> s{1, 0, -1};
  const std::vector<double> labels{2, 1, 0};
  EXPECT_NEAR(pairwise_dpo_loss(s, adjacency_from_labels(labels)), 0.251151, 1e-6);
}

TEST(PairwiseDpoLoss, NoEdgesIsZero) {
  const std::vector<double> s{1, 0};
  const std::vector<double> labels{1, 1};
  testing::internal::CaptureStderr();
  EXPECT_EQ(pairwise_dpo_loss(s, adjacency_from_labels(labels)), 0.0);
  EXPECT_NE(testing::internal::GetCapturedStderr().find("warning"), std::string::npos);
}

TEST(NaiveDominatedLoss, StrictChainSumEqualsPlackettLuce) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 2 + rng() % 11;
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> labels(k), s(k);
    for (std::size_t r = 0; r < k; ++r) labels[order[r]] = double(k - r);
    for (double& v : s) v = normal(rng);
    const auto local = naive_local_losses(s, adjacency_from_labels(labels));
    const double sum = std::accumulate(local.begin(), local.end(), 0.0);
    ASSERT_NEAR(sum, pl_permutation_nll(s, order), 1e-9);
    ASSERT_NEAR(naive_dominated_loss(s, adjacency_from_labels(labels)), sum / double(k - 1),
                1e-12);
  }
}

TEST(NaiveDominatedLoss, TiesSeparateItFromPlackettLuce) {
  // Tied top pair: the dominated loss ignores their order, PL does not.
  const std::vector<double> s{0.3, -0.2, 0.5, -0.6};
  const std::vector<double> labels{1, 1, 0, 0};
  const auto adj = adjacency_from_labels(labels);
  const auto local = naive_local_losses(s, adj);
  const double sum = std::accumulate(local.begin(), local.end(), 0.0);
  const double pl = pl_permutation_nll(s, std::vector<std::size_t>{0, 1, 2, 3});
  EXPECT_GT(std::abs(sum - pl), 0.1);
  EXPECT_EQ(local[2], 0.0);
  EXPECT_EQ(local[3], 0.0);
}

TEST(AdjacencyFromLabels, StrictComparison) {
  const std::vector<double> labels{2, 2, 1};
  const auto adj = adjacency_from_labels(labels);
  EXPECT_FALSE(adj.at(0, 1));
  EXPECT_FALSE(adj.at(1, 0));
  EXPECT_TRUE(adj.at(0, 2));
  EXPECT_TRUE(adj.at(1, 2));
  EXPECT_FALSE(adj.at(2, 0));
}

}  // namespace
}  // namespace graphdpo::oracle
