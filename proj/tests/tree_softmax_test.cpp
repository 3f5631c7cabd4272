#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "idne/tree_softmax.hpp"

namespace idne {
namespace {

TEST(BuildWordTree, SmallestTree) {
  auto tree = build_word_tree(2, 7);
  EXPECT_EQ(tree.internal_count(), 1u);
  for (std::size_t w = 0; w < 2; ++w) {
    EXPECT_EQ(tree.path(w).depth(), 1u);
    EXPECT_EQ(tree.path(w).nodes[0], 0u);
  }
  EXPECT_NE(tree.path(0).bits[0], tree.path(1).bits[0]);
}

TEST(BuildWordTree, FullTreeOfFour) {
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    auto tree = build_word_tree(4, seed);
    EXPECT_EQ(tree.internal_count(), 3u);
    for (std::size_t w = 0; w < 4; ++w) EXPECT_EQ(tree.path(w).depth(), 2u);
  }
}

TEST(BuildWordTree, FiveLeavesHaveDepthsTwoAndThree) {
  // Heap with 9 nodes: leaves 4,5,6 sit at depth 2 and 7,8 at depth 3.
  auto tree = build_word_tree(5, 3);
  std::multiset<std::size_t> depths;
  for (std::size_t w = 0; w < 5; ++w) depths.insert(tree.path(w).depth());
  EXPECT_EQ(depths, (std::multiset<std::size_t>{2, 2, 2, 3, 3}));
  EXPECT_EQ(tree.max_depth(), 3u);
}

TEST(BuildWordTree, StructuralInvariants) {
  for (std::size_t K = 2; K <= 70; ++K) {
    auto tree = build_word_tree(K, K * 31);
    const auto ceil_log2 = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(K))));
    std::size_t min_depth = 1000, max_depth = 0;
    std::set<std::vector<std::uint8_t>> codes;
    for (std::size_t w = 0; w < K; ++w) {
      const auto& p = tree.path(w);
      ASSERT_EQ(p.nodes.front(), 0u) << "path must start at the root";
      for (auto n : p.nodes) ASSERT_LT(n, tree.internal_count());
      min_depth = std::min(min_depth, p.depth());
      max_depth = std::max(max_depth, p.depth());
      codes.insert(p.bits);
    }
    EXPECT_EQ(codes.size(), K) << "every word owns a distinct leaf";
    EXPECT_LE(max_depth - min_depth, 1u);
    EXPECT_EQ(max_depth, ceil_log2);
  }
}

TEST(BuildWordTree, DeterministicPerSeedAndSeedMatters) {
  auto a = build_word_tree(33, 5), b = build_word_tree(33, 5), c = build_word_tree(33, 6);
  bool differs = false;
  for (std::size_t w = 0; w < 33; ++w) {
    EXPECT_EQ(a.path(w).bits, b.path(w).bits);
    EXPECT_EQ(a.path(w).nodes, b.path(w).nodes);
    differs = differs || a.path(w).bits != c.path(w).bits;
  }
  EXPECT_TRUE(differs);
}

TEST(BuildWordTree, RejectsTinyVocabulary) {
  EXPECT_THROW(build_word_tree(1, 0), DataError);
  EXPECT_THROW(build_word_tree(0, 0), DataError);
}

TEST(LeafLogProbability, ZeroParametersGiveUniformLeaves) {
  for (std::size_t K : {4u, 8u}) {
    auto tree = build_word_tree(K, 1);
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K - 1), 3);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K - 1));
    Eigen::VectorXd h = Eigen::VectorXd::Random(3);
    for (std::size_t w = 0; w < K; ++w)
      EXPECT_NEAR(leaf_log_probability(h, w, tree, U, b), std::log(1.0 / static_cast<double>(K)), 1e-15);
  }
}

TEST(LeafLogProbability, NormalizesOverAllLeaves) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 2.0);
  for (std::size_t K : {2u, 3u, 4u, 5u, 8u, 16u, 17u, 33u, 64u}) {
    auto tree = build_word_tree(K, K);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::Index H = 4;
      Eigen::MatrixXd U(static_cast<Eigen::Index>(K - 1), H);
      Eigen::VectorXd b(static_cast<Eigen::Index>(K - 1)), h(H);
      for (Eigen::Index i = 0; i < U.size(); ++i) U.data()[i] = n(rng);
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = n(rng);
      for (Eigen::Index i = 0; i < H; ++i) h(i) = n(rng);
      double total = 0.0;
      for (std::size_t w = 0; w < K; ++w) total += std::exp(leaf_log_probability(h, w, tree, U, b));
      EXPECT_NEAR(total, 1.0, 1e-10) << "K=" << K;
    }
  }
}

TEST(LeafLogProbability, TouchesOnlyPathNodes) {
  const std::size_t K = 1000;
  auto tree = build_word_tree(K, 2);
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K - 1), 2);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K - 1));
  Eigen::VectorXd h = Eigen::VectorXd::Ones(2);
  for (std::size_t w : {0u, 17u, 999u}) {
    const auto before = tree_node_visits().load();
    leaf_log_probability(h, w, tree, U, b);
    const auto visited = tree_node_visits().load() - before;
    EXPECT_EQ(visited, tree.path(w).depth());
    EXPECT_LE(visited, 10u);  // ceil(log2 1000)
  }
}

TEST(LeafLogProbability, ExtremeLogitsStayFinite) {
  auto tree = build_word_tree(4, 0);
  Eigen::MatrixXd U = Eigen::MatrixXd::Constant(3, 1, 1e4);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd h = Eigen::VectorXd::Ones(1);
  double total = 0.0;
  for (std::size_t w = 0; w < 4; ++w) {
    double lp = leaf_log_probability(h, w, tree, U, b);
    EXPECT_FALSE(std::isnan(lp));
    total += std::exp(lp);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(LeafLogProbability, ShapeMismatchThrows) {
  auto tree = build_word_tree(4, 0);
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(4, 2);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(4);
  EXPECT_THROW(leaf_log_probability(Eigen::VectorXd::Zero(2).eval(), 0, tree, U, b), DataError);
}

}  // namespace
}  // namespace idne
