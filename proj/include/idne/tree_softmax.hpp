#pragma once

// Hierarchical softmax over a random balanced binary word tree.
//
// The tree is a complete binary tree laid out as a heap of 2K-1 nodes:
// node j has children 2j+1 (left, bit 0) and 2j+2 (right, bit 1). Nodes
// 0..K-2 are internal (breadth-first numbering, root = 0) and index the rows
// of the output weight matrix; nodes K-1..2K-2 are leaves. Leaf slots are
// assigned words by a seeded permutation.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "idne/error.hpp"

namespace idne {

struct TreePath {
  std::vector<std::size_t> nodes;   // internal node indices, root first
  std::vector<std::uint8_t> bits;   // 0 = left, 1 = right

  std::size_t depth() const { return bits.size(); }
};

class BinaryWordTree {
 public:
  BinaryWordTree() = default;

  BinaryWordTree(std::size_t vocab_size, std::uint64_t seed) : vocab_size_(vocab_size), seed_(seed) {
    if (vocab_size < 2) throw DataError("binary word tree needs K >= 2 leaves");
    std::vector<std::size_t> word_of_slot(vocab_size);
    std::iota(word_of_slot.begin(), word_of_slot.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(word_of_slot.begin(), word_of_slot.end(), rng);

    paths_.resize(vocab_size);
    const std::size_t first_leaf = vocab_size - 1;
    for (std::size_t slot = 0; slot < vocab_size; ++slot) {
      TreePath& path = paths_[word_of_slot[slot]];
      std::size_t node = first_leaf + slot;
      while (node != 0) {
        std::size_t parent = (node - 1) / 2;
        path.nodes.push_back(parent);
        path.bits.push_back(node == 2 * parent + 2 ? 1 : 0);
        node = parent;
      }
      std::reverse(path.nodes.begin(), path.nodes.end());
      std::reverse(path.bits.begin(), path.bits.end());
    }
  }

  std::size_t leaf_count() const { return vocab_size_; }
  std::size_t internal_count() const { return vocab_size_ == 0 ? 0 : vocab_size_ - 1; }
  std::uint64_t seed() const { return seed_; }
  const TreePath& path(std::size_t word) const { return paths_.at(word); }

  std::size_t max_depth() const {
    std::size_t d = 0;
    for (const auto& p : paths_) d = std::max(d, p.depth());
    return d;
  }

 private:
  std::size_t vocab_size_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<TreePath> paths_;
};

inline BinaryWordTree build_word_tree(std::size_t vocab_size, std::uint64_t seed) {
  return BinaryWordTree(vocab_size, seed);
}

// Counts node evaluations across all leaf_log_probability calls; tests use it
// to check the logarithmic cost.
inline std::atomic<std::uint64_t>& tree_node_visits() {
  static std::atomic<std::uint64_t> visits{0};
  return visits;
}

// log sigmoid(x) and log(1 - sigmoid(x)) without overflow.
inline double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Node probability p(bit = 1) = sigmoid(bias_node + U_node . h).
inline double log_bernoulli_logit(std::uint8_t bit, double logit) {
  return bit ? log_sigmoid(logit) : log_sigmoid(-logit);
}

template <typename HiddenVec>
double leaf_log_probability(const HiddenVec& h, std::size_t word, const BinaryWordTree& tree,
                            const Eigen::MatrixXd& U, const Eigen::VectorXd& bias) {
  if (word >= tree.leaf_count()) throw DataError("word index out of range for tree");
  if (static_cast<std::size_t>(U.rows()) != tree.internal_count() || U.cols() != h.size() ||
      bias.size() != U.rows())
    throw DataError("tree softmax parameter shape mismatch");
  const TreePath& path = tree.path(word);
  double logp = 0.0;
  for (std::size_t m = 0; m < path.depth(); ++m) {
    const auto node = static_cast<Eigen::Index>(path.nodes[m]);
    logp += log_bernoulli_logit(path.bits[m], bias(node) + U.row(node).dot(h));
  }
  tree_node_visits().fetch_add(path.depth(), std::memory_order_relaxed);
  return logp;
}

}  // namespace idne
