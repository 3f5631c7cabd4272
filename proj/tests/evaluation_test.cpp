#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "idne/evaluation.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace idne {
namespace {

using testing::numbered_vocabulary;

Architecture arch(std::size_t H, std::size_t K, bool bidir, SoftmaxMode mode) {
  Architecture a;
  a.hidden = H;
  a.vocab_size = K;
  a.bidirectional = bidir;
  a.softmax = mode;
  return a;
}

Corpus random_corpus(std::size_t K, std::size_t docs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Corpus c;
  c.vocab = numbered_vocabulary(K);
  for (std::size_t n = 0; n < docs; ++n) c.documents.push_back(testing::random_document(K, 1 + n % 9, rng));
  return c;
}

TEST(Perplexity, ZeroModelEqualsVocabularySize) {
  Corpus c = random_corpus(4, 12, 1);
  auto r = perplexity_report(zero_model(arch(3, 4, true, SoftmaxMode::Full)), c);
  EXPECT_NEAR(r.fwd, 4.0, 1e-12);
  EXPECT_NEAR(*r.bwd, 4.0, 1e-12);
  EXPECT_NEAR(r.value, 4.0, 1e-12);
  EXPECT_NEAR(perplexity(zero_model(arch(3, 4, false, SoftmaxMode::Tree)), c), 4.0, 1e-12);
}

TEST(Perplexity, ConstantConditionalGivesInverse) {
  // Bias pinned so that word 0 has probability q at every position.
  Model m = zero_model(arch(2, 3, false, SoftmaxMode::Full));
  m.params.b_fwd << std::log(2.0), 0.0, 0.0;  // p(0) = 2/4
  Corpus c;
  c.vocab = numbered_vocabulary(3);
  Document d;
  d.words = {0, 0, 0, 0, 0};
  c.documents.push_back(d);
  EXPECT_NEAR(perplexity(m, c), 2.0, 1e-12);
}

TEST(Perplexity, BidirectionalReportsMeanOfDirections) {
  std::mt19937_64 rng(2);
  Model m = testing::random_model(arch(3, 6, true, SoftmaxMode::Full), rng);
  Corpus c = random_corpus(6, 20, 3);
  auto r = perplexity_report(m, c);
  EXPECT_NE(r.fwd, *r.bwd);
  EXPECT_DOUBLE_EQ(r.value, 0.5 * (r.fwd + *r.bwd));
}

TEST(Perplexity, IndependentOfThreadCount) {
  std::mt19937_64 rng(4);
  Model m = testing::random_model(arch(3, 6, true, SoftmaxMode::Tree), rng);
  Corpus c = random_corpus(6, 37, 5);
  ::setenv("IDNE_THREADS", "1", 1);
  const double one = perplexity(m, c);
  ::setenv("IDNE_THREADS", "4", 1);
  const double four = perplexity(m, c);
  ::unsetenv("IDNE_THREADS");
  EXPECT_EQ(one, four);
}

TEST(Perplexity, EmptyCorpusIsAnError) {
  Corpus c;
  c.vocab = numbered_vocabulary(3);
  EXPECT_THROW(perplexity(zero_model(arch(2, 3, false, SoftmaxMode::Full)), c), DataError);
}

std::vector<LabelSet> balanced_labels(std::size_t n) {
  std::vector<LabelSet> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({i % 2 ? "B" : "A"});
  return out;
}

TEST(Retrieval, PerfectClustersGivePrecisionOne) {
  std::vector<Eigen::VectorXd> train, test;
  Eigen::VectorXd a(2), b(2);
  a << 1.0, 0.0;
  b << 0.0, 1.0;
  for (int i = 0; i < 40; ++i) train.push_back(i % 2 ? b : a);
  for (int i = 0; i < 10; ++i) test.push_back(i % 2 ? b : a);
  auto curve = retrieval_precision(train, balanced_labels(40), test, balanced_labels(10), {0.02, 0.1, 0.5});
  for (auto [f, p] : curve) EXPECT_EQ(p, 1.0) << f;
}

TEST(Retrieval, RandomRepresentationsGiveBaseRate) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  auto draw = [&](std::size_t count) {
    std::vector<Eigen::VectorXd> v(count, Eigen::VectorXd(8));
    for (auto& x : v)
      for (Eigen::Index i = 0; i < 8; ++i) x(i) = n(rng);
    return v;
  };
  auto curve = retrieval_precision(draw(1000), balanced_labels(1000), draw(1000), balanced_labels(1000), {0.2});
  EXPECT_NEAR(curve.at(0.2), 0.5, 0.05);
}

TEST(Retrieval, InvariantUnderRotationAndScaling) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Eigen::VectorXd> train(60, Eigen::VectorXd(5)), test(20, Eigen::VectorXd(5));
  for (auto* set : {&train, &test})
    for (auto& x : *set)
      for (Eigen::Index i = 0; i < 5; ++i) x(i) = n(rng);
  Eigen::MatrixXd M(5, 5);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = n(rng);
  Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(M).householderQ();
  auto rotate = [&](std::vector<Eigen::VectorXd> v) {
    for (auto& x : v) x = 3.5 * (Q * x);
    return v;
  };
  std::vector<LabelSet> train_labels, test_labels;
  for (int i = 0; i < 60; ++i) train_labels.push_back({"c" + std::to_string(i % 3)});
  for (int i = 0; i < 20; ++i) test_labels.push_back({"c" + std::to_string(i % 3)});
  const std::vector<double> fractions{0.02, 0.1, 0.3};
  auto a = retrieval_precision(train, train_labels, test, test_labels, fractions);
  auto b = retrieval_precision(rotate(train), train_labels, rotate(test), test_labels, fractions);
  for (double f : fractions) EXPECT_NEAR(a.at(f), b.at(f), 1e-12);
}

TEST(Retrieval, MultiLabelQueriesAverageOverLabels) {
  Eigen::VectorXd x = Eigen::VectorXd::Ones(2);
  std::vector<Eigen::VectorXd> train{x, x};
  std::vector<LabelSet> train_labels{{"a"}, {"a"}};
  std::vector<LabelSet> test_labels{{"a", "b"}};
  auto curve = retrieval_precision(train, train_labels, {x}, test_labels, {1.0});
  EXPECT_DOUBLE_EQ(curve.at(1.0), 0.5);
}

TEST(Retrieval, RetrievesAtLeastOneDocument) {
  EXPECT_EQ(retrieval_count(0.0001, 500), 1u);
  EXPECT_EQ(retrieval_count(0.02, 500), 10u);
  EXPECT_EQ(retrieval_count(0.021, 500), 11u);
}

TEST(Retrieval, RequiresLabelsAndValidFractions) {
  Eigen::VectorXd x = Eigen::VectorXd::Ones(2);
  EXPECT_THROW(retrieval_precision({x}, {{}}, {x}, {{"a"}}, {0.5}), DataError);
  EXPECT_THROW(retrieval_precision({x}, {{"a"}}, {x}, {{"a"}}, {0.0}), DataError);
  EXPECT_THROW(retrieval_precision({x}, {{"a"}}, {x}, {{"a"}}, {1.5}), DataError);
  Corpus unlabeled = random_corpus(4, 3, 1);
  EXPECT_THROW(retrieval_precision(zero_model(arch(2, 4, false, SoftmaxMode::Full)), unlabeled, unlabeled, {0.5}),
               DataError);
}

TEST(TopicWords, RanksByWeightWithLexicographicTies) {
  Model m = zero_model(arch(2, 5, false, SoftmaxMode::Full));
  Vocabulary vocab({"e", "d", "c", "b", "a"});
  m.params.W(0, 2) = 1.0;
  EXPECT_EQ(topic_top_words(m, vocab, 0, 1), (std::vector<std::string>{"c"}));
  m.params.W(1, 0) = 2.0;
  m.params.W(1, 3) = 2.0;
  EXPECT_EQ(topic_top_words(m, vocab, 1, 3), (std::vector<std::string>{"b", "e", "a"}));
  EXPECT_THROW(topic_top_words(m, vocab, 0, 6), DataError);
  EXPECT_THROW(topic_top_words(m, vocab, 2, 1), DataError);
}

Corpus reference_from(const Vocabulary& vocab, std::vector<std::vector<WordId>> docs) {
  Corpus c;
  c.vocab = vocab;
  for (auto& w : docs) {
    Document d;
    d.words = std::move(w);
    c.documents.push_back(std::move(d));
  }
  return c;
}

TEST(Coherence, NpmiEndpoints) {
  EXPECT_EQ(npmi(0.5, 0.5, 1.0), 1.0);
  EXPECT_NEAR(npmi(0.3, 0.3, 0.3), 1.0, 1e-9);
  EXPECT_NEAR(npmi(0.5, 0.5, 0.25), 0.0, 1e-9);
  EXPECT_LT(npmi(0.5, 0.5, 0.0), -0.9);  // smoothed, so never exactly -1
}

TEST(Coherence, PerfectlyCoOccurringPairScoresOne) {
  Vocabulary vocab({"x", "y", "z"});
  Corpus ref = reference_from(vocab, {{0, 1}, {0, 1, 2}, {2, 2}, {1, 0}});
  auto r = coherence_npmi({{"x", "y"}}, ref, 10);
  EXPECT_NEAR(r.scores[0], 1.0, 1e-6);
  EXPECT_EQ(r.windows, 4u);
}

TEST(Coherence, IndependentWordsScoreNearZero) {
  Vocabulary vocab({"a", "b", "pad"});
  std::mt19937_64 rng(8);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::vector<WordId>> docs;
  for (int i = 0; i < 20000; ++i) {
    std::vector<WordId> d{2, 2};
    if (coin(rng)) d[0] = 0;
    if (coin(rng)) d[1] = 1;
    docs.push_back(d);
  }
  auto r = coherence_npmi({{"a", "b"}}, reference_from(vocab, docs), 2);
  EXPECT_LT(std::abs(r.scores[0]), 0.05);
}

TEST(Coherence, SlidingWindowCounts) {
  Vocabulary vocab({"a", "b", "c"});
  // Windows of 2 over [a b c a]: {a,b} {b,c} {c,a}.
  auto r = coherence_npmi({{"a", "b"}}, reference_from(vocab, {{0, 1, 2, 0}}), 2);
  EXPECT_EQ(r.windows, 3u);
  const double p_a = 2.0 / 3, p_b = 2.0 / 3, p_ab = 1.0 / 3;
  EXPECT_NEAR(r.scores[0], npmi(p_a, p_b, p_ab), 1e-15);
}

TEST(Coherence, MissingWordsAreSkippedAndReported) {
  Vocabulary vocab({"a", "b"});
  auto r = coherence_npmi({{"a", "b", "zzz"}}, reference_from(vocab, {{0, 1}}), 5);
  EXPECT_EQ(r.missing_words, (std::vector<std::string>{"zzz"}));
  EXPECT_EQ(r.skipped_pairs, 2u);
  EXPECT_THROW(coherence_npmi({{"a"}}, reference_from(vocab, {{0}}), 1), DataError);
}

TEST(Coherence, BoundedAndInvariantToDocumentOrder) {
  std::mt19937_64 rng(9);
  Corpus ref = random_corpus(12, 200, 10);
  std::vector<std::vector<std::string>> topics{{"w000", "w001", "w002", "w003"}, {"w004", "w007", "w011"}};
  auto a = coherence_npmi(topics, ref, 4);
  std::shuffle(ref.documents.begin(), ref.documents.end(), rng);
  auto b = coherence_npmi(topics, ref, 4);
  for (std::size_t t = 0; t < topics.size(); ++t) {
    EXPECT_GE(a.scores[t], -1.0);
    EXPECT_LE(a.scores[t], 1.0);
    EXPECT_EQ(a.scores[t], b.scores[t]);
  }
}

TEST(Neighbors, DuplicateAndOrthogonalColumns) {
  Model m = zero_model(arch(3, 4, false, SoftmaxMode::Full));
  Vocabulary vocab({"a", "b", "c", "d"});
  m.params.W.col(0) << 1, 2, 0;
  m.params.W.col(1) << 1, 2, 0;
  m.params.W.col(2) << 0, 0, 5;
  m.params.W.col(3) << -1, -2, 0;
  auto n = nearest_neighbors(m, vocab, "a", 3);
  ASSERT_EQ(n.size(), 3u);
  EXPECT_EQ(n[0].first, "b");
  EXPECT_NEAR(n[0].second, 1.0, 1e-15);
  EXPECT_EQ(n[1].first, "c");
  EXPECT_EQ(n[1].second, 0.0);
  EXPECT_NEAR(n[2].second, -1.0, 1e-15);
  EXPECT_THROW(nearest_neighbors(m, vocab, "nope", 2), DataError);
}

TEST(Classification, SeparableBlobsAreClassifiedPerfectly) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 0.3);
  auto draw = [&](std::size_t count, std::vector<LabelSet>& labels) {
    std::vector<Eigen::VectorXd> reps;
    for (std::size_t i = 0; i < count; ++i) {
      const bool pos = i % 2;
      Eigen::VectorXd x(3);
      x << (pos ? 2.0 : -2.0) + n(rng), n(rng), n(rng);
      reps.push_back(x);
      labels.push_back({pos ? "pos" : "neg"});
    }
    return reps;
  };
  std::vector<LabelSet> yl, tl;
  auto X = draw(200, yl), T = draw(100, tl);
  auto r = evaluate_classification(X, yl, T, tl, 1e-3);
  EXPECT_FALSE(r.multi_label);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.macro_f1, 1.0);
  auto again = evaluate_classification(X, yl, T, tl, 1e-3);
  EXPECT_EQ(again.accuracy, r.accuracy);
  EXPECT_EQ(again.iterations, r.iterations);
}

TEST(Classification, ShuffledLabelsGiveChance) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  auto draw = [&](std::size_t count, std::vector<LabelSet>& labels) {
    std::vector<Eigen::VectorXd> reps;
    for (std::size_t i = 0; i < count; ++i) {
      Eigen::VectorXd x(4);
      for (Eigen::Index k = 0; k < 4; ++k) x(k) = n(rng);
      reps.push_back(x);
      labels.push_back({i % 2 ? "a" : "b"});
    }
    std::shuffle(labels.begin(), labels.end(), rng);
    return reps;
  };
  std::vector<LabelSet> yl, tl;
  auto X = draw(1000, yl), T = draw(2000, tl);
  auto r = evaluate_classification(X, yl, T, tl, 1e-2);
  EXPECT_NEAR(r.accuracy, 0.5, 0.05);
}

TEST(Classification, MultiLabelUsesExactSetAccuracy) {
  std::vector<Eigen::VectorXd> X;
  std::vector<LabelSet> labels;
  for (int i = 0; i < 40; ++i) {
    Eigen::VectorXd x(2);
    const bool a = i % 2, b = (i / 2) % 2;
    x << (a ? 1.0 : -1.0), (b ? 1.0 : -1.0);
    X.push_back(x);
    LabelSet ls;
    if (a) ls.push_back("a");
    if (b) ls.push_back("b");
    if (ls.empty()) ls.push_back("none");
    labels.push_back(ls);
  }
  auto r = evaluate_classification(X, labels, X, labels, 1e-4);
  EXPECT_TRUE(r.multi_label);
  EXPECT_EQ(r.accuracy, 1.0);
}

TEST(Classification, SingleClassIsAnError) {
  std::vector<Eigen::VectorXd> X{Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(2)};
  std::vector<LabelSet> labels{{"a"}, {"a"}};
  EXPECT_THROW(evaluate_classification(X, labels, X, labels, 0.0), DataError);
}

TEST(Classification, GloveSumBaseline) {
  EmbeddingPrior prior;
  prior.E = Eigen::MatrixXd::Zero(2, 3);
  prior.E.col(0) << 1, 2;
  prior.E.col(2) << 10, 20;
  Document d;
  d.words = {0, 2, 0, 1};
  Eigen::VectorXd expected(2);
  expected << 12, 24;
  EXPECT_EQ(glove_sum_representation(d, prior), expected);
}

}  // namespace
}  // namespace idne
