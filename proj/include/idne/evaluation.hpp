#pragma once

// Held-out perplexity, document retrieval precision, topic words with
// sliding-window NPMI coherence, word nearest neighbours, and logistic
// regression text categorization over document representations.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "idne/corpus.hpp"
#include "idne/error.hpp"
#include "idne/model.hpp"
#include "idne/parallel.hpp"

namespace idne {

using LabelSet = std::vector<std::string>;

// ---------------------------------------------------------------------------
// Perplexity

struct PerplexityReport {
  double fwd = 0.0;
  std::optional<double> bwd;
  double value = 0.0;  // fwd, or the mean of fwd and bwd for bidirectional models
};

// exp(-(1/N) sum_t log p(v_t) / |v_t|) per direction. Bidirectional models
// report the arithmetic mean of the two directional perplexities.
inline PerplexityReport perplexity_report(const Model& model, const Corpus& corpus) {
  if (corpus.empty()) throw DataError("perplexity of an empty corpus");
  const std::size_t n = corpus.size();
  std::vector<double> per_word_fwd(n), per_word_bwd(n);
  parallel_for(n, [&](std::size_t t) {
    const auto& doc = corpus.documents[t];
    auto ll = document_log_likelihood(doc, model);
    per_word_fwd[t] = ll.log_fwd / static_cast<double>(doc.size());
    if (ll.log_bwd) per_word_bwd[t] = *ll.log_bwd / static_cast<double>(doc.size());
  });
  auto mean = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(n);
  };
  PerplexityReport r;
  r.fwd = std::exp(-mean(per_word_fwd));
  if (model.params.bidirectional) {
    r.bwd = std::exp(-mean(per_word_bwd));
    r.value = 0.5 * (r.fwd + *r.bwd);
  } else {
    r.value = r.fwd;
  }
  return r;
}

inline double perplexity(const Model& model, const Corpus& corpus) { return perplexity_report(model, corpus).value; }

// ---------------------------------------------------------------------------
// Document retrieval

using IrCurve = std::map<double, double>;  // fraction -> mean precision

inline std::vector<Eigen::VectorXd> document_representations(const Model& model, const Corpus& corpus) {
  std::vector<Eigen::VectorXd> reps(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) { reps[i] = document_representation(corpus.documents[i], model); });
  return reps;
}

inline std::vector<LabelSet> labels_of(const Corpus& corpus) {
  std::vector<LabelSet> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus.documents) out.push_back(d.labels);
  return out;
}

inline std::size_t retrieval_count(double fraction, std::size_t pool) {
  auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool)));
  return std::clamp<std::size_t>(n, 1, pool);
}

// Every test vector queries the training pool by cosine similarity; for each
// fraction f the top ceil(f * |train|) (at least 1) are retrieved and the
// precision is the share carrying the query's label, averaged over the
// query's labels when it has several.
inline IrCurve retrieval_precision(const std::vector<Eigen::VectorXd>& train_reps,
                                   const std::vector<LabelSet>& train_labels,
                                   const std::vector<Eigen::VectorXd>& test_reps,
                                   const std::vector<LabelSet>& test_labels, const std::vector<double>& fractions) {
  if (train_reps.size() != train_labels.size() || test_reps.size() != test_labels.size())
    throw DataError("representation/label count mismatch");
  if (train_reps.empty() || test_reps.empty()) throw DataError("retrieval needs non-empty train and test sets");
  if (fractions.empty()) throw DataError("no retrieval fractions given");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw DataError("retrieval fraction must lie in (0, 1]");
  for (const auto& l : train_labels)
    if (l.empty()) throw DataError("retrieval requires labeled documents (unlabeled train document)");
  for (const auto& l : test_labels)
    if (l.empty()) throw DataError("retrieval requires labeled documents (unlabeled test document)");

  const std::size_t pool = train_reps.size();
  std::vector<double> train_norm(pool);
  for (std::size_t j = 0; j < pool; ++j) train_norm[j] = train_reps[j].norm();
  std::size_t max_n = 0;
  for (double f : fractions) max_n = std::max(max_n, retrieval_count(f, pool));

  // precision[q][k] for fraction k
  std::vector<std::vector<double>> precision(test_reps.size(), std::vector<double>(fractions.size()));
  parallel_for(test_reps.size(), [&](std::size_t q) {
    const auto& query = test_reps[q];
    const double qn = query.norm();
    std::vector<double> sim(pool);
    for (std::size_t j = 0; j < pool; ++j) {
      const double denom = qn * train_norm[j];
      sim[j] = denom > 0.0 ? query.dot(train_reps[j]) / denom : 0.0;
    }
    std::vector<std::size_t> order(pool);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(max_n), order.end(),
                      [&](std::size_t a, std::size_t b) { return sim[a] != sim[b] ? sim[a] > sim[b] : a < b; });
    for (std::size_t k = 0; k < fractions.size(); ++k) {
      const std::size_t n = retrieval_count(fractions[k], pool);
      double total = 0.0;
      for (const auto& label : test_labels[q]) {
        std::size_t hits = 0;
        for (std::size_t r = 0; r < n; ++r) {
          const auto& tl = train_labels[order[r]];
          if (std::binary_search(tl.begin(), tl.end(), label)) ++hits;
        }
        total += static_cast<double>(hits) / static_cast<double>(n);
      }
      precision[q][k] = total / static_cast<double>(test_labels[q].size());
    }
  });

  IrCurve curve;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    double s = 0.0;
    for (const auto& row : precision) s += row[k];
    curve[fractions[k]] = s / static_cast<double>(precision.size());
  }
  return curve;
}

inline IrCurve retrieval_precision(const Model& model, const Corpus& train, const Corpus& test,
                                   const std::vector<double>& fractions) {
  if (!train.has_labels() || !test.has_labels()) throw DataError("retrieval requires labeled corpora");
  return retrieval_precision(document_representations(model, train), labels_of(train),
                             document_representations(model, test), labels_of(test), fractions);
}

// ---------------------------------------------------------------------------
// Topics and coherence

// The n tokens with the largest W[topic, w]; equal weights order lexicographically.
inline std::vector<std::string> topic_top_words(const Model& model, const Vocabulary& vocab, std::size_t topic,
                                                std::size_t n) {
  const auto& W = model.params.W;
  if (vocab.size() != model.params.vocab_size) throw DataError("vocabulary does not match model");
  if (topic >= model.params.hidden) throw DataError("topic index out of range");
  if (n > vocab.size()) throw DataError("requested more top words than the vocabulary holds");
  std::vector<std::size_t> order(vocab.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto row = static_cast<Eigen::Index>(topic);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double wa = W(row, static_cast<Eigen::Index>(a));
                      const double wb = W(row, static_cast<Eigen::Index>(b));
                      return wa != wb ? wa > wb : vocab.token(a) < vocab.token(b);
                    });
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(vocab.token(order[i]));
  return out;
}

struct CoherenceReport {
  std::vector<double> scores;  // per topic, mean pairwise NPMI in [-1, 1]
  double mean = 0.0;
  std::vector<std::string> missing_words;  // topic words absent from the reference vocabulary or never seen
  std::size_t skipped_pairs = 0;
  std::size_t windows = 0;
};

inline constexpr double kNpmiSmoothing = 1e-12;

inline double npmi(double p1, double p2, double p12) {
  // Words present in every window are perfectly associated; the formula is 0/0 there.
  if (p12 >= 1.0) return 1.0;
  const double joint = p12 + kNpmiSmoothing;
  const double value = std::log(joint / (p1 * p2)) / -std::log(joint);
  return std::clamp(value, -1.0, 1.0);
}

// Mean pairwise NPMI per topic. A window of `window` consecutive tokens slides
// over every reference document one position at a time; documents shorter
// than the window form a single window.
inline CoherenceReport coherence_npmi(const std::vector<std::vector<std::string>>& topics, const Corpus& reference,
                                      std::size_t window) {
  if (window < 2) throw DataError("coherence window must be >= 2");
  const auto& vocab = reference.vocab;
  const std::size_t npos = std::numeric_limits<std::size_t>::max();

  // Topic words that exist in the reference vocabulary get a dense local id.
  std::vector<std::size_t> local_of(vocab.size(), npos);
  std::vector<WordId> global_of;
  std::set<std::string> missing;
  for (const auto& topic : topics)
    for (const auto& tok : topic) {
      auto id = vocab.index_of(tok);
      if (!id) {
        missing.insert(tok);
        continue;
      }
      if (local_of[*id] == npos) {
        local_of[*id] = global_of.size();
        global_of.push_back(*id);
      }
    }
  auto pair_key = [](std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
  };
  std::unordered_map<std::uint64_t, std::uint64_t> pair_counts;
  for (const auto& topic : topics)
    for (std::size_t i = 0; i < topic.size(); ++i)
      for (std::size_t j = i + 1; j < topic.size(); ++j) {
        auto a = vocab.index_of(topic[i]);
        auto b = vocab.index_of(topic[j]);
        if (a && b && *a != *b) pair_counts.emplace(pair_key(local_of[*a], local_of[*b]), 0);
      }

  std::vector<std::uint64_t> single(global_of.size(), 0);
  std::vector<std::uint8_t> seen(global_of.size(), 0);
  std::vector<std::size_t> present;
  std::uint64_t windows = 0;
  auto count_window = [&](const std::vector<WordId>& words, std::size_t begin, std::size_t end) {
    present.clear();
    for (std::size_t i = begin; i < end; ++i) {
      const auto local = local_of[words[i]];
      if (local != npos && !seen[local]) {
        seen[local] = 1;
        present.push_back(local);
      }
    }
    for (std::size_t i = 0; i < present.size(); ++i) {
      ++single[present[i]];
      for (std::size_t j = i + 1; j < present.size(); ++j) {
        auto it = pair_counts.find(pair_key(present[i], present[j]));
        if (it != pair_counts.end()) ++it->second;
      }
    }
    for (auto local : present) seen[local] = 0;
    ++windows;
  };
  for (const auto& doc : reference.documents) {
    const auto& words = doc.words;
    if (words.size() <= window) {
      count_window(words, 0, words.size());
    } else {
      for (std::size_t s = 0; s + window <= words.size(); ++s) count_window(words, s, s + window);
    }
  }

  CoherenceReport report;
  report.windows = static_cast<std::size_t>(windows);
  for (std::size_t g = 0; g < global_of.size(); ++g)
    if (single[g] == 0) missing.insert(vocab.token(global_of[g]));
  report.missing_words.assign(missing.begin(), missing.end());

  const double total = static_cast<double>(windows);
  double sum_scores = 0.0;
  for (const auto& topic : topics) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < topic.size(); ++i)
      for (std::size_t j = i + 1; j < topic.size(); ++j) {
        auto a = vocab.index_of(topic[i]);
        auto b = vocab.index_of(topic[j]);
        if (!a || !b || *a == *b || single[local_of[*a]] == 0 || single[local_of[*b]] == 0) {
          ++report.skipped_pairs;
          continue;
        }
        const double p1 = static_cast<double>(single[local_of[*a]]) / total;
        const double p2 = static_cast<double>(single[local_of[*b]]) / total;
        const double p12 = static_cast<double>(pair_counts.at(pair_key(local_of[*a], local_of[*b]))) / total;
        sum += npmi(p1, p2, p12);
        ++pairs;
      }
    const double score = pairs ? sum / static_cast<double>(pairs) : 0.0;
    report.scores.push_back(score);
    sum_scores += score;
  }
  report.mean = topics.empty() ? 0.0 : sum_scores / static_cast<double>(topics.size());
  return report;
}

// ---------------------------------------------------------------------------
// Word neighbours

inline std::vector<std::pair<std::string, double>> nearest_neighbors(const Model& model, const Vocabulary& vocab,
                                                                     const std::string& word, std::size_t n) {
  if (vocab.size() != model.params.vocab_size) throw DataError("vocabulary does not match model");
  auto id = vocab.index_of(word);
  if (!id) throw DataError("query word '" + word + "' is not in the vocabulary");
  const auto& W = model.params.W;
  const auto q = static_cast<Eigen::Index>(*id);
  const double qn = W.col(q).norm();
  std::vector<std::pair<std::size_t, double>> sims;
  sims.reserve(vocab.size());
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    if (j == q) continue;
    const double denom = qn * W.col(j).norm();
    sims.emplace_back(static_cast<std::size_t>(j), denom > 0.0 ? W.col(q).dot(W.col(j)) / denom : 0.0);
  }
  n = std::min(n, sims.size());
  std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(n), sims.end(),
                    [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(vocab.token(sims[i].first), sims[i].second);
  return out;
}

// ---------------------------------------------------------------------------
// Text categorization

// Unweighted sum of the prior's embedding columns over the document's words.
inline Eigen::VectorXd glove_sum_representation(const Document& doc, const EmbeddingPrior& prior) {
  Eigen::VectorXd rep = Eigen::VectorXd::Zero(prior.E.rows());
  for (auto w : doc.words) rep += prior.E.col(static_cast<Eigen::Index>(w));
  return rep;
}

struct ClassificationReport {
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  bool multi_label = false;
  std::size_t iterations = 0;  // largest gradient-descent iteration count over the fitted models
};

inline constexpr double kClassifierGradTolerance = 1e-5;
inline constexpr std::size_t kClassifierMaxIterations = 2000;

namespace detail {

// Full-batch gradient descent with Armijo backtracking on a smooth convex
// objective. `objective(params, grad)` returns f and fills grad.
template <typename Objective>
std::size_t minimize_convex(Eigen::VectorXd& x, Objective&& objective) {
  Eigen::VectorXd grad(x.size()), trial_grad(x.size());
  double f = objective(x, grad);
  double step = 1.0;
  std::size_t it = 0;
  for (; it < kClassifierMaxIterations; ++it) {
    const double gnorm2 = grad.squaredNorm();
    if (std::sqrt(gnorm2) < kClassifierGradTolerance) break;
    step = std::min(step * 2.0, 1e4);
    Eigen::VectorXd trial;
    double f_trial = 0.0;
    while (true) {
      trial = x - step * grad;
      f_trial = objective(trial, trial_grad);
      if (f_trial <= f - 0.5 * step * gnorm2 || step < 1e-12) break;
      step *= 0.5;
    }
    x = std::move(trial);
    f = f_trial;
    grad.swap(trial_grad);
  }
  return it;
}

struct Standardizer {
  Eigen::VectorXd mean, scale;

  explicit Standardizer(const Eigen::MatrixXd& X) {  // X: d x N
    mean = X.rowwise().mean();
    scale = ((X.colwise() - mean).array().square().rowwise().mean()).sqrt().matrix();
    for (Eigen::Index i = 0; i < scale.size(); ++i)
      if (!(scale(i) > 1e-12)) scale(i) = 1.0;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    return ((X.colwise() - mean).array().colwise() / scale.array()).matrix();
  }
};

inline Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& reps) {
  if (reps.empty()) throw DataError("no representations given");
  Eigen::MatrixXd X(reps.front().size(), static_cast<Eigen::Index>(reps.size()));
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (reps[i].size() != X.rows()) throw DataError("inconsistent representation dimensions");
    X.col(static_cast<Eigen::Index>(i)) = reps[i];
  }
  return X;
}

// Multinomial logistic regression; x packs W (C x d, column-major) then b (C).
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> fit_softmax_regression(const Eigen::MatrixXd& X,
                                                                           const std::vector<std::size_t>& y,
                                                                           std::size_t classes, double l2,
                                                                           std::size_t& iterations) {
  const Eigen::Index d = X.rows(), N = X.cols(), C = static_cast<Eigen::Index>(classes);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(C, N);
  for (Eigen::Index i = 0; i < N; ++i) Y(static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)]), i) = 1.0;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(C * d + C);
  auto objective = [&](const Eigen::VectorXd& params, Eigen::VectorXd& grad) {
    Eigen::Map<const Eigen::MatrixXd> W(params.data(), C, d);
    Eigen::Map<const Eigen::VectorXd> b(params.data() + C * d, C);
    Eigen::MatrixXd logits = W * X;
    logits.colwise() += b;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      const double mx = logits.col(i).maxCoeff();
      const double lse = mx + std::log((logits.col(i).array() - mx).exp().sum());
      logits.col(i) = (logits.col(i).array() - lse).exp().matrix();
      loss -= std::log(std::max((Y.col(i).array() * logits.col(i).array()).sum(), 1e-300));
    }
    Eigen::MatrixXd delta = (logits - Y) / static_cast<double>(N);
    Eigen::Map<Eigen::MatrixXd> gW(grad.data(), C, d);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + C * d, C);
    gW = delta * X.transpose() + l2 * W;
    gb = delta.rowwise().sum();
    return loss / static_cast<double>(N) + 0.5 * l2 * W.squaredNorm();
  };
  iterations = minimize_convex(x, objective);
  Eigen::MatrixXd W = Eigen::Map<Eigen::MatrixXd>(x.data(), C, d);
  Eigen::VectorXd b = Eigen::Map<Eigen::VectorXd>(x.data() + C * d, C);
  return {W, b};
}

// Binary logistic regression; x packs w (d) then b.
inline std::pair<Eigen::VectorXd, double> fit_binary_regression(const Eigen::MatrixXd& X,
                                                                 const Eigen::VectorXd& target, double l2,
                                                                 std::size_t& iterations) {
  const Eigen::Index d = X.rows(), N = X.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d + 1);
  auto objective = [&](const Eigen::VectorXd& params, Eigen::VectorXd& grad) {
    const auto w = params.head(d);
    const double b = params(d);
    Eigen::VectorXd z = (X.transpose() * w).array() + b;
    double loss = 0.0;
    Eigen::VectorXd resid(N);
    for (Eigen::Index i = 0; i < N; ++i) {
      loss -= target(i) > 0.5 ? log_sigmoid(z(i)) : log_sigmoid(-z(i));
      resid(i) = sigmoid(z(i)) - target(i);
    }
    grad.head(d) = X * resid / static_cast<double>(N) + l2 * w;
    grad(d) = resid.mean();
    return loss / static_cast<double>(N) + 0.5 * l2 * w.squaredNorm();
  };
  iterations = minimize_convex(x, objective);
  return {x.head(d), x(d)};
}

inline double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double denom = static_cast<double>(2 * tp + fp + fn);
  return denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
}

}  // namespace detail

// L2-regularized logistic regression on the training representations,
// evaluated on the test set. Single-label data uses one multinomial model;
// data where any document has several labels uses one-vs-rest binary models
// with a 0.5 threshold, and accuracy becomes exact label-set match. Features
// are standardized with training statistics. F1 is macro-averaged.
inline ClassificationReport evaluate_classification(const std::vector<Eigen::VectorXd>& train_reps,
                                                    const std::vector<LabelSet>& train_labels,
                                                    const std::vector<Eigen::VectorXd>& test_reps,
                                                    const std::vector<LabelSet>& test_labels, double l2) {
  if (train_reps.size() != train_labels.size() || test_reps.size() != test_labels.size())
    throw DataError("representation/label count mismatch");
  if (!(l2 >= 0.0)) throw DataError("l2 strength must be >= 0");
  const Eigen::MatrixXd raw_train = detail::stack(train_reps);
  const Eigen::MatrixXd raw_test = detail::stack(test_reps);
  if (raw_train.rows() != raw_test.rows()) throw DataError("train/test representation dimensions differ");

  bool multi = false;
  std::set<std::string> label_set;
  for (const auto& ls : train_labels) {
    if (ls.empty()) throw DataError("classification requires a label on every document");
    multi = multi || ls.size() > 1;
    label_set.insert(ls.begin(), ls.end());
  }
  for (const auto& ls : test_labels) {
    if (ls.empty()) throw DataError("classification requires a label on every document");
    multi = multi || ls.size() > 1;
  }
  if (label_set.size() < 2) throw DataError("classification needs at least 2 distinct training labels");
  std::vector<std::string> classes(label_set.begin(), label_set.end());

  const detail::Standardizer standardizer(raw_train);
  const Eigen::MatrixXd X = standardizer.apply(raw_train);
  const Eigen::MatrixXd Xt = standardizer.apply(raw_test);

  std::vector<LabelSet> predicted(test_reps.size());
  ClassificationReport report;
  report.multi_label = multi;
  if (!multi) {
    std::vector<std::size_t> y;
    y.reserve(train_labels.size());
    for (const auto& ls : train_labels)
      y.push_back(static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), ls[0]) - classes.begin()));
    auto [W, b] = detail::fit_softmax_regression(X, y, classes.size(), l2, report.iterations);
    Eigen::MatrixXd scores = W * Xt;
    scores.colwise() += b;
    for (Eigen::Index i = 0; i < scores.cols(); ++i) {
      Eigen::Index best = 0;
      scores.col(i).maxCoeff(&best);
      predicted[static_cast<std::size_t>(i)] = {classes[static_cast<std::size_t>(best)]};
    }
  } else {
    for (const auto& cls : classes) {
      Eigen::VectorXd target(X.cols());
      for (std::size_t i = 0; i < train_labels.size(); ++i)
        target(static_cast<Eigen::Index>(i)) =
            std::binary_search(train_labels[i].begin(), train_labels[i].end(), cls) ? 1.0 : 0.0;
      std::size_t iters = 0;
      auto [w, b] = detail::fit_binary_regression(X, target, l2, iters);
      report.iterations = std::max(report.iterations, iters);
      Eigen::VectorXd z = (Xt.transpose() * w).array() + b;
      for (Eigen::Index i = 0; i < z.size(); ++i)
        if (sigmoid(z(i)) > 0.5) predicted[static_cast<std::size_t>(i)].push_back(cls);
    }
  }

  std::set<std::string> all_labels(label_set);
  for (const auto& ls : test_labels) all_labels.insert(ls.begin(), ls.end());
  std::size_t exact = 0;
  for (std::size_t i = 0; i < test_labels.size(); ++i) exact += predicted[i] == test_labels[i] ? 1 : 0;
  report.accuracy = static_cast<double>(exact) / static_cast<double>(test_labels.size());

  double f1_sum = 0.0;
  std::size_t counted = 0;
  for (const auto& cls : all_labels) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < test_labels.size(); ++i) {
      const bool gold = std::binary_search(test_labels[i].begin(), test_labels[i].end(), cls);
      const bool pred = std::find(predicted[i].begin(), predicted[i].end(), cls) != predicted[i].end();
      tp += gold && pred;
      fp += !gold && pred;
      fn += gold && !pred;
    }
    if (tp + fp + fn == 0) continue;
    f1_sum += detail::f1(tp, fp, fn);
    ++counted;
  }
  report.macro_f1 = counted ? f1_sum / static_cast<double>(counted) : 0.0;
  return report;
}

}  // namespace idne
