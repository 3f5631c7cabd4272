#pragma once

// Exact gradients of the document negative log-likelihood, per-document SGD,
// early stopping on validation perplexity, and mixture-weight grid search.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "idne/corpus.hpp"
#include "idne/error.hpp"
#include "idne/evaluation.hpp"
#include "idne/model.hpp"
#include "idne/model_io.hpp"

namespace idne {

struct DeepLayerGradient {
  Eigen::MatrixXd dW;
  Eigen::VectorXd dc_fwd;
  Eigen::VectorXd dc_bwd;
};

// Shapes mirror Model; the embedding prior never receives a gradient.
struct GradientSet {
  Eigen::MatrixXd dW;
  Eigen::MatrixXd dU;
  Eigen::VectorXd db_fwd, db_bwd;
  Eigen::VectorXd dc_fwd, dc_bwd;
  std::vector<DeepLayerGradient> deep;
  double objective = 0.0;  // value of the differentiated loss at the current parameters

  bool all_finite() const {
    bool ok = dW.allFinite() && dU.allFinite() && db_fwd.allFinite() && db_bwd.allFinite() && dc_fwd.allFinite() &&
              dc_bwd.allFinite() && std::isfinite(objective);
    for (const auto& g : deep) ok = ok && g.dW.allFinite() && g.dc_fwd.allFinite() && g.dc_bwd.allFinite();
    return ok;
  }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::uint64_t seed = 1;
  std::size_t patience = 10;  // 0 disables early stopping
  std::vector<double> lambda_grid{0.1, 0.5, 1.0};
  std::optional<double> lambda;
  std::optional<std::string> init_from;
  std::optional<std::string> embeddings;

  std::size_t hidden = 50;
  SoftmaxMode softmax = SoftmaxMode::Full;
  bool bidirectional = false;
  Activation activation = Activation::Sigmoid;
  std::vector<std::size_t> deep_hidden;
  std::size_t max_vocab = 2000;

  Architecture architecture(std::size_t vocab_size) const {
    Architecture a;
    a.hidden = hidden;
    a.vocab_size = vocab_size;
    a.activation = activation;
    a.softmax = softmax;
    a.bidirectional = bidirectional;
    a.tree_seed = seed;
    a.deep_hidden = deep_hidden;
    return a;
  }
};

inline GradientSet zero_gradients(const Model& m) {
  GradientSet g;
  const auto& p = m.params;
  g.dW = Eigen::MatrixXd::Zero(p.W.rows(), p.W.cols());
  g.dU = Eigen::MatrixXd::Zero(p.U.rows(), p.U.cols());
  g.db_fwd = Eigen::VectorXd::Zero(p.b_fwd.size());
  g.db_bwd = Eigen::VectorXd::Zero(p.b_bwd.size());
  g.dc_fwd = Eigen::VectorXd::Zero(p.c_fwd.size());
  g.dc_bwd = Eigen::VectorXd::Zero(p.c_bwd.size());
  for (const auto& layer : m.deep.layers)
    g.deep.push_back({Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()), Eigen::VectorXd::Zero(layer.c_fwd.size()),
                      Eigen::VectorXd::Zero(layer.c_bwd.size())});
  return g;
}

namespace detail {

// Accumulates the gradient of -sum_i log p(v_i | context) for one direction
// and returns that loss.
inline double accumulate_direction(const Document& doc, const Model& model, Direction dir, GradientSet& g) {
  const auto& p = model.params;
  const bool fwd = dir == Direction::Forward;
  auto states = layer_states(doc, model, dir);
  const Eigen::MatrixXd& top = states.back();
  const auto D = static_cast<Eigen::Index>(doc.size());
  Eigen::VectorXd& db = fwd ? g.db_fwd : g.db_bwd;
  const Eigen::VectorXd& b = fwd ? p.b_fwd : p.b_bwd;
  Eigen::MatrixXd d_top(top.rows(), D);
  double loss = 0.0;

  if (p.softmax == SoftmaxMode::Full) {
    // Column i of probs becomes softmax(b + U h_i) - onehot(v_i).
    Eigen::MatrixXd probs = p.U * top;
    probs.colwise() += b;
    for (Eigen::Index i = 0; i < D; ++i) {
      auto col = probs.col(i);
      const double mx = col.maxCoeff();
      const double lse = mx + std::log((col.array() - mx).exp().sum());
      const auto w = static_cast<Eigen::Index>(doc.words[static_cast<std::size_t>(i)]);
      loss -= col(w) - lse;
      col = (col.array() - lse).exp().matrix();
      col(w) -= 1.0;
    }
    db.noalias() += probs.rowwise().sum();
    g.dU.noalias() += probs * top.transpose();
    d_top.noalias() = p.U.transpose() * probs;
  } else {
    d_top.setZero();
    for (Eigen::Index i = 0; i < D; ++i) {
      const auto& path = p.tree.path(doc.words[static_cast<std::size_t>(i)]);
      const auto h = top.col(i);
      for (std::size_t m = 0; m < path.depth(); ++m) {
        const auto node = static_cast<Eigen::Index>(path.nodes[m]);
        const double logit = b(node) + p.U.row(node).dot(h);
        loss -= log_bernoulli_logit(path.bits[m], logit);
        const double delta = sigmoid(logit) - static_cast<double>(path.bits[m]);
        db(node) += delta;
        g.dU.row(node).noalias() += delta * h.transpose();
        d_top.col(i).noalias() += delta * p.U.row(node).transpose();
      }
    }
  }

  // Back through hidden layers n..2: z = c + W_d h_{d-1}, h_d = g(z).
  Eigen::MatrixXd d_hidden = std::move(d_top);
  for (std::size_t d = model.deep.layers.size(); d-- > 0;) {
    const auto& H_out = states[d + 1];
    const auto& H_in = states[d];
    Eigen::MatrixXd dz(H_out.rows(), D);
    for (Eigen::Index i = 0; i < D; ++i)
      dz.col(i) = d_hidden.col(i).cwiseProduct(activation_derivative_from_output(p.activation, H_out.col(i)));
    auto& lg = g.deep[d];
    lg.dW.noalias() += dz * H_in.transpose();
    (fwd ? lg.dc_fwd : lg.dc_bwd).noalias() += dz.rowwise().sum();
    d_hidden.noalias() = model.deep.layers[d].W.transpose() * dz;
  }

  // Layer 1: a_i = c + sum over the context words of W[:, v_k] (+ lambda E[:, v_k]).
  const auto& H1 = states.front();
  Eigen::MatrixXd da(H1.rows(), D);
  for (Eigen::Index i = 0; i < D; ++i)
    da.col(i) = d_hidden.col(i).cwiseProduct(activation_derivative_from_output(p.activation, H1.col(i)));
  (fwd ? g.dc_fwd : g.dc_bwd).noalias() += da.rowwise().sum();

  // Word v_k feeds every position after it (forward) or before it (backward).
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(H1.rows());
  if (fwd) {
    for (Eigen::Index i = D; i-- > 0;) {
      g.dW.col(static_cast<Eigen::Index>(doc.words[static_cast<std::size_t>(i)])) += carry;
      carry += da.col(i);
    }
  } else {
    for (Eigen::Index i = 0; i < D; ++i) {
      g.dW.col(static_cast<Eigen::Index>(doc.words[static_cast<std::size_t>(i)])) += carry;
      carry += da.col(i);
    }
  }
  return loss;
}

}  // namespace detail

// Gradient of the training loss for one document: the forward negative
// log-likelihood, plus the backward one for bidirectional models (the sum of
// the two directional losses, i.e. twice the negative mean log-likelihood).
inline GradientSet compute_gradients(const Document& doc, const Model& model) {
  if (doc.empty()) throw DataError("empty document");
  GradientSet g = zero_gradients(model);
  g.objective = detail::accumulate_direction(doc, model, Direction::Forward, g);
  if (model.params.bidirectional) g.objective += detail::accumulate_direction(doc, model, Direction::Backward, g);
  return g;
}

// Training loss as computed by the likelihood path: the value that
// compute_gradients differentiates.
inline double training_objective(const Document& doc, const Model& model) {
  auto ll = document_log_likelihood(doc, model);
  return -(ll.log_fwd + ll.log_bwd.value_or(0.0));
}

inline bool parameters_finite(const Model& m) {
  const auto& p = m.params;
  bool ok = p.W.allFinite() && p.U.allFinite() && p.b_fwd.allFinite() && p.b_bwd.allFinite() && p.c_fwd.allFinite() &&
            p.c_bwd.allFinite();
  for (const auto& l : m.deep.layers) ok = ok && l.W.allFinite() && l.c_fwd.allFinite() && l.c_bwd.allFinite();
  return ok;
}

inline void apply_update(Model& m, const GradientSet& g, double lr) {
  auto& p = m.params;
  p.W.noalias() -= lr * g.dW;
  p.U.noalias() -= lr * g.dU;
  p.b_fwd.noalias() -= lr * g.db_fwd;
  p.c_fwd.noalias() -= lr * g.dc_fwd;
  if (p.bidirectional) {
    p.b_bwd.noalias() -= lr * g.db_bwd;
    p.c_bwd.noalias() -= lr * g.dc_bwd;
  }
  for (std::size_t d = 0; d < m.deep.layers.size(); ++d) {
    auto& layer = m.deep.layers[d];
    layer.W.noalias() -= lr * g.deep[d].dW;
    layer.c_fwd.noalias() -= lr * g.deep[d].dc_fwd;
    if (p.bidirectional) layer.c_bwd.noalias() -= lr * g.deep[d].dc_bwd;
  }
}

namespace detail {

inline void fill_uniform(Eigen::MatrixXd& m, double radius, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-radius, radius);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

inline std::string shape_of(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace detail

// Weights ~ U(-r, r) with r = sqrt(6 / (H + K)) for W and U, and
// sqrt(6 / (H_d + H_{d-1})) for deep layers; biases zero. With a warm start,
// W, c_fwd and (when the output layer has the same shape) U and b_fwd are
// copied from the source model, whose tree seed is reused.
inline Model initialize_parameters(Architecture arch, std::uint64_t seed,
                                   std::optional<EmbeddingPrior> prior = std::nullopt,
                                   const Model* warm_start = nullptr) {
  if (warm_start && warm_start->params.softmax == arch.softmax) arch.tree_seed = warm_start->params.tree_seed;
  Model m = zero_model(arch);
  auto& p = m.params;
  std::mt19937_64 rng(seed);
  const double r = std::sqrt(6.0 / static_cast<double>(arch.hidden + arch.vocab_size));
  detail::fill_uniform(p.W, r, rng);
  detail::fill_uniform(p.U, r, rng);
  Eigen::Index prev = p.W.rows();
  for (auto& layer : m.deep.layers) {
    detail::fill_uniform(layer.W, std::sqrt(6.0 / static_cast<double>(layer.W.rows() + prev)), rng);
    prev = layer.W.rows();
  }
  if (prior) {
    if (static_cast<std::size_t>(prior->E.rows()) != arch.hidden ||
        static_cast<std::size_t>(prior->E.cols()) != arch.vocab_size)
      throw DataError("embedding prior is " + detail::shape_of(prior->E) + ", model expects " +
                      std::to_string(arch.hidden) + "x" + std::to_string(arch.vocab_size));
    p.prior = std::move(prior);
  }

  if (warm_start) {
    const auto& src = warm_start->params;
    if (src.W.rows() != p.W.rows() || src.W.cols() != p.W.cols())
      throw DataError("init_from shape mismatch: W is " + detail::shape_of(src.W) + ", expected " +
                      detail::shape_of(p.W));
    p.W = src.W;
    p.c_fwd = src.c_fwd;
    if (src.softmax == p.softmax && src.U.rows() == p.U.rows() && src.U.cols() == p.U.cols()) {
      p.U = src.U;
      p.b_fwd = src.b_fwd;
    }
  }
  validate_model(m);
  return m;
}

inline double mean_negative_log_likelihood(const Corpus& corpus, const Model& model) {
  if (corpus.empty()) throw DataError("empty corpus");
  std::vector<double> nll(corpus.size());
  parallel_for(corpus.size(),
               [&](std::size_t i) { nll[i] = -document_log_likelihood(corpus.documents[i], model).combined; });
  return std::accumulate(nll.begin(), nll.end(), 0.0) / static_cast<double>(corpus.size());
}

// One pass in a seeded random order with a per-document update. Returns the
// mean negative (combined) log-likelihood, each measured before its update.
inline double sgd_epoch(const Corpus& corpus, Model& model, double learning_rate, std::uint64_t seed) {
  if (corpus.empty()) throw DataError("empty corpus");
  if (!(learning_rate >= 0.0)) throw DataError("learning rate must be >= 0");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const double scale = model.params.bidirectional ? 0.5 : 1.0;
  double total = 0.0;
  for (auto idx : order) {
    GradientSet g = compute_gradients(corpus.documents[idx], model);
    total += scale * g.objective;
    apply_update(model, g, learning_rate);
    if (!g.all_finite() || !parameters_finite(model))
      throw NumericError("non-finite parameters after update on document " + std::to_string(idx) +
                         " (learning rate too high?)");
  }
  return total / static_cast<double>(corpus.size());
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_nll = 0.0;
  double val_ppl = 0.0;
};

struct TrainResult {
  Model model;  // parameters of the epoch with the best validation perplexity
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_ppl = 0.0;
  double initial_val_ppl = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

inline std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(epoch);
}

// Runs up to config.epochs epochs, stopping once validation perplexity has not
// improved for config.patience epochs (patience 0 never stops early).
inline TrainResult train(const Corpus& train_corpus, const Corpus& val_corpus, const TrainConfig& config,
                         std::optional<EmbeddingPrior> prior = std::nullopt, const EpochCallback& on_epoch = {}) {
  if (!(config.learning_rate > 0.0)) throw DataError("learning_rate must be > 0");
  if (config.epochs < 1) throw DataError("epochs must be >= 1");
  if (train_corpus.empty()) throw DataError("empty training corpus");
  if (val_corpus.empty()) throw DataError("empty validation corpus");
  train_corpus.vocab.require_model_ready();
  if (prior && config.lambda) prior->lambda = *config.lambda;

  std::optional<Model> warm;
  if (config.init_from) warm = load_model(*config.init_from);
  Model model = initialize_parameters(config.architecture(train_corpus.vocab.size()), config.seed, std::move(prior),
                                      warm ? &*warm : nullptr);

  TrainResult result;
  result.initial_val_ppl = perplexity(model, val_corpus);
  result.best_val_ppl = std::numeric_limits<double>::infinity();
  result.model = model;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_nll = sgd_epoch(train_corpus, model, config.learning_rate, epoch_seed(config.seed, epoch));
    rec.val_ppl = perplexity(model, val_corpus);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_ppl < result.best_val_ppl) {
      result.best_val_ppl = rec.val_ppl;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

struct LambdaSearchResult {
  double best_lambda = 0.0;
  std::vector<std::pair<double, double>> table;  // (lambda, best validation PPL) in grid order
  TrainResult best;
};

// One model per grid value with identical seeds; the smallest validation
// perplexity wins and ties go to the smaller lambda.
inline LambdaSearchResult grid_search_lambda(const Corpus& train_corpus, const Corpus& val_corpus,
                                             const TrainConfig& config, const EmbeddingPrior& prior) {
  if (config.lambda_grid.empty()) throw DataError("empty lambda grid");
  LambdaSearchResult out;
  bool have_best = false;
  double best_ppl = 0.0;
  for (double lambda : config.lambda_grid) {
    if (!(lambda >= 0.0)) throw DataError("lambda grid values must be >= 0");
    TrainConfig cfg = config;
    cfg.lambda = lambda;
    EmbeddingPrior candidate = prior;
    candidate.lambda = lambda;
    TrainResult r = train(train_corpus, val_corpus, cfg, std::move(candidate));
    out.table.emplace_back(lambda, r.best_val_ppl);
    if (!have_best || r.best_val_ppl < best_ppl || (r.best_val_ppl == best_ppl && lambda < out.best_lambda)) {
      have_best = true;
      best_ppl = r.best_val_ppl;
      out.best_lambda = lambda;
      out.best = std::move(r);
    }
  }
  return out;
}

}  // namespace idne
