#pragma once

// DocNADE-family density estimator: forward-only and bidirectional
// autoregressive topic models, optional embedding prior mixed into the first
// hidden layer, optional deep hidden stack, full or tree softmax output.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "idne/corpus.hpp"
#include "idne/error.hpp"
#include "idne/tree_softmax.hpp"

namespace idne {

enum class Activation : std::uint8_t { Sigmoid = 0, Tanh = 1 };
enum class SoftmaxMode : std::uint8_t { Full = 0, Tree = 1 };
enum class Direction { Forward, Backward };

inline std::string to_string(Activation a) { return a == Activation::Sigmoid ? "sigmoid" : "tanh"; }
inline std::string to_string(SoftmaxMode m) { return m == SoftmaxMode::Full ? "full" : "tree"; }

// Everything needed to allocate a model; the tensors come later.
struct Architecture {
  std::size_t hidden = 50;
  std::size_t vocab_size = 0;
  Activation activation = Activation::Sigmoid;
  SoftmaxMode softmax = SoftmaxMode::Full;
  bool bidirectional = false;
  std::uint64_t tree_seed = 0;
  std::vector<std::size_t> deep_hidden;  // sizes of layers 2..n, empty for a shallow model
};

struct ModelParameters {
  std::size_t hidden = 0;
  std::size_t vocab_size = 0;
  Activation activation = Activation::Sigmoid;
  SoftmaxMode softmax = SoftmaxMode::Full;
  bool bidirectional = false;
  BinaryWordTree tree;  // populated only in tree mode
  std::uint64_t tree_seed = 0;

  Eigen::MatrixXd W;      // H x K, word columns, shared by both directions
  Eigen::MatrixXd U;      // (K or T) x H_last, shared by both directions
  Eigen::VectorXd b_fwd;  // K or T
  Eigen::VectorXd b_bwd;  // empty for forward-only models
  Eigen::VectorXd c_fwd;  // H
  Eigen::VectorXd c_bwd;  // empty for forward-only models
  std::optional<EmbeddingPrior> prior;

  std::size_t output_rows() const { return softmax == SoftmaxMode::Full ? vocab_size : vocab_size - 1; }
};

// Hidden layers 2..n. Layer 1 is ModelParameters::W.
struct DeepLayer {
  Eigen::MatrixXd W;      // H_d x H_{d-1}
  Eigen::VectorXd c_fwd;  // H_d
  Eigen::VectorXd c_bwd;  // H_d, empty for forward-only models
};

struct DeepParameters {
  std::vector<DeepLayer> layers;

  std::size_t layer_count() const { return layers.size() + 1; }
};

struct Model {
  ModelParameters params;
  DeepParameters deep;

  std::size_t last_hidden() const {
    return deep.layers.empty() ? params.hidden : static_cast<std::size_t>(deep.layers.back().W.rows());
  }
  bool is_deep() const { return !deep.layers.empty(); }
};

struct ActivationSweep {
  Eigen::MatrixXd hidden;       // H x D, column i is h_i
  Eigen::VectorXd accumulator;  // final pre-activation state
  Direction direction = Direction::Forward;
};

struct LikelihoodReport {
  double log_fwd = 0.0;
  std::optional<double> log_bwd;
  double combined = 0.0;
};

// Checks every tensor shape against the declared dimensions.
inline void validate_model(const Model& m) {
  const auto& p = m.params;
  auto fail = [](const std::string& what) { throw DataError("model shape mismatch: " + what); };
  if (p.vocab_size < 2) fail("vocabulary size must be >= 2");
  if (p.hidden == 0) fail("hidden size must be > 0");
  const auto H = static_cast<Eigen::Index>(p.hidden);
  const auto K = static_cast<Eigen::Index>(p.vocab_size);
  const auto R = static_cast<Eigen::Index>(p.output_rows());
  if (p.W.rows() != H || p.W.cols() != K) fail("W must be H x K");
  if (p.c_fwd.size() != H) fail("c_fwd must have length H");
  if (p.b_fwd.size() != R) fail("b_fwd length must match output rows");
  if (p.bidirectional) {
    if (p.c_bwd.size() != H) fail("c_bwd must have length H");
    if (p.b_bwd.size() != R) fail("b_bwd length must match output rows");
  } else if (p.c_bwd.size() != 0 || p.b_bwd.size() != 0) {
    fail("forward-only model carries backward biases");
  }
  if (p.softmax == SoftmaxMode::Tree && p.tree.leaf_count() != p.vocab_size) fail("tree leaf count != K");
  Eigen::Index prev = H;
  for (std::size_t d = 0; d < m.deep.layers.size(); ++d) {
    const auto& layer = m.deep.layers[d];
    const std::string name = "deep layer " + std::to_string(d + 2);
    if (layer.W.cols() != prev) fail(name + " input size " + std::to_string(layer.W.cols()) + " != previous layer size " + std::to_string(prev));
    if (layer.W.rows() == 0) fail(name + " has zero units");
    if (layer.c_fwd.size() != layer.W.rows()) fail(name + " c_fwd length");
    if (p.bidirectional ? layer.c_bwd.size() != layer.W.rows() : layer.c_bwd.size() != 0) fail(name + " c_bwd length");
    prev = layer.W.rows();
  }
  if (p.U.rows() != R || p.U.cols() != prev) fail("U must be output_rows x last hidden size");
  if (p.prior) {
    if (p.prior->E.rows() != H || p.prior->E.cols() != K) fail("embedding prior must be H x K");
    if (!(p.prior->lambda >= 0.0)) fail("lambda must be >= 0");
  }
}

// All tensors zero, shapes per the architecture.
inline Model zero_model(const Architecture& arch) {
  if (arch.vocab_size < 2) throw DataError("vocabulary size must be >= 2");
  if (arch.hidden == 0) throw DataError("hidden size must be > 0");
  Model m;
  auto& p = m.params;
  p.hidden = arch.hidden;
  p.vocab_size = arch.vocab_size;
  p.activation = arch.activation;
  p.softmax = arch.softmax;
  p.bidirectional = arch.bidirectional;
  p.tree_seed = arch.tree_seed;
  if (p.softmax == SoftmaxMode::Tree) p.tree = build_word_tree(arch.vocab_size, arch.tree_seed);

  const auto H = static_cast<Eigen::Index>(arch.hidden);
  const auto R = static_cast<Eigen::Index>(p.output_rows());
  p.W = Eigen::MatrixXd::Zero(H, static_cast<Eigen::Index>(arch.vocab_size));
  p.b_fwd = Eigen::VectorXd::Zero(R);
  p.c_fwd = Eigen::VectorXd::Zero(H);
  if (p.bidirectional) {
    p.b_bwd = Eigen::VectorXd::Zero(R);
    p.c_bwd = Eigen::VectorXd::Zero(H);
  }
  Eigen::Index prev = H;
  for (auto size : arch.deep_hidden) {
    if (size == 0) throw DataError("deep layer size must be > 0");
    const auto S = static_cast<Eigen::Index>(size);
    DeepLayer layer{Eigen::MatrixXd::Zero(S, prev), Eigen::VectorXd::Zero(S), Eigen::VectorXd()};
    if (p.bidirectional) layer.c_bwd = Eigen::VectorXd::Zero(S);
    m.deep.layers.push_back(std::move(layer));
    prev = S;
  }
  p.U = Eigen::MatrixXd::Zero(R, prev);
  return m;
}

inline Architecture architecture_of(const Model& m) {
  Architecture a;
  a.hidden = m.params.hidden;
  a.vocab_size = m.params.vocab_size;
  a.activation = m.params.activation;
  a.softmax = m.params.softmax;
  a.bidirectional = m.params.bidirectional;
  a.tree_seed = m.params.tree_seed;
  for (const auto& layer : m.deep.layers) a.deep_hidden.push_back(static_cast<std::size_t>(layer.W.rows()));
  return a;
}

// g applied in place.
inline void apply_activation(Activation g, Eigen::Ref<Eigen::VectorXd> x) {
  if (g == Activation::Sigmoid)
    x = x.unaryExpr([](double v) { return sigmoid(v); });
  else
    x = x.array().tanh().matrix();
}

inline Eigen::VectorXd activate(Activation g, Eigen::VectorXd x) {
  apply_activation(g, x);
  return x;
}

// g'(a) expressed through h = g(a).
inline Eigen::VectorXd activation_derivative_from_output(Activation g, const Eigen::VectorXd& h) {
  if (g == Activation::Sigmoid) return (h.array() * (1.0 - h.array())).matrix();
  return (1.0 - h.array().square()).matrix();
}

namespace detail {

inline const Eigen::VectorXd& hidden_bias(const ModelParameters& p, Direction dir) {
  return dir == Direction::Forward ? p.c_fwd : p.c_bwd;
}

inline const Eigen::VectorXd& output_bias(const ModelParameters& p, Direction dir) {
  return dir == Direction::Forward ? p.b_fwd : p.b_bwd;
}

inline void require_direction(const ModelParameters& p, Direction dir) {
  if (dir == Direction::Backward && !p.bidirectional)
    throw DataError("backward direction requested on a forward-only model");
}

inline void require_doc(const Document& doc, const ModelParameters& p) {
  if (doc.empty()) throw DataError("empty document");
  for (auto w : doc.words)
    if (w >= p.vocab_size) throw DataError("word index " + std::to_string(w) + " out of range");
}

// acc += W[:, w] (+ lambda E[:, w]) with sign +1 or -1.
inline void add_word(const ModelParameters& p, Eigen::VectorXd& acc, WordId w, double sign) {
  const auto col = static_cast<Eigen::Index>(w);
  if (p.prior) {
    acc.noalias() += sign * (p.W.col(col) + p.prior->lambda * p.prior->E.col(col));
  } else {
    acc.noalias() += sign * p.W.col(col);
  }
}

}  // namespace detail

// Layer-1 hidden states for every position, computed with a running
// pre-activation: the forward accumulator starts at c_fwd and gains each word
// after use; the backward accumulator starts at c_bwd plus every word after
// the first and sheds the current word before use, so that position i sees
// exactly the words after i.
inline ActivationSweep activation_sweep(const Document& doc, const Model& model, Direction dir) {
  const auto& p = model.params;
  detail::require_doc(doc, p);
  detail::require_direction(p, dir);
  const auto D = static_cast<Eigen::Index>(doc.size());
  ActivationSweep sweep;
  sweep.direction = dir;
  sweep.hidden.resize(static_cast<Eigen::Index>(p.hidden), D);
  Eigen::VectorXd acc = detail::hidden_bias(p, dir);

  if (dir == Direction::Forward) {
    for (Eigen::Index i = 0; i < D; ++i) {
      sweep.hidden.col(i) = acc;
      apply_activation(p.activation, sweep.hidden.col(i));
      detail::add_word(p, acc, doc.words[static_cast<std::size_t>(i)], +1.0);
    }
  } else {
    for (Eigen::Index i = 1; i < D; ++i) detail::add_word(p, acc, doc.words[static_cast<std::size_t>(i)], +1.0);
    for (Eigen::Index i = 0; i < D; ++i) {
      if (i >= 1) detail::add_word(p, acc, doc.words[static_cast<std::size_t>(i)], -1.0);
      sweep.hidden.col(i) = acc;
      apply_activation(p.activation, sweep.hidden.col(i));
    }
  }
  sweep.accumulator = std::move(acc);
  return sweep;
}

// Hidden states of every layer, index 0 = layer 1.
inline std::vector<Eigen::MatrixXd> layer_states(const Document& doc, const Model& model, Direction dir) {
  std::vector<Eigen::MatrixXd> states;
  states.reserve(model.deep.layers.size() + 1);
  states.push_back(activation_sweep(doc, model, dir).hidden);
  for (const auto& layer : model.deep.layers) {
    if (layer.W.cols() != states.back().rows()) throw DataError("dimension mismatch across deep layers");
    const auto& c = dir == Direction::Forward ? layer.c_fwd : layer.c_bwd;
    Eigen::MatrixXd next = layer.W * states.back();
    next.colwise() += c;
    for (Eigen::Index i = 0; i < next.cols(); ++i) apply_activation(model.params.activation, next.col(i));
    states.push_back(std::move(next));
  }
  return states;
}

// Last-layer states of a deep model.
inline ActivationSweep deep_activation_sweep(const Document& doc, const Model& model, Direction dir) {
  if (model.deep.layers.empty()) throw DataError("deep sweep requires at least 2 hidden layers");
  validate_model(model);
  ActivationSweep sweep;
  sweep.direction = dir;
  auto states = layer_states(doc, model, dir);
  sweep.hidden = std::move(states.back());
  sweep.accumulator = activation_sweep(doc, model, dir).accumulator;
  return sweep;
}

// log p(v = w | h) for every w, full softmax only.
inline Eigen::VectorXd log_softmax_distribution(const Eigen::VectorXd& h, const ModelParameters& p, Direction dir) {
  if (p.softmax != SoftmaxMode::Full)
    throw DataError("conditional_distribution is defined for full softmax; use leaf_log_probability in tree mode");
  detail::require_direction(p, dir);
  Eigen::VectorXd logits = detail::output_bias(p, dir);
  logits.noalias() += p.U * h;
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  logits.array() -= lse;
  return logits;
}

inline Eigen::VectorXd conditional_distribution(const Eigen::VectorXd& h, const ModelParameters& p, Direction dir) {
  return log_softmax_distribution(h, p, dir).array().exp().matrix();
}

inline double log_conditional(const Eigen::VectorXd& h, WordId word, const ModelParameters& p, Direction dir) {
  detail::require_direction(p, dir);
  if (p.softmax == SoftmaxMode::Tree) return leaf_log_probability(h, word, p.tree, p.U, detail::output_bias(p, dir));
  Eigen::VectorXd logits = detail::output_bias(p, dir);
  logits.noalias() += p.U * h;
  const double mx = logits.maxCoeff();
  return logits(static_cast<Eigen::Index>(word)) - mx - std::log((logits.array() - mx).exp().sum());
}

// log p(v_i | context) per position for one direction, using last-layer states.
inline std::vector<double> word_log_conditionals(const Document& doc, const Model& model, Direction dir) {
  auto states = layer_states(doc, model, dir);
  const auto& top = states.back();
  std::vector<double> out(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i)
    out[i] = log_conditional(top.col(static_cast<Eigen::Index>(i)), doc.words[i], model.params, dir);
  return out;
}

inline LikelihoodReport document_log_likelihood(const Document& doc, const Model& model) {
  LikelihoodReport report;
  for (double lp : word_log_conditionals(doc, model, Direction::Forward)) report.log_fwd += lp;
  if (model.params.bidirectional) {
    double bwd = 0.0;
    for (double lp : word_log_conditionals(doc, model, Direction::Backward)) bwd += lp;
    report.log_bwd = bwd;
    report.combined = 0.5 * (report.log_fwd + bwd);
  } else {
    report.combined = report.log_fwd;
  }
  return report;
}

// Hidden representation of the whole document. Bidirectional models sum the
// forward and backward states that have seen every word; forward-only models
// use the forward state after the last word.
inline Eigen::VectorXd document_representation(const Document& doc, const Model& model) {
  const auto& p = model.params;
  detail::require_doc(doc, p);
  Eigen::VectorXd context = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.hidden));
  for (auto w : doc.words) detail::add_word(p, context, w, +1.0);

  auto full_context_state = [&](Direction dir) {
    Eigen::VectorXd h = detail::hidden_bias(p, dir) + context;
    apply_activation(p.activation, h);
    for (const auto& layer : model.deep.layers) {
      Eigen::VectorXd z = (dir == Direction::Forward ? layer.c_fwd : layer.c_bwd);
      z.noalias() += layer.W * h;
      apply_activation(p.activation, z);
      h = std::move(z);
    }
    return h;
  };

  Eigen::VectorXd rep = full_context_state(Direction::Forward);
  if (p.bidirectional) rep += full_context_state(Direction::Backward);
  return rep;
}

}  // namespace idne
