#pragma once

// Flat key=value training configuration. Blank lines and lines starting with
// '#' are ignored. Every problem in a file is collected and reported at once.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "idne/error.hpp"
#include "idne/training.hpp"

namespace idne {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{"learning_rate", "epochs",     "seed",       "lambda",     "lambda_grid",
                                          "hidden",        "softmax",    "bidirectional", "init_from", "patience",
                                          "embeddings",    "activation", "deep_layers", "vocab_size"};
  return keys;
}

namespace detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

template <typename T>
std::optional<std::vector<T>> parse_list(std::string_view s) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    auto item = trim(s.substr(start, comma - start));
    auto v = parse_number<T>(item);
    if (!v) return std::nullopt;
    out.push_back(*v);
    start = comma + 1;
  }
  return out;
}

inline std::optional<bool> parse_bool(std::string_view s) {
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "no") return false;
  return std::nullopt;
}

}  // namespace detail

// Applies one setting to `config`; returns an error message or empty on success.
inline std::string apply_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  using namespace detail;
  auto bad = [&](const std::string& expect) { return key + ": expected " + expect + ", got '" + value + "'"; };
  if (key == "learning_rate") {
    auto v = parse_number<double>(value);
    if (!v || !(*v > 0.0)) return bad("a positive real");
    config.learning_rate = *v;
  } else if (key == "epochs") {
    auto v = parse_number<std::size_t>(value);
    if (!v || *v < 1) return bad("an integer >= 1");
    config.epochs = *v;
  } else if (key == "seed") {
    auto v = parse_number<std::uint64_t>(value);
    if (!v) return bad("an unsigned integer");
    config.seed = *v;
  } else if (key == "patience") {
    auto v = parse_number<std::size_t>(value);
    if (!v) return bad("an unsigned integer");
    config.patience = *v;
  } else if (key == "lambda") {
    auto v = parse_number<double>(value);
    if (!v || !(*v >= 0.0)) return bad("a non-negative real");
    config.lambda = *v;
  } else if (key == "lambda_grid") {
    auto v = parse_list<double>(value);
    if (!v || v->empty()) return bad("a comma-separated list of reals");
    for (double x : *v)
      if (!(x >= 0.0)) return bad("non-negative reals");
    config.lambda_grid = *v;
  } else if (key == "hidden") {
    auto v = parse_number<std::size_t>(value);
    if (!v || *v < 1) return bad("an integer >= 1");
    config.hidden = *v;
  } else if (key == "vocab_size") {
    auto v = parse_number<std::size_t>(value);
    if (!v || *v < 2) return bad("an integer >= 2");
    config.max_vocab = *v;
  } else if (key == "softmax") {
    if (value == "full") config.softmax = SoftmaxMode::Full;
    else if (value == "tree") config.softmax = SoftmaxMode::Tree;
    else return bad("'full' or 'tree'");
  } else if (key == "activation") {
    if (value == "sigmoid") config.activation = Activation::Sigmoid;
    else if (value == "tanh") config.activation = Activation::Tanh;
    else return bad("'sigmoid' or 'tanh'");
  } else if (key == "bidirectional") {
    auto v = parse_bool(value);
    if (!v) return bad("true or false");
    config.bidirectional = *v;
  } else if (key == "deep_layers") {
    if (value.empty()) {
      config.deep_hidden.clear();
    } else {
      auto v = parse_list<std::size_t>(value);
      if (!v) return bad("a comma-separated list of layer sizes");
      for (auto s : *v)
        if (s < 1) return bad("layer sizes >= 1");
      config.deep_hidden = *v;
    }
  } else if (key == "init_from") {
    if (value.empty()) return bad("a model path");
    config.init_from = value;
  } else if (key == "embeddings") {
    if (value.empty()) return bad("an embedding file path");
    config.embeddings = value;
  } else {
    return "unknown key '" + key + "'";
  }
  return {};
}

// How a resolved configuration will be consumed; decides which keys must travel together.
enum class ConfigUse { Any, Train, GridSearch };

// Cross-key consistency checks.
inline std::vector<std::string> config_conflicts(const TrainConfig& config, const std::set<std::string>& explicit_keys,
                                                 ConfigUse use = ConfigUse::Any) {
  std::vector<std::string> errors;
  if (config.lambda && !config.embeddings) errors.push_back("lambda requires embeddings");
  if (config.embeddings && !config.lambda) {
    if (use == ConfigUse::Train || (use == ConfigUse::Any && !explicit_keys.count("lambda_grid")))
      errors.push_back("embeddings requires lambda" + std::string(use == ConfigUse::Train ? "" : " (or lambda_grid)"));
  }
  return errors;
}

namespace detail {

inline UsageError config_error(const std::vector<std::string>& errors) {
  std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                    (errors.size() == 1 ? "" : "s") + "):";
  for (const auto& e : errors) msg += "\n  " + e;
  return UsageError(msg);
}

}  // namespace detail

// Applies every key=value line to `config` and records the keys seen. Line
// problems are appended to `errors`; cross-key checks are left to the caller.
inline void read_config_entries(std::istream& in, const std::string& source, TrainConfig& config,
                                std::set<std::string>& seen, std::vector<std::string>& errors) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    auto eq = text.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) {
      errors.push_back(where + "expected key=value");
      continue;
    }
    auto key = detail::trim(std::string_view(text).substr(0, eq));
    auto value = detail::trim(std::string_view(text).substr(eq + 1));
    if (!seen.insert(key).second && known_config_keys().count(key)) {
      errors.push_back(where + "duplicate key '" + key + "'");
      continue;
    }
    if (auto err = apply_config_value(config, key, value); !err.empty()) errors.push_back(where + err);
  }
}

inline TrainConfig parse_config(std::istream& in, const std::string& source = "<config>",
                                ConfigUse use = ConfigUse::Any) {
  TrainConfig config;
  std::vector<std::string> errors;
  std::set<std::string> seen;
  read_config_entries(in, source, config, seen, errors);
  for (auto& e : config_conflicts(config, seen, use)) errors.push_back(source + ": " + e);
  if (!errors.empty()) throw detail::config_error(errors);
  return config;
}

inline TrainConfig validate_config(const std::string& path, ConfigUse use = ConfigUse::Any) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  return parse_config(in, path, use);
}

}  // namespace idne
