#pragma once

// Command-line front end. Subcommands:
//   train, ppl, ir, topics, coherence, neighbors, classify, grid-lambda
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
//
// Every command that writes an output file also writes "<out>.manifest.json"
// with the resolved settings and the SHA-256 of the model file involved.
// Existing outputs are never replaced unless --force is given.

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "idne/config.hpp"
#include "idne/corpus.hpp"
#include "idne/error.hpp"
#include "idne/evaluation.hpp"
#include "idne/model.hpp"
#include "idne/model_io.hpp"
#include "idne/training.hpp"

namespace idne::cli {

using json = nlohmann::json;

inline std::string sha256_hex(const std::vector<char>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw DataError("sha256 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

inline std::string sha256_file(const std::string& path) { return sha256_hex(read_file_bytes(path)); }

// Shortest text that parses back to the same double; integral values keep a ".0".
inline std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace detail {

struct RunContext {
  std::string command;
  std::optional<std::string> config_path;
  std::map<std::string, std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  json flags = json::object();
  std::optional<std::string> model_for_hash;
  bool force = false;
};

inline void guard_outputs(const std::vector<std::string>& paths, bool force) {
  if (force) return;
  for (const auto& p : paths)
    if (std::filesystem::exists(p)) throw UsageError("refusing to overwrite '" + p + "' (pass --force)");
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline void write_manifest(const RunContext& ctx, const std::string& manifest_path) {
  json m;
  m["command"] = ctx.command;
  m["config"] = ctx.config_path ? json(*ctx.config_path) : json(nullptr);
  m["inputs"] = ctx.inputs;
  m["outputs"] = ctx.outputs;
  m["seed"] = ctx.seed;
  m["flags"] = ctx.flags;
  m["model_sha256"] = ctx.model_for_hash ? json(sha256_file(*ctx.model_for_hash)) : json(nullptr);
  write_text(manifest_path, m.dump(2) + "\n");
}

inline std::vector<double> parse_fractions(const std::string& text) {
  auto v = idne::detail::parse_list<double>(text);
  if (!v || v->empty()) throw UsageError("--fractions: expected a comma-separated list of reals");
  return *v;
}

inline Vocabulary vocabulary_for(const std::string& model_path, const std::string& vocab_flag) {
  return load_vocabulary(vocab_flag.empty() ? model_path + ".vocab" : vocab_flag);
}

inline void require_vocab_match(const Model& model, const Vocabulary& vocab) {
  if (model.params.vocab_size != vocab.size())
    throw DataError("vocabulary has " + std::to_string(vocab.size()) + " tokens but the model expects " +
                    std::to_string(model.params.vocab_size));
}

inline std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string s = "epoch,train_nll,val_ppl\n";
  for (const auto& r : history)
    s += std::to_string(r.epoch) + "," + format_real(r.train_nll) + "," + format_real(r.val_ppl) + "\n";
  return s;
}

// Flags shared by train and grid-lambda, layered over an optional config file.
struct TrainFlags {
  std::string train, val, out, config, embeddings, init_from, softmax, activation, deep, lambda_grid;
  std::optional<double> lambda, learning_rate;
  std::optional<std::size_t> hidden, epochs, patience, vocab_size;
  std::optional<std::uint64_t> seed;
  bool bidirectional = false;

  void attach(CLI::App* app) {
    app->add_option("--train", train, "training corpus (label<TAB>tokens)")->required();
    app->add_option("--val", val, "validation corpus")->required();
    app->add_option("--out", out, "output model file")->required();
    app->add_option("--config", config, "key=value training config");
    app->add_option("--hidden", hidden, "hidden units (topics)");
    app->add_flag("--bidirectional", bidirectional, "train the bidirectional model");
    app->add_option("--softmax", softmax, "full | tree")->check(CLI::IsMember({"full", "tree"}));
    app->add_option("--activation", activation, "sigmoid | tanh")->check(CLI::IsMember({"sigmoid", "tanh"}));
    app->add_option("--deep", deep, "sizes of hidden layers 2..n, comma-separated");
    app->add_option("--embeddings", embeddings, "embedding prior file (token f_1 .. f_H)");
    app->add_option("--lambda", lambda, "embedding mixture weight");
    app->add_option("--lambda-grid", lambda_grid, "comma-separated mixture weights");
    app->add_option("--init-from", init_from, "warm-start model file");
    app->add_option("--learning-rate", learning_rate, "SGD learning rate");
    app->add_option("--epochs", epochs, "maximum epochs");
    app->add_option("--patience", patience, "early-stopping patience (0 disables)");
    app->add_option("--seed", seed, "seed for every random choice");
    app->add_option("--vocab-size", vocab_size, "vocabulary cap");
  }

  // Flags override the config file; conflicts are checked once on the merged result.
  TrainConfig resolve(ConfigUse use) const {
    TrainConfig cfg;
    std::vector<std::string> errors;
    std::set<std::string> explicit_keys;
    if (!config.empty()) {
      std::ifstream in(config);
      if (!in) throw UsageError("cannot open config '" + config + "'");
      read_config_entries(in, config, cfg, explicit_keys, errors);
    }
    auto set = [&](const std::string& key, const std::string& value) {
      explicit_keys.insert(key);
      if (auto e = apply_config_value(cfg, key, value); !e.empty()) errors.push_back("--" + e);
    };
    if (hidden) set("hidden", std::to_string(*hidden));
    if (bidirectional) set("bidirectional", "true");
    if (!softmax.empty()) set("softmax", softmax);
    if (!activation.empty()) set("activation", activation);
    if (!deep.empty()) set("deep_layers", deep);
    if (!embeddings.empty()) set("embeddings", embeddings);
    if (lambda) set("lambda", format_real(*lambda));
    if (!lambda_grid.empty()) set("lambda_grid", lambda_grid);
    if (!init_from.empty()) set("init_from", init_from);
    if (learning_rate) set("learning_rate", format_real(*learning_rate));
    if (epochs) set("epochs", std::to_string(*epochs));
    if (patience) set("patience", std::to_string(*patience));
    if (seed) set("seed", std::to_string(*seed));
    if (vocab_size) set("vocab_size", std::to_string(*vocab_size));
    for (auto& e : config_conflicts(cfg, explicit_keys, use)) errors.push_back(e);
    if (!errors.empty()) throw idne::detail::config_error(errors);
    return cfg;
  }
};

inline json config_json(const TrainConfig& c) {
  json j;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["patience"] = c.patience;
  j["lambda_grid"] = c.lambda_grid;
  j["lambda"] = c.lambda ? json(*c.lambda) : json(nullptr);
  j["init_from"] = c.init_from ? json(*c.init_from) : json(nullptr);
  j["embeddings"] = c.embeddings ? json(*c.embeddings) : json(nullptr);
  j["hidden"] = c.hidden;
  j["softmax"] = to_string(c.softmax);
  j["bidirectional"] = c.bidirectional;
  j["activation"] = to_string(c.activation);
  j["deep_layers"] = c.deep_hidden;
  j["vocab_size"] = c.max_vocab;
  return j;
}

struct LoadedData {
  Corpus train, val;
  std::optional<EmbeddingPrior> prior;
};

inline LoadedData load_training_data(const TrainConfig& cfg, const TrainFlags& f, std::ostream& err) {
  LoadedData d;
  d.train = load_corpus_building_vocab(f.train, cfg.max_vocab);
  d.train.vocab.require_model_ready();
  d.val = load_corpus(f.val, d.train.vocab);
  if (!d.train.skipped_lines.empty() || !d.val.skipped_lines.empty())
    err << "skipped " << d.train.skipped_lines.size() << " train / " << d.val.skipped_lines.size()
        << " val documents with no in-vocabulary tokens\n";
  if (cfg.embeddings) {
    d.prior = load_embedding_prior(*cfg.embeddings, d.train.vocab, cfg.hidden, cfg.lambda.value_or(0.0));
    err << "embedding coverage " << format_real(d.prior->coverage) << "\n";
  }
  return d;
}

inline void save_trained(const TrainResult& r, const Vocabulary& vocab, const std::string& out) {
  save_model(r.model, out);
  save_vocabulary(vocab, out + ".vocab");
  write_text(out + ".history.csv", history_csv(r.history));
}

inline EpochCallback epoch_logger(std::ostream& err) {
  return [&err](const EpochRecord& r) {
    err << "epoch " << r.epoch << " train_nll=" << format_real(r.train_nll) << " val_ppl=" << format_real(r.val_ppl)
        << "\n";
  };
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Neural autoregressive topic models (DocNADE family)", "idne"};
  app.require_subcommand(1);
  bool force = false;
  app.add_flag("--force", force, "overwrite existing outputs");

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_flags.attach(train_cmd);
  train_cmd->add_flag("--force", force, "overwrite existing outputs");

  TrainFlags grid_flags;
  auto* grid_cmd = app.add_subcommand("grid-lambda", "grid-search the embedding mixture weight");
  grid_flags.attach(grid_cmd);
  grid_cmd->add_flag("--force", force, "overwrite existing outputs");

  std::string model_path, vocab_path, corpus_path, train_path, test_path, reference_path, out_path, word,
      fractions_text = "0.0001,0.005,0.01,0.02,0.05,0.1,0.2", glove_path;
  std::size_t top_n = 10, window = 10, neighbors_n = 5;
  double l2 = 1e-3;

  auto add_model = [&](CLI::App* c) {
    c->add_option("--model", model_path, "model file")->required();
    c->add_option("--vocab", vocab_path, "vocabulary file (default: <model>.vocab)");
    c->add_flag("--force", force, "overwrite existing outputs");
  };

  auto* ppl_cmd = app.add_subcommand("ppl", "held-out perplexity");
  add_model(ppl_cmd);
  ppl_cmd->add_option("--corpus", corpus_path, "evaluation corpus")->required();
  ppl_cmd->add_option("--out", out_path, "JSON report");

  auto* ir_cmd = app.add_subcommand("ir", "document retrieval precision");
  add_model(ir_cmd);
  ir_cmd->add_option("--train", train_path, "retrieval pool corpus")->required();
  ir_cmd->add_option("--test", test_path, "query corpus")->required();
  ir_cmd->add_option("--fractions", fractions_text, "comma-separated retrieval fractions");
  ir_cmd->add_option("--out", out_path, "CSV fraction,precision")->required();

  auto* topics_cmd = app.add_subcommand("topics", "top words per topic");
  add_model(topics_cmd);
  topics_cmd->add_option("--n", top_n, "words per topic");
  topics_cmd->add_option("--out", out_path, "CSV topic,rank,word,weight")->required();

  auto* coh_cmd = app.add_subcommand("coherence", "sliding-window NPMI topic coherence");
  add_model(coh_cmd);
  coh_cmd->add_option("--reference", reference_path, "reference corpus")->required();
  coh_cmd->add_option("--n", top_n, "words per topic");
  coh_cmd->add_option("--window", window, "sliding window width");
  coh_cmd->add_option("--out", out_path, "CSV topic,score")->required();

  auto* nn_cmd = app.add_subcommand("neighbors", "nearest words by W-column cosine");
  add_model(nn_cmd);
  nn_cmd->add_option("--word", word, "query word")->required();
  nn_cmd->add_option("--n", neighbors_n, "neighbour count");
  nn_cmd->add_option("--out", out_path, "CSV word,cosine");

  auto* cls_cmd = app.add_subcommand("classify", "logistic regression on document representations");
  add_model(cls_cmd);
  cls_cmd->add_option("--train", train_path, "labeled training corpus")->required();
  cls_cmd->add_option("--test", test_path, "labeled test corpus")->required();
  cls_cmd->add_option("--l2", l2, "L2 regularization strength");
  cls_cmd->add_option("--glove", glove_path, "use summed embedding vectors from this file instead of the model");
  cls_cmd->add_option("--out", out_path, "JSON report")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 1;
  }

  RunContext ctx;
  ctx.force = force;
  try {
    if (train_cmd->parsed()) {
      TrainConfig cfg = train_flags.resolve(ConfigUse::Train);
      const auto& o = train_flags.out;
      ctx.command = "train";
      ctx.outputs = {o, o + ".vocab", o + ".history.csv"};
      guard_outputs({o, o + ".vocab", o + ".history.csv", o + ".manifest.json"}, force);
      auto data = load_training_data(cfg, train_flags, err);
      auto result = train(data.train, data.val, cfg, data.prior, epoch_logger(err));
      save_trained(result, data.train.vocab, o);
      ctx.config_path = train_flags.config.empty() ? std::nullopt : std::optional(train_flags.config);
      ctx.inputs = {{"train", train_flags.train}, {"val", train_flags.val}};
      if (cfg.embeddings) ctx.inputs["embeddings"] = *cfg.embeddings;
      if (cfg.init_from) ctx.inputs["init_from"] = *cfg.init_from;
      ctx.seed = cfg.seed;
      ctx.flags = config_json(cfg);
      ctx.flags["best_epoch"] = result.best_epoch;
      ctx.flags["best_val_ppl"] = result.best_val_ppl;
      ctx.model_for_hash = o;
      write_manifest(ctx, o + ".manifest.json");
      out << "best epoch " << result.best_epoch << " val_ppl " << format_real(result.best_val_ppl) << "\n";
      return 0;
    }

    if (grid_cmd->parsed()) {
      TrainConfig cfg = grid_flags.resolve(ConfigUse::GridSearch);
      if (!cfg.embeddings) throw UsageError("grid-lambda requires --embeddings");
      const auto& o = grid_flags.out;
      ctx.command = "grid-lambda";
      ctx.outputs = {o, o + ".vocab", o + ".history.csv", o + ".lambda.csv"};
      guard_outputs({o, o + ".vocab", o + ".history.csv", o + ".lambda.csv", o + ".manifest.json"}, force);
      auto data = load_training_data(cfg, grid_flags, err);
      auto search = grid_search_lambda(data.train, data.val, cfg, *data.prior);
      save_trained(search.best, data.train.vocab, o);
      std::string table = "lambda,val_ppl\n";
      for (const auto& [lambda, ppl] : search.table) table += format_real(lambda) + "," + format_real(ppl) + "\n";
      write_text(o + ".lambda.csv", table);
      ctx.config_path = grid_flags.config.empty() ? std::nullopt : std::optional(grid_flags.config);
      ctx.inputs = {{"train", grid_flags.train}, {"val", grid_flags.val}, {"embeddings", *cfg.embeddings}};
      ctx.seed = cfg.seed;
      ctx.flags = config_json(cfg);
      ctx.flags["best_lambda"] = search.best_lambda;
      ctx.model_for_hash = o;
      write_manifest(ctx, o + ".manifest.json");
      out << "best lambda " << format_real(search.best_lambda) << "\n";
      return 0;
    }

    // Evaluation commands share model + vocabulary loading.
    ctx.inputs["model"] = model_path;
    ctx.model_for_hash = model_path;
    if (!out_path.empty()) {
      ctx.outputs = {out_path};
      guard_outputs({out_path, out_path + ".manifest.json"}, force);
    }
    const Model model = load_model(model_path);
    const Vocabulary vocab = vocabulary_for(model_path, vocab_path);
    require_vocab_match(model, vocab);
    ctx.inputs["vocab"] = vocab_path.empty() ? model_path + ".vocab" : vocab_path;
    auto finish = [&] {
      if (!out_path.empty()) write_manifest(ctx, out_path + ".manifest.json");
      return 0;
    };

    if (ppl_cmd->parsed()) {
      ctx.command = "ppl";
      ctx.inputs["corpus"] = corpus_path;
      auto corpus = load_corpus(corpus_path, vocab);
      auto report = perplexity_report(model, corpus);
      out << format_real(report.value) << "\n";
      if (!out_path.empty()) {
        json j;
        j["ppl"] = report.value;
        j["ppl_fwd"] = report.fwd;
        j["ppl_bwd"] = report.bwd ? json(*report.bwd) : json(nullptr);
        j["documents"] = corpus.size();
        j["skipped_documents"] = corpus.skipped_lines.size();
        write_text(out_path, j.dump(2) + "\n");
      }
      return finish();
    }

    if (ir_cmd->parsed()) {
      ctx.command = "ir";
      ctx.inputs["train"] = train_path;
      ctx.inputs["test"] = test_path;
      auto fractions = parse_fractions(fractions_text);
      ctx.flags["fractions"] = fractions;
      auto train_c = load_corpus(train_path, vocab);
      auto test_c = load_corpus(test_path, vocab);
      auto curve = retrieval_precision(model, train_c, test_c, fractions);
      std::string csv = "fraction,precision\n";
      for (double f : fractions) csv += format_real(f) + "," + format_real(curve.at(f)) + "\n";
      write_text(out_path, csv);
      out << csv;
      return finish();
    }

    if (topics_cmd->parsed()) {
      ctx.command = "topics";
      ctx.flags["n"] = top_n;
      std::string csv = "topic,rank,word,weight\n";
      for (std::size_t t = 0; t < model.params.hidden; ++t) {
        auto words = topic_top_words(model, vocab, t, top_n);
        for (std::size_t r = 0; r < words.size(); ++r) {
          const auto w = static_cast<Eigen::Index>(*vocab.index_of(words[r]));
          csv += std::to_string(t) + "," + std::to_string(r + 1) + "," + words[r] + "," +
                 format_real(model.params.W(static_cast<Eigen::Index>(t), w)) + "\n";
        }
      }
      write_text(out_path, csv);
      return finish();
    }

    if (coh_cmd->parsed()) {
      ctx.command = "coherence";
      ctx.inputs["reference"] = reference_path;
      ctx.flags["n"] = top_n;
      ctx.flags["window"] = window;
      auto reference = load_corpus_building_vocab(reference_path, std::numeric_limits<std::size_t>::max());
      std::vector<std::vector<std::string>> topics;
      for (std::size_t t = 0; t < model.params.hidden; ++t) topics.push_back(topic_top_words(model, vocab, t, top_n));
      auto report = coherence_npmi(topics, reference, window);
      std::string csv = "topic,score\n";
      for (std::size_t t = 0; t < report.scores.size(); ++t)
        csv += std::to_string(t) + "," + format_real(report.scores[t]) + "\n";
      write_text(out_path, csv);
      ctx.flags["mean_coherence"] = report.mean;
      ctx.flags["missing_words"] = report.missing_words;
      ctx.flags["skipped_pairs"] = report.skipped_pairs;
      out << "mean coherence " << format_real(report.mean) << "\n";
      return finish();
    }

    if (nn_cmd->parsed()) {
      ctx.command = "neighbors";
      ctx.flags["word"] = word;
      ctx.flags["n"] = neighbors_n;
      std::string csv = "word,cosine\n";
      for (const auto& [tok, cos] : nearest_neighbors(model, vocab, word, neighbors_n))
        csv += tok + "," + format_real(cos) + "\n";
      out << csv;
      if (!out_path.empty()) write_text(out_path, csv);
      return finish();
    }

    if (cls_cmd->parsed()) {
      ctx.command = "classify";
      ctx.inputs["train"] = train_path;
      ctx.inputs["test"] = test_path;
      ctx.flags["l2"] = l2;
      auto train_c = load_corpus(train_path, vocab);
      auto test_c = load_corpus(test_path, vocab);
      std::vector<Eigen::VectorXd> train_reps, test_reps;
      if (!glove_path.empty()) {
        ctx.inputs["glove"] = glove_path;
        std::size_t dim = 0;
        {
          std::ifstream g(glove_path);
          std::string first;
          if (!g || !std::getline(g, first)) throw DataError("cannot read '" + glove_path + "'");
          dim = idne::detail::split_ws(first).size() - 1;
        }
        auto prior = load_embedding_prior(glove_path, vocab, dim, 1.0);
        for (const auto& d : train_c.documents) train_reps.push_back(glove_sum_representation(d, prior));
        for (const auto& d : test_c.documents) test_reps.push_back(glove_sum_representation(d, prior));
      } else {
        train_reps = document_representations(model, train_c);
        test_reps = document_representations(model, test_c);
      }
      auto report = evaluate_classification(train_reps, labels_of(train_c), test_reps, labels_of(test_c), l2);
      json j;
      j["macro_f1"] = report.macro_f1;
      j["accuracy"] = report.accuracy;
      j["multi_label"] = report.multi_label;
      j["iterations"] = report.iterations;
      write_text(out_path, j.dump(2) + "\n");
      out << "macro_f1 " << format_real(report.macro_f1) << " accuracy " << format_real(report.accuracy) << "\n";
      return finish();
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace idne::cli
