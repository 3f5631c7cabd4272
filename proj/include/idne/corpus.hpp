#pragma once

// Corpus ingestion: vocabularies, index-encoded documents, and pre-trained
// embedding priors aligned to a vocabulary.
//
// File formats
//   corpus:     one document per line, "<label[,label]*>\t<token( token)*>"
//               (the label field may be empty)
//   vocabulary: one token per line, the 0-based line number is the index
//   embeddings: "token f_1 ... f_H", single-space separated, one per line

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "idne/error.hpp"

namespace idne {

using WordId = std::size_t;
using TokenSeq = std::vector<std::string>;

class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].empty()) throw DataError("vocabulary token " + std::to_string(i) + " is empty");
      if (!index_.emplace(tokens_[i], i).second)
        throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(WordId id) const { return tokens_.at(id); }

  std::optional<WordId> index_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view token) const { return index_of(token).has_value(); }

  // A model needs at least two words to define a distribution.
  void require_model_ready() const {
    if (size() < 2)
      throw DataError("vocabulary has " + std::to_string(size()) + " token(s); at least 2 required");
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, WordId> index_;
};

struct Document {
  std::vector<WordId> words;
  std::vector<std::string> labels;  // sorted, unique

  std::size_t size() const { return words.size(); }
  bool empty() const { return words.empty(); }
};

struct Corpus {
  std::vector<Document> documents;
  Vocabulary vocab;
  // Source line numbers (1-based) of documents dropped because every token was OOV.
  std::vector<std::size_t> skipped_lines;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }

  bool has_labels() const {
    return std::any_of(documents.begin(), documents.end(),
                       [](const Document& d) { return !d.labels.empty(); });
  }
};

struct EmbeddingPrior {
  Eigen::MatrixXd E;  // H x K, zero columns for tokens missing from the file
  double lambda = 0.0;
  double coverage = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(E.rows()); }
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r' || s[i] == '\n')) ++i;
    std::size_t j = i;
    while (j < s.size() && !(s[j] == ' ' || s[j] == '\t' || s[j] == '\r' || s[j] == '\n')) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string_view chomp(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> parse_labels(std::string_view field) {
  std::vector<std::string> labels;
  std::size_t start = 0;
  while (start <= field.size()) {
    std::size_t comma = field.find(',', start);
    if (comma == std::string_view::npos) comma = field.size();
    auto lab = field.substr(start, comma - start);
    while (!lab.empty() && lab.front() == ' ') lab.remove_prefix(1);
    while (!lab.empty() && lab.back() == ' ') lab.remove_suffix(1);
    if (!lab.empty()) labels.emplace_back(lab);
    start = comma + 1;
  }
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

struct RawLine {
  std::size_t line_no;
  std::vector<std::string> labels;
  TokenSeq tokens;
};

inline std::vector<RawLine> read_raw_corpus(const std::string& path) {
  auto in = open_input(path);
  std::vector<RawLine> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = chomp(line);
    if (view.empty()) continue;
    auto tab = view.find('\t');
    if (tab == std::string_view::npos)
      throw DataError(path + ":" + std::to_string(line_no) + ": missing TAB between labels and tokens");
    RawLine raw{line_no, parse_labels(view.substr(0, tab)), {}};
    for (auto tok : split_ws(view.substr(tab + 1))) raw.tokens.emplace_back(tok);
    lines.push_back(std::move(raw));
  }
  return lines;
}

}  // namespace detail

// The max_size most frequent tokens; ties go to the lexicographically smaller
// token, and indices follow that same order.
inline Vocabulary build_vocabulary(std::span<const TokenSeq> docs, std::size_t max_size) {
  if (max_size < 2) throw DataError("vocabulary max_size must be >= 2");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : docs)
    for (const auto& tok : doc) ++counts[tok];
  if (counts.empty()) throw DataError("empty corpus");

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);

  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, n] : ranked) tokens.push_back(std::move(tok));
  return Vocabulary(std::move(tokens));
}

// OOV tokens are dropped; nullopt when nothing survives.
inline std::optional<Document> encode_document(std::span<const std::string> tokens, const Vocabulary& vocab,
                                               std::vector<std::string> labels = {}) {
  Document doc;
  doc.labels = std::move(labels);
  std::sort(doc.labels.begin(), doc.labels.end());
  doc.labels.erase(std::unique(doc.labels.begin(), doc.labels.end()), doc.labels.end());
  doc.words.reserve(tokens.size());
  for (const auto& tok : tokens)
    if (auto id = vocab.index_of(tok)) doc.words.push_back(*id);
  if (doc.words.empty()) return std::nullopt;
  return doc;
}

inline TokenSeq decode_document(const Document& doc, const Vocabulary& vocab) {
  TokenSeq out;
  out.reserve(doc.size());
  for (auto w : doc.words) out.push_back(vocab.token(w));
  return out;
}

namespace detail {

inline Corpus encode_raw(std::vector<RawLine>& raw, Vocabulary vocab) {
  Corpus corpus;
  corpus.vocab = std::move(vocab);
  for (auto& line : raw) {
    if (auto doc = encode_document(line.tokens, corpus.vocab, std::move(line.labels)))
      corpus.documents.push_back(std::move(*doc));
    else
      corpus.skipped_lines.push_back(line.line_no);
  }
  return corpus;
}

}  // namespace detail

// Encode against an existing (train) vocabulary.
inline Corpus load_corpus(const std::string& path, const Vocabulary& vocab) {
  auto raw = detail::read_raw_corpus(path);
  return detail::encode_raw(raw, vocab);
}

// Build the vocabulary from this file only, then encode it.
inline Corpus load_corpus_building_vocab(const std::string& path, std::size_t max_vocab_size) {
  auto raw = detail::read_raw_corpus(path);
  std::vector<TokenSeq> token_docs;
  token_docs.reserve(raw.size());
  for (const auto& line : raw) token_docs.push_back(line.tokens);
  auto vocab = build_vocabulary(token_docs, max_vocab_size);
  return detail::encode_raw(raw, std::move(vocab));
}

inline Vocabulary load_vocabulary(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    auto view = detail::chomp(line);
    tokens.emplace_back(view);
  }
  return Vocabulary(std::move(tokens));
}

inline void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const auto& tok : vocab.tokens()) out << tok << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

// Column j of E holds the file vector for vocab token j, or zeros when the
// token is absent. The first occurrence of a repeated token wins.
inline EmbeddingPrior load_embedding_prior(const std::string& path, const Vocabulary& vocab, std::size_t hidden,
                                           double lambda) {
  if (!(lambda >= 0.0)) throw DataError("embedding mixture weight lambda must be >= 0");
  auto in = detail::open_input(path);
  EmbeddingPrior prior;
  prior.lambda = lambda;
  prior.E = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(vocab.size()));
  std::vector<bool> seen(vocab.size(), false);
  std::size_t found = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = detail::split_ws(detail::chomp(line));
    if (fields.empty()) continue;
    if (fields.size() - 1 != hidden)
      throw DataError(path + ":" + std::to_string(line_no) + ": embedding dimension != H (got " +
                      std::to_string(fields.size() - 1) + ", expected " + std::to_string(hidden) + ")");
    auto id = vocab.index_of(fields[0]);
    if (!id || seen[*id]) continue;
    for (std::size_t k = 0; k < hidden; ++k) {
      auto f = fields[k + 1];
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
      if (ec != std::errc() || ptr != f.data() + f.size())
        throw DataError(path + ":" + std::to_string(line_no) + ": bad float '" + std::string(f) + "'");
      prior.E(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(*id)) = value;
    }
    seen[*id] = true;
    ++found;
  }
  prior.coverage = vocab.size() == 0 ? 0.0 : static_cast<double>(found) / static_cast<double>(vocab.size());
  return prior;
}

}  // namespace idne
