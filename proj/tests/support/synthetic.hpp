#pragma once

// Seeded synthetic corpora with known generative structure.

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "idne/corpus.hpp"

namespace idne::testing {

inline Vocabulary numbered_vocabulary(std::size_t size, const std::string& prefix = "w") {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < size; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03zu", prefix.c_str(), i);
    tokens.emplace_back(buf);
  }
  return Vocabulary(std::move(tokens));
}

// Random categorical weights over `n` outcomes (normalized exponential draws).
inline std::vector<double> random_multinomial(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& x : w) s += (x = e(rng));
  for (auto& x : w) x /= s;
  return w;
}

struct TwoTopicShape {
  std::size_t vocab_size = 100;  // split into two disjoint halves, one per topic
  std::size_t doc_length = 20;
};

// Topic multinomials are fixed by `topic_seed`; document draws by `doc_seed`.
class TwoTopicSource {
 public:
  TwoTopicSource(TwoTopicShape shape, std::uint64_t topic_seed) : shape_(shape), vocab_(numbered_vocabulary(shape.vocab_size)) {
    std::mt19937_64 rng(topic_seed);
    const std::size_t half = shape.vocab_size / 2;
    for (int t = 0; t < 2; ++t) {
      auto w = random_multinomial(half, rng);
      topics_[t] = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    }
  }

  Corpus sample(std::size_t docs, std::uint64_t doc_seed) const {
    std::mt19937_64 rng(doc_seed);
    std::bernoulli_distribution coin(0.5);
    Corpus c;
    c.vocab = vocab_;
    const std::size_t half = shape_.vocab_size / 2;
    for (std::size_t n = 0; n < docs; ++n) {
      const int t = coin(rng) ? 1 : 0;
      Document d;
      d.labels = {t ? "topic1" : "topic0"};
      auto dist = topics_[t];
      for (std::size_t i = 0; i < shape_.doc_length; ++i) d.words.push_back(t * half + dist(rng));
      c.documents.push_back(std::move(d));
    }
    return c;
  }

  const Vocabulary& vocab() const { return vocab_; }

 private:
  TwoTopicShape shape_;
  Vocabulary vocab_;
  std::discrete_distribution<std::size_t> topics_[2];
};

// Documents whose first half is drawn from a large shared pool with weakly
// topic-dependent weights, and whose second half uses a few words specific to
// the topic. The topic is therefore clear from the second half but only
// faintly visible in the first.
class HiddenTopicSource {
 public:
  HiddenTopicSource(std::size_t topics, std::size_t pool_words, std::size_t cue_words_per_topic, std::size_t half_length,
                    std::uint64_t topic_seed)
      : topics_(topics), pool_(pool_words), cues_(cue_words_per_topic), half_(half_length),
        vocab_(numbered_vocabulary(pool_words + topics * cue_words_per_topic)) {
    std::mt19937_64 rng(topic_seed);
    for (std::size_t t = 0; t < topics; ++t) {
      auto w = random_multinomial(pool_words, rng);
      pool_dist_.emplace_back(w.begin(), w.end());
    }
  }

  Corpus sample(std::size_t docs, std::uint64_t doc_seed) const {
    std::mt19937_64 rng(doc_seed);
    std::uniform_int_distribution<std::size_t> pick_topic(0, topics_ - 1);
    std::uniform_int_distribution<std::size_t> pick_cue(0, cues_ - 1);
    Corpus c;
    c.vocab = vocab_;
    for (std::size_t n = 0; n < docs; ++n) {
      const std::size_t t = pick_topic(rng);
      Document d;
      d.labels = {"topic" + std::to_string(t)};
      auto dist = pool_dist_[t];
      for (std::size_t i = 0; i < half_; ++i) d.words.push_back(dist(rng));
      for (std::size_t i = 0; i < half_; ++i) d.words.push_back(pool_ + t * cues_ + pick_cue(rng));
      c.documents.push_back(std::move(d));
    }
    return c;
  }

 private:
  std::size_t topics_, pool_, cues_, half_;
  Vocabulary vocab_;
  std::vector<std::discrete_distribution<std::size_t>> pool_dist_;
};

// Add-one smoothed unigram model fitted on `train`, perplexity on `test`
// (same per-document averaging as the topic-model perplexity).
inline double unigram_perplexity(const Corpus& train, const Corpus& test) {
  std::vector<double> counts(train.vocab.size(), 1.0);
  double total = static_cast<double>(counts.size());
  for (const auto& d : train.documents)
    for (auto w : d.words) {
      counts[w] += 1.0;
      total += 1.0;
    }
  double acc = 0.0;
  for (const auto& d : test.documents) {
    double lp = 0.0;
    for (auto w : d.words) lp += std::log(counts[w] / total);
    acc += lp / static_cast<double>(d.size());
  }
  return std::exp(-acc / static_cast<double>(test.size()));
}

}  // namespace idne::testing
