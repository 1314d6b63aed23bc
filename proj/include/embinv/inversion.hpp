// Copyright 2026 The embinv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "embinv/core.hpp"
#include "embinv/error.hpp"

namespace embinv {

// Hypothesis texts are vocabulary tokens joined by single spaces.
inline std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

struct Hypothesis {
  std::string text;
  Embedding embedding;  // re-embedded hypothesis
  double score = -std::numeric_limits<double>::infinity();  // cosine to target
  int step = 0;
};

// Total order used everywhere candidates are ranked: score descending, then
// text ascending. Makes beams independent of scoring order.
inline bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.text < b.text;
}

struct AttackConfig {
  int steps = 0;
  std::size_t beam_width = 1;
  std::size_t max_tokens = 32;
  std::vector<std::string> vocab;
  std::optional<std::uint64_t> query_budget;
  std::uint64_t seed = 0;  // mutation generator seed

  void validate() const {
    if (steps < 0) throw ConfigError("attack steps must be >= 0");
    if (beam_width < 1) throw ConfigError("beam width must be >= 1");
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    if (query_budget && *query_budget == 0) {
      throw ConfigError("query_budget must be positive when set");
    }
    if (vocab.empty()) throw ConfigError("attack vocabulary is empty");
    std::unordered_set<std::string> seen;
    for (const auto& tok : vocab) {
      if (tok.empty() || tok.find_first_of(" \t\n\r") != std::string::npos) {
        throw ConfigError("vocabulary token must be non-empty without whitespace: '" +
                          tok + "'");
      }
      if (!seen.insert(tok).second) throw ConfigError("duplicate vocabulary token '" + tok + "'");
    }
  }
};

enum class Termination { completed, budget_exhausted, converged };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::budget_exhausted: return "budget_exhausted";
    case Termination::converged: return "converged";
  }
  return "?";
}

struct AttackResult {
  Hypothesis best;
  std::vector<double> beam_history;  // best-so-far score after base and each step
  std::uint64_t queries_used = 0;
  std::chrono::nanoseconds wall_time{0};
  Termination terminated = Termination::completed;
};

// Stand-in for a trained corrector: proposes up to k candidate texts for a
// hypothesis. Must be deterministic in (h, k) for a fixed generator state.
class MutationGenerator {
 public:
  virtual ~MutationGenerator() = default;
  virtual std::vector<std::string> propose(const Hypothesis& h, std::size_t k) const = 0;
};

// Single-token substitute / insert / delete over the vocabulary. The full
// neighbourhood is shuffled with a key of (seed, text) and a window of k
// candidates is taken at offset step*k, so a hypothesis that survives several
// steps walks through its whole neighbourhood.
class EditMutationGenerator final : public MutationGenerator {
 public:
  EditMutationGenerator(std::vector<std::string> vocab, std::size_t max_tokens,
                        std::uint64_t seed)
      : vocab_(std::move(vocab)), max_tokens_(max_tokens), seed_(seed) {}

  std::vector<std::string> neighbourhood(std::string_view text) const {
    const auto tokens = split_tokens(text);
    std::vector<std::string> out;
    std::vector<std::string> work;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      for (const auto& v : vocab_) {
        if (v == tokens[i]) continue;
        work = tokens;
        work[i] = v;
        out.push_back(join_tokens(work));
      }
    }
    if (tokens.size() < max_tokens_) {
      for (std::size_t i = 0; i <= tokens.size(); ++i) {
        for (const auto& v : vocab_) {
          work = tokens;
          work.insert(work.begin() + static_cast<std::ptrdiff_t>(i), v);
          out.push_back(join_tokens(work));
        }
      }
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      work = tokens;
      work.erase(work.begin() + static_cast<std::ptrdiff_t>(i));
      out.push_back(join_tokens(work));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    std::erase(out, std::string(text));
    return out;
  }

  std::vector<std::string> propose(const Hypothesis& h, std::size_t k) const override {
    auto pool = neighbourhood(h.text);
    if (pool.empty() || k == 0) return {};
    // Fisher-Yates with splitmix64; std::shuffle's algorithm is unspecified.
    std::uint64_t state = hashing::hash_string(h.text, seed_);
    for (std::size_t i = pool.size() - 1; i > 0; --i) {
      state = hashing::splitmix64(state);
      std::swap(pool[i], pool[state % (i + 1)]);
    }
    const std::size_t take = std::min(k, pool.size());
    const std::size_t offset =
        (static_cast<std::size_t>(std::max(h.step, 0)) * k) % pool.size();
    std::vector<std::string> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(pool[(offset + i) % pool.size()]);
    return out;
  }

 private:
  std::vector<std::string> vocab_;
  std::size_t max_tokens_;
  std::uint64_t seed_;
};

namespace detail {

// Embeds and scores candidate texts for one attack, enforcing the query
// budget and tracking the best hypothesis ever scored.
class Scorer {
 public:
  Scorer(const Embedding& target, BlackBoxEmbedder& embedder,
         std::optional<std::uint64_t> budget)
      : target_(target), embedder_(embedder), budget_(budget) {
    if (embedder.dimension() != target.dim()) {
      throw DimensionError("embedder dimension " + std::to_string(embedder.dimension()) +
                           " does not match target dimension " +
                           std::to_string(target.dim()));
    }
  }

  // Scores as many texts as the budget allows, in the given order.
  std::vector<Hypothesis> score(std::span<const std::string> texts, int step) {
    std::size_t n = texts.size();
    if (budget_) {
      const std::uint64_t left = *budget_ - std::min(*budget_, used_);
      if (left < n) {
        n = static_cast<std::size_t>(left);
        exhausted_ = true;
      }
    }
    std::vector<Hypothesis> out;
    if (n == 0) return out;
    auto embeddings = embedder_.embed_batch(texts.first(n));
    used_ += n;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Hypothesis h{texts[i], std::move(embeddings[i]), 0.0, step};
      h.score = cosine(h.embedding, target_);
      if (!best_ || h.score > best_->score) best_ = h;
      out.push_back(std::move(h));
    }
    return out;
  }

  bool exhausted() const { return exhausted_; }
  std::uint64_t used() const { return used_; }
  const std::optional<Hypothesis>& best() const { return best_; }

 private:
  const Embedding& target_;
  BlackBoxEmbedder& embedder_;
  std::optional<std::uint64_t> budget_;
  std::uint64_t used_ = 0;
  bool exhausted_ = false;
  std::optional<Hypothesis> best_;
};

inline Hypothesis base_hypothesis(Scorer& scorer, const AttackConfig& config) {
  const std::string empty;
  auto scored = scorer.score(std::span(&empty, 1), 0);
  if (scored.empty()) return Hypothesis{"", Embedding{}, 0.0, 0};
  Hypothesis current = std::move(scored.front());
  std::vector<std::string> candidates;
  for (std::size_t pos = 0; pos < config.max_tokens; ++pos) {
    candidates.clear();
    for (const auto& tok : config.vocab) {
      candidates.push_back(current.text.empty() ? tok : current.text + " " + tok);
    }
    auto round = scorer.score(candidates, 0);
    if (round.empty()) break;
    auto best = std::min_element(round.begin(), round.end(), ranks_before);
    if (best->score <= current.score) break;
    current = std::move(*best);
    if (scorer.exhausted()) break;
  }
  return current;
}

inline std::vector<Hypothesis> correction_step(std::span<const Hypothesis> beam,
                                               Scorer& scorer,
                                               const MutationGenerator& gen,
                                               std::size_t b, int next_step) {
  std::set<std::string> pool;
  for (const auto& h : beam) {
    for (auto& text : gen.propose(h, b)) pool.insert(std::move(text));
  }
  if (pool.empty()) return {beam.begin(), beam.end()};
  const std::vector<std::string> texts(pool.begin(), pool.end());
  auto scored = scorer.score(texts, next_step);
  if (scored.empty()) return {beam.begin(), beam.end()};
  const std::size_t keep = std::min(b, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), ranks_before);
  scored.resize(keep);
  return scored;
}

}  // namespace detail

// Greedy token-by-token construction: append the vocabulary token that
// maximizes cosine to the target, stop at max_tokens or when nothing improves.
inline Hypothesis base_hypothesis(const Embedding& target, BlackBoxEmbedder& embedder,
                                  const AttackConfig& config) {
  config.validate();
  detail::Scorer scorer(target, embedder, config.query_budget);
  return detail::base_hypothesis(scorer, config);
}

// One sequence-level beam step: every member proposes up to b continuations,
// the pooled b*b candidates are de-duplicated, scored and cut to the top b.
// Parents are not carried over.
inline std::vector<Hypothesis> correction_step(std::span<const Hypothesis> beam,
                                               const Embedding& target,
                                               const MutationGenerator& gen,
                                               BlackBoxEmbedder& embedder, std::size_t b) {
  if (beam.empty()) throw ConfigError("correction_step: empty beam");
  if (b < 1) throw ConfigError("correction_step: beam width must be >= 1");
  detail::Scorer scorer(target, embedder, std::nullopt);
  int step = 0;
  for (const auto& h : beam) step = std::max(step, h.step);
  return detail::correction_step(beam, scorer, gen, b, step + 1);
}

inline constexpr double kConvergedScore = 1.0 - 1e-9;

inline AttackResult invert(const Embedding& target, BlackBoxEmbedder& embedder,
                           const MutationGenerator& gen, const AttackConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  detail::Scorer scorer(target, embedder, config.query_budget);
  AttackResult result;

  auto finish = [&](Termination t) {
    result.best = scorer.best().value_or(Hypothesis{"", Embedding{}, 0.0, 0});
    result.queries_used = scorer.used();
    result.terminated = t;
    result.wall_time = std::chrono::steady_clock::now() - start;
    return result;
  };
  auto best_score = [&] { return scorer.best() ? scorer.best()->score : 0.0; };

  std::vector<Hypothesis> beam{detail::base_hypothesis(scorer, config)};
  result.beam_history.push_back(best_score());
  if (scorer.exhausted()) return finish(Termination::budget_exhausted);
  if (best_score() >= kConvergedScore) return finish(Termination::converged);

  for (int t = 1; t <= config.steps; ++t) {
    beam = detail::correction_step(beam, scorer, gen, config.beam_width, t);
    result.beam_history.push_back(best_score());
    if (scorer.exhausted()) return finish(Termination::budget_exhausted);
    if (best_score() >= kConvergedScore) return finish(Termination::converged);
  }
  return finish(Termination::completed);
}

inline AttackResult invert(const Embedding& target, BlackBoxEmbedder& embedder,
                           const AttackConfig& config) {
  EditMutationGenerator gen(config.vocab, config.max_tokens, config.seed);
  return invert(target, embedder, gen, config);
}

inline constexpr std::uint64_t kOracleGuard = 1'000'000;

// Every token sequence of length 0..max_len, shortest first, each length in
// lexicographic vocabulary-index order.
inline std::vector<std::string> enumerate_sequences(std::span<const std::string> vocab,
                                                    std::size_t max_len) {
  if (vocab.empty()) throw ConfigError("exhaustive_oracle: empty vocabulary");
  std::uint64_t total = 0, layer = 1;
  for (std::size_t len = 0; len <= max_len; ++len) {
    total += layer;
    if (total > kOracleGuard) {
      throw SizeError("exhaustive_oracle: enumeration exceeds " +
                      std::to_string(kOracleGuard) + " candidates");
    }
    if (len < max_len) layer *= vocab.size();
    if (layer > kOracleGuard) {
      throw SizeError("exhaustive_oracle: enumeration exceeds " +
                      std::to_string(kOracleGuard) + " candidates");
    }
  }
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(total));
  out.emplace_back();
  std::vector<std::size_t> idx;
  std::vector<std::string> tokens;
  for (std::size_t len = 1; len <= max_len; ++len) {
    idx.assign(len, 0);
    while (true) {
      tokens.clear();
      for (auto i : idx) tokens.push_back(vocab[i]);
      out.push_back(join_tokens(tokens));
      std::size_t pos = len;
      while (pos > 0 && ++idx[pos - 1] == vocab.size()) idx[--pos] = 0;
      if (pos == 0) break;
    }
  }
  return out;
}

// Global cosine argmax by enumeration; ties go to the lexicographically
// smaller text.
inline Hypothesis exhaustive_oracle(const Embedding& target, BlackBoxEmbedder& embedder,
                                    std::span<const std::string> vocab, std::size_t max_len) {
  const auto texts = enumerate_sequences(vocab, max_len);
  detail::Scorer scorer(target, embedder, std::nullopt);
  std::optional<Hypothesis> best;
  constexpr std::size_t kChunk = 4096;
  for (std::size_t i = 0; i < texts.size(); i += kChunk) {
    const auto chunk = std::span(texts).subspan(i, std::min(kChunk, texts.size() - i));
    for (auto& h : scorer.score(chunk, 0)) {
      if (!best || ranks_before(h, *best)) best = std::move(h);
    }
  }
  return *best;
}

}  // namespace embinv
