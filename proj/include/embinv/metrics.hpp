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
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "embinv/error.hpp"

namespace embinv::metrics {

inline std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString out = norm->normalize(u, status);
  if (U_FAILURE(status)) throw Error("NFC normalization failed");
  std::string s;
  out.toUTF8String(s);
  return s;
}

// Lowercase, NFC-normalize, isolate punctuation code points as their own
// tokens, split on whitespace.
inline std::vector<std::string> tokenize(std::string_view text) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  u.toLower(icu::Locale::getRoot());
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  u = norm->normalize(u, status);
  if (U_FAILURE(status)) throw Error("NFC normalization failed");

  std::vector<std::string> tokens;
  icu::UnicodeString current;
  auto flush = [&] {
    if (current.isEmpty()) return;
    std::string s;
    current.toUTF8String(s);
    tokens.push_back(std::move(s));
    current.remove();
  };
  for (int32_t i = 0; i < u.length();) {
    const UChar32 c = u.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      flush();
    } else if (u_ispunct(c)) {
      flush();
      current.append(c);
      flush();
    } else {
      current.append(c);
    }
  }
  flush();
  return tokens;
}

namespace detail {

using Gram = std::vector<std::string_view>;

inline std::map<Gram, int> ngram_counts(std::span<const std::string> tokens, std::size_t n) {
  std::map<Gram, int> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    Gram g(tokens.begin() + static_cast<std::ptrdiff_t>(i),
           tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[g];
  }
  return counts;
}

// Size of the multiset intersection of two token lists.
inline std::size_t clipped_overlap(std::span<const std::string> pred,
                                   std::span<const std::string> ref) {
  auto p = ngram_counts(pred, 1);
  auto r = ngram_counts(ref, 1);
  std::size_t overlap = 0;
  for (const auto& [g, c] : p) {
    auto it = r.find(g);
    if (it != r.end()) overlap += static_cast<std::size_t>(std::min(c, it->second));
  }
  return overlap;
}

}  // namespace detail

inline constexpr int kBleuOrder = 4;

// Sentence BLEU-4 in [0, 100]. Zero precisions are smoothed to 1/(2c) where
// c is the prediction length; brevity penalty exp(1 - r/c) when c < r.
inline double bleu_tokens(std::span<const std::string> pred,
                          std::span<const std::string> ref) {
  const std::size_t c = pred.size();
  const std::size_t r = ref.size();
  if (c == 0 && r == 0) return 100.0;
  if (c == 0 || r == 0) return 0.0;
  // Orders longer than the prediction have no n-grams to score and are left
  // out of the geometric mean (effective order), so identical short strings
  // still score 100.
  const std::size_t orders = std::min<std::size_t>(kBleuOrder, c);
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= orders; ++n) {
    const auto p_counts = detail::ngram_counts(pred, n);
    const auto r_counts = detail::ngram_counts(ref, n);
    std::size_t matches = 0;
    for (const auto& [g, cnt] : p_counts) {
      auto it = r_counts.find(g);
      if (it != r_counts.end()) matches += static_cast<std::size_t>(std::min(cnt, it->second));
    }
    const std::size_t total = c - n + 1;
    const double p = matches == 0 ? 1.0 / (2.0 * static_cast<double>(c))
                                   : static_cast<double>(matches) / static_cast<double>(total);
    log_sum += std::log(p);
  }
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(orders));
}

inline double bleu(std::string_view pred, std::string_view ref) {
  return bleu_tokens(tokenize(pred), tokenize(ref));
}

inline double rouge1_recall_tokens(std::span<const std::string> pred,
                                   std::span<const std::string> ref) {
  if (ref.empty()) return pred.empty() ? 1.0 : 0.0;
  return static_cast<double>(detail::clipped_overlap(pred, ref)) /
         static_cast<double>(ref.size());
}

inline double rouge1_recall(std::string_view pred, std::string_view ref) {
  return rouge1_recall_tokens(tokenize(pred), tokenize(ref));
}

// Multiset token F1.
inline double token_f1_tokens(std::span<const std::string> pred,
                              std::span<const std::string> ref) {
  if (pred.empty() && ref.empty()) return 1.0;
  if (pred.empty() || ref.empty()) return 0.0;
  const auto overlap = static_cast<double>(detail::clipped_overlap(pred, ref));
  if (overlap == 0.0) return 0.0;
  const double precision = overlap / static_cast<double>(pred.size());
  const double recall = overlap / static_cast<double>(ref.size());
  return 2.0 * precision * recall / (precision + recall);
}

inline double token_f1(std::string_view pred, std::string_view ref) {
  return token_f1_tokens(tokenize(pred), tokenize(ref));
}

// Case-sensitive; only NFC normalization is applied.
inline bool exact(std::string_view pred, std::string_view ref) {
  return nfc(pred) == nfc(ref);
}

inline double exact_match(std::span<const std::pair<std::string, std::string>> pairs) {
  if (pairs.empty()) throw ConfigError("exact_match: empty pair list");
  std::size_t hits = 0;
  for (const auto& [p, r] : pairs) hits += exact(p, r) ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pairs.size());
}

using Qrels = std::map<std::string, int>;

// Exponential-gain NDCG@k. Zero when no document has positive relevance.
inline double ndcg_at_k(std::span<const std::string> ranking, const Qrels& qrels, std::size_t k) {
  if (k < 1) throw ConfigError("ndcg_at_k: k must be >= 1");
  auto gain = [](int rel) { return std::exp2(static_cast<double>(rel)) - 1.0; };
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
    auto it = qrels.find(ranking[i]);
    if (it != qrels.end() && it->second > 0) {
      dcg += gain(it->second) / std::log2(static_cast<double>(i) + 2.0);
    }
  }
  std::vector<int> grades;
  for (const auto& [doc, rel] : qrels) {
    if (rel > 0) grades.push_back(rel);
  }
  if (grades.empty()) return 0.0;
  std::sort(grades.begin(), grades.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
    idcg += gain(grades[i]) / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

struct MetricReport {
  double bleu = 0.0;           // [0, 100]
  double rouge1_recall = 0.0;  // [0, 1]
  double token_f1 = 0.0;       // [0, 1]
  double exact_match = 0.0;    // percentage
  double cos = 0.0;
  double num_tokens_ref = 0.0;
  double num_tokens_pred = 0.0;
  std::size_t pairs = 1;  // reconstruction pairs behind this report

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

// Metrics for one reconstruction; `cos` is the embedding-space cosine the
// caller measured between the reconstruction and the target.
inline MetricReport evaluate_pair(std::string_view pred, std::string_view ref, double cos) {
  const auto p = tokenize(pred);
  const auto r = tokenize(ref);
  MetricReport m;
  m.bleu = bleu_tokens(p, r);
  m.rouge1_recall = rouge1_recall_tokens(p, r);
  m.token_f1 = token_f1_tokens(p, r);
  m.exact_match = exact(pred, ref) ? 100.0 : 0.0;
  m.cos = cos;
  m.num_tokens_ref = static_cast<double>(r.size());
  m.num_tokens_pred = static_cast<double>(p.size());
  m.pairs = 1;
  return m;
}

// Mean of every field; exact_match is re-derived as a percentage over all
// underlying pairs.
inline MetricReport aggregate(std::span<const MetricReport> reports) {
  if (reports.empty()) throw ConfigError("aggregate: empty report list");
  MetricReport out;
  out.pairs = 0;
  double hits = 0.0;
  for (const auto& m : reports) {
    out.bleu += m.bleu;
    out.rouge1_recall += m.rouge1_recall;
    out.token_f1 += m.token_f1;
    out.cos += m.cos;
    out.num_tokens_ref += m.num_tokens_ref;
    out.num_tokens_pred += m.num_tokens_pred;
    hits += m.exact_match / 100.0 * static_cast<double>(m.pairs);
    out.pairs += m.pairs;
  }
  const auto n = static_cast<double>(reports.size());
  out.bleu /= n;
  out.rouge1_recall /= n;
  out.token_f1 /= n;
  out.cos /= n;
  out.num_tokens_ref /= n;
  out.num_tokens_pred /= n;
  out.exact_match = out.pairs == 0 ? 0.0 : 100.0 * hits / static_cast<double>(out.pairs);
  return out;
}

}  // namespace embinv::metrics
