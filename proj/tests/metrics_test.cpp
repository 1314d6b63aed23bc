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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "embinv/metrics.hpp"

namespace embinv::metrics {
namespace {

using Tokens = std::vector<std::string>;

// Naive reference: for every prediction n-gram scan the reference for an
// unused equal n-gram. No maps, no hashing.
double naive_bleu(const Tokens& p, const Tokens& r) {
  const std::size_t c = p.size();
  if (c == 0 && r.empty()) return 100.0;
  if (c == 0 || r.empty()) return 0.0;
  const std::size_t orders = c < 4 ? c : 4;
  double logs = 0.0;
  for (std::size_t n = 1; n <= orders; ++n) {
    std::size_t total = c - n + 1;
    std::size_t rn = r.size() >= n ? r.size() - n + 1 : 0;
    std::vector<bool> used(rn, false);
    std::size_t match = 0;
    for (std::size_t i = 0; i < total; ++i) {
      for (std::size_t j = 0; j < rn; ++j) {
        if (used[j]) continue;
        bool eq = true;
        for (std::size_t t = 0; t < n && eq; ++t) eq = p[i + t] == r[j + t];
        if (eq) {
          used[j] = true;
          ++match;
          break;
        }
      }
    }
    double prec = match == 0 ? 1.0 / (2.0 * c) : double(match) / double(total);
    logs += std::log(prec);
  }
  double bp = c < r.size() ? std::exp(1.0 - double(r.size()) / double(c)) : 1.0;
  return 100.0 * bp * std::exp(logs / double(orders));
}

double naive_overlap(const Tokens& p, const Tokens& r) {
  std::vector<bool> used(r.size(), false);
  double m = 0;
  for (const auto& t : p) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (!used[j] && r[j] == t) {
        used[j] = true;
        ++m;
        break;
      }
    }
  }
  return m;
}

std::string join(const Tokens& t) {
  std::string s;
  for (const auto& x : t) s += (s.empty() ? "" : " ") + x;
  return s;
}

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("Hello, World!"), (Tokens{"hello", ",", "world", "!"}));
  EXPECT_EQ(tokenize("  a\tb\n"), (Tokens{"a", "b"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("   ").empty());
  EXPECT_EQ(tokenize("ÜBER straße"), (Tokens{"über", "straße"}));
}

TEST(Tokenize, NfcComposesBeforeComparison) {
  // "e" + combining acute vs precomposed.
  EXPECT_EQ(tokenize("cafe\xcc\x81"), tokenize("caf\xc3\xa9"));
}

TEST(Bleu, Examples) {
  EXPECT_DOUBLE_EQ(bleu("the cat sat", "the cat sat"), 100.0);
  EXPECT_DOUBLE_EQ(bleu("a", "a"), 100.0);
  // p1 = 1/2, p2 smoothed to 1/4; two scorable orders.
  EXPECT_NEAR(bleu("a b", "a c"), 100.0 * std::sqrt(0.5 * 0.25), 1e-12);
  // p1=3/4, p2=2/3, p3=1/2, p4 -> 1/8
  EXPECT_NEAR(bleu("a b c d", "a b c e"), 42.045, 0.01);
  EXPECT_NEAR(bleu("a b c d", "a b c e"), 100.0 * std::pow(1.0 / 32.0, 0.25), 1e-9);
  EXPECT_DOUBLE_EQ(bleu("", ""), 100.0);
  EXPECT_DOUBLE_EQ(bleu("a", ""), 0.0);
  EXPECT_DOUBLE_EQ(bleu("", "a"), 0.0);
}

TEST(Bleu, DisjointPairIsSmoothedNotZero) {
  const double b = bleu("x y", "a b");
  EXPECT_GT(b, 0.0);
  EXPECT_LT(b, 100.0);
  // c=2: two scorable orders, both smoothed to 1/(2c) = 1/4.
  EXPECT_NEAR(b, 100.0 * std::sqrt(0.25 * 0.25), 1e-12);
}

TEST(Bleu, BrevityPenalty) {
  // c=2, r=4: p1 = p2 = 1, only the penalty applies.
  const double expected = 100.0 * std::exp(1.0 - 4.0 / 2.0);
  EXPECT_NEAR(bleu("a b", "a b c d"), expected, 1e-12);
}

TEST(Rouge1, Examples) {
  EXPECT_DOUBLE_EQ(rouge1_recall("a b c", "a b c"), 1.0);
  EXPECT_NEAR(rouge1_recall("a b", "a c d"), 1.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(rouge1_recall("", "a"), 0.0);
  EXPECT_DOUBLE_EQ(rouge1_recall("", ""), 1.0);
  EXPECT_DOUBLE_EQ(rouge1_recall("a", ""), 0.0);
  // Clipped: repeated prediction token counts once.
  EXPECT_DOUBLE_EQ(rouge1_recall("a a a", "a b"), 0.5);
}

TEST(TokenF1, Examples) {
  EXPECT_DOUBLE_EQ(token_f1("a b", "a b"), 1.0);
  EXPECT_DOUBLE_EQ(token_f1("a b", "c d"), 0.0);
  EXPECT_NEAR(token_f1("a b b", "a c"), 0.4, 1e-12);
  EXPECT_DOUBLE_EQ(token_f1("", ""), 1.0);
  EXPECT_DOUBLE_EQ(token_f1("", "a"), 0.0);
}

TEST(ExactMatch, Examples) {
  using P = std::pair<std::string, std::string>;
  const std::vector<P> all{{"a", "a"}, {"b c", "b c"}};
  EXPECT_DOUBLE_EQ(exact_match(all), 100.0);
  const std::vector<P> none{{"a", "b"}, {"A", "a"}};
  EXPECT_DOUBLE_EQ(exact_match(none), 0.0);
  const std::vector<P> one{{"a", "a"}, {"a", "b"}, {"x", "y"}, {"p", "q"}};
  EXPECT_DOUBLE_EQ(exact_match(one), 25.0);
  EXPECT_THROW(exact_match(std::vector<P>{}), ConfigError);
}

TEST(ExactMatch, CaseSensitiveButNfc) {
  EXPECT_FALSE(exact("Hello", "hello"));
  EXPECT_TRUE(exact("cafe\xcc\x81", "caf\xc3\xa9"));
}

TEST(Ndcg, Examples) {
  const Tokens perfect{"d1", "d2", "d3"};
  EXPECT_DOUBLE_EQ(ndcg_at_k(perfect, {{"d1", 2}, {"d2", 1}}, 10), 1.0);
  const Tokens second{"x", "d1", "y"};
  EXPECT_NEAR(ndcg_at_k(second, {{"d1", 1}}, 10), 1.0 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(ndcg_at_k(second, {{"d1", 1}}, 10), 0.6309, 1e-4);
  EXPECT_DOUBLE_EQ(ndcg_at_k(second, {{"d1", 1}}, 1), 0.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(second, {}, 10), 0.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(second, {{"d1", 0}}, 10), 0.0);
  EXPECT_THROW(ndcg_at_k(second, {{"d1", 1}}, 0), ConfigError);
}

TEST(Ndcg, GradedExample) {
  // Ranking puts grade 1 above grade 2.
  const Tokens r{"b", "a"};
  const double dcg = 1.0 + 3.0 / std::log2(3.0);
  const double idcg = 3.0 + 1.0 / std::log2(3.0);
  EXPECT_NEAR(ndcg_at_k(r, {{"a", 2}, {"b", 1}}, 10), dcg / idcg, 1e-12);
}

TEST(Ndcg, InvariantToIrrelevantPermutationsBelowK) {
  std::mt19937_64 rng(4);
  Qrels q{{"r1", 1}, {"r2", 2}, {"r3", 1}};
  for (int t = 0; t < 200; ++t) {
    Tokens ranking{"r1", "r2", "r3"};
    for (int i = 0; i < 12; ++i) ranking.push_back("n" + std::to_string(i));
    std::shuffle(ranking.begin(), ranking.end(), rng);
    const std::size_t k = 1 + rng() % 10;
    const double base = ndcg_at_k(ranking, q, k);
    // Permute only the tail below rank k.
    std::shuffle(ranking.begin() + static_cast<long>(k), ranking.end(), rng);
    EXPECT_DOUBLE_EQ(ndcg_at_k(ranking, q, k), base);
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, 1.0);
  }
}

TEST(Aggregate, Examples) {
  auto m = evaluate_pair("a b", "a b", 0.9);
  EXPECT_EQ(aggregate(std::vector<MetricReport>{m}), m);

  MetricReport lo, hi;
  lo.bleu = 0;
  hi.bleu = 100;
  lo.cos = 0.9;
  hi.cos = 0.95;
  hi.exact_match = 100;
  const auto out = aggregate(std::vector<MetricReport>{lo, hi});
  EXPECT_DOUBLE_EQ(out.bleu, 50.0);
  EXPECT_NEAR(out.cos, 0.925, 1e-12);
  EXPECT_DOUBLE_EQ(out.exact_match, 50.0);
  EXPECT_EQ(out.pairs, 2u);
  EXPECT_THROW(aggregate(std::vector<MetricReport>{}), ConfigError);
}

TEST(Aggregate, ExactMatchWeightsUnderlyingPairs) {
  MetricReport a, b;
  a.exact_match = 100.0;
  a.pairs = 3;
  b.exact_match = 0.0;
  b.pairs = 1;
  EXPECT_DOUBLE_EQ(aggregate(std::vector<MetricReport>{a, b}).exact_match, 75.0);
}

TEST(EvaluatePair, ExactImpliesPerfectScores) {
  const auto m = evaluate_pair("Das Haus, rot.", "Das Haus, rot.", 1.0);
  EXPECT_DOUBLE_EQ(m.exact_match, 100.0);
  EXPECT_DOUBLE_EQ(m.bleu, 100.0);
  EXPECT_DOUBLE_EQ(m.rouge1_recall, 1.0);
  EXPECT_DOUBLE_EQ(m.token_f1, 1.0);
  EXPECT_DOUBLE_EQ(m.num_tokens_ref, 5.0);
}

TEST(Properties, NaiveOracleAgreesOnRandomPairs) {
  std::mt19937_64 rng(2024);
  const Tokens vocab{"a", "b", "c", "d", "e"};
  for (int i = 0; i < 1000; ++i) {
    Tokens p, r;
    const auto lp = rng() % 9, lr = rng() % 9;
    for (std::size_t j = 0; j < lp; ++j) p.push_back(vocab[rng() % vocab.size()]);
    for (std::size_t j = 0; j < lr; ++j) r.push_back(vocab[rng() % vocab.size()]);
    const auto ps = join(p), rs = join(r);
    ASSERT_EQ(tokenize(ps), p);
    EXPECT_NEAR(bleu(ps, rs), naive_bleu(p, r), 1e-9) << ps << " | " << rs;
    const double ov = naive_overlap(p, r);
    const double rouge = r.empty() ? (p.empty() ? 1.0 : 0.0) : ov / r.size();
    EXPECT_NEAR(rouge1_recall(ps, rs), rouge, 1e-12);
    double f1;
    if (p.empty() && r.empty()) f1 = 1.0;
    else if (p.empty() || r.empty() || ov == 0) f1 = 0.0;
    else f1 = 2 * (ov / p.size()) * (ov / r.size()) / (ov / p.size() + ov / r.size());
    EXPECT_NEAR(token_f1(ps, rs), f1, 1e-12);
    EXPECT_DOUBLE_EQ(token_f1(ps, rs), token_f1(rs, ps));
    EXPECT_GE(bleu(ps, rs), 0.0);
    EXPECT_LE(bleu(ps, rs), 100.0);
    EXPECT_DOUBLE_EQ(bleu(ps, ps), 100.0);
  }
}

TEST(Properties, WhitespaceInvariance) {
  const std::string p = "the red house", r = "a red house";
  EXPECT_DOUBLE_EQ(bleu("  " + p + "\n", r), bleu(p, r));
  EXPECT_DOUBLE_EQ(bleu(p, "\t" + r + " "), bleu(p, r));
  EXPECT_DOUBLE_EQ(rouge1_recall(" " + p, r + "  "), rouge1_recall(p, r));
  EXPECT_DOUBLE_EQ(token_f1(p + " ", " " + r), token_f1(p, r));
}

TEST(Properties, AsymmetryWitnesses) {
  EXPECT_NE(bleu("a b", "a b c d"), bleu("a b c d", "a b"));
  EXPECT_NE(rouge1_recall("a", "a b"), rouge1_recall("a b", "a"));
}

}  // namespace
}  // namespace embinv::metrics
