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

#include <cmath>
#include <random>
#include <vector>

#include "embinv/core.hpp"
#include "embinv/defenses.hpp"
#include "embinv/retrieval.hpp"

namespace embinv {
namespace {

Embedding tagged(std::vector<double> v, std::string lang) {
  return Embedding(std::move(v), std::move(lang));
}

TEST(NoiseInsert, ZeroLambdaIsIdentity) {
  std::mt19937_64 rng(3);
  const Embedding e({0.3, -1.5, 2.0}, "en");
  EXPECT_EQ(noise_insert(e, 0.0, rng), e);
}

TEST(NoiseInsert, NegativeLambdaRejected) {
  std::mt19937_64 rng(3);
  EXPECT_THROW(noise_insert(Embedding({1, 2}), -0.1, rng), ConfigError);
}

TEST(NoiseInsert, ZeroVectorYieldsTheSeededDraws) {
  const std::uint64_t seed = 1234;
  std::mt19937_64 rng(seed);
  const auto out = noise_insert(Embedding::zeros(6, "de"), 1.0, rng);
  // Regenerate the first six standard-normal draws from the same seed.
  std::mt19937_64 ref(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(out[i], normal(ref));
  EXPECT_EQ(out.lang(), std::optional<std::string>("de"));
}

TEST(NoiseInsert, UnitVarianceMonteCarlo) {
  const double lambda = 0.37;
  const Embedding e({0.5, -0.25, 1.0, 2.0});
  std::mt19937_64 rng(99);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  while (n < 10000) {
    const auto out = noise_insert(e, lambda, rng);
    for (std::size_t i = 0; i < e.dim() && n < 10000; ++i, ++n) {
      const double z = (out[i] - e[i]) / lambda;
      sum += z;
      sq += z * z;
    }
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
  EXPECT_NEAR(sd, 1.0, 0.05);
  EXPECT_NEAR(mean, 0.0, 0.05);
}

TEST(AssignLanguageIds, SortedIterator) {
  const auto ids = assign_language_ids({"fr", "en", "es", "de"});
  EXPECT_EQ(ids, (LanguageIds{{"de", 1.0}, {"en", 2.0}, {"es", 3.0}, {"fr", 4.0}}));
  EXPECT_EQ(assign_language_ids({"en"}), (LanguageIds{{"en", 1.0}}));
  EXPECT_EQ(assign_language_ids({"en", "de"}), assign_language_ids({"de", "en"}));
  EXPECT_THROW(assign_language_ids({}), ConfigError);
}

TEST(AssignLanguageIds, ScaleOverride) {
  const auto ids = assign_language_ids({"en", "de"}, 0.05);
  EXPECT_DOUBLE_EQ(ids.at("de"), 0.05);
  EXPECT_DOUBLE_EQ(ids.at("en"), 0.10);
}

TEST(MaskLanguage, SubstitutesDimensionZero) {
  const Embedding e({0.9, 0.2, 0.4}, "en");
  const auto m = mask_language(e, 2.0);
  EXPECT_EQ(m, Embedding({2.0, 0.2, 0.4}, "en"));
  EXPECT_EQ(mask_language(m, 2.0), m);
}

TEST(MaskLanguage, ChangesAtMostOneComponent) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(5);
    for (auto& x : v) x = normal(rng);
    const Embedding e(v);
    const double id = (t % 3 == 0) ? v[0] : normal(rng);
    const auto m = mask_language(e, id);
    int changed = 0;
    for (std::size_t i = 0; i < e.dim(); ++i) changed += m[i] != e[i];
    EXPECT_EQ(changed, id != v[0] ? 1 : 0);
    EXPECT_EQ(mask_language(m, id), m);
  }
}

TEST(LanguageAgnostic, Examples) {
  const std::vector<Embedding> single{tagged({0.5, 0.7}, "en")};
  EXPECT_TRUE(language_agnostic(single)[0].is_zero());

  const std::vector<Embedding> group{tagged({1, 0}, "en"), tagged({3, 2}, "en")};
  const auto out = language_agnostic(group);
  EXPECT_EQ(out[0], tagged({-1, -1}, "en"));
  EXPECT_EQ(out[1], tagged({1, 1}, "en"));
}

TEST(LanguageAgnostic, GroupMeansVanish) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal(0.3, 2.0);
  std::vector<Embedding> batch;
  const std::vector<std::string> langs{"de", "en", "fr"};
  for (int i = 0; i < 90; ++i) {
    std::vector<double> v(7);
    for (auto& x : v) x = normal(rng);
    batch.push_back(tagged(v, langs[rng() % 3]));
  }
  const auto out = language_agnostic(batch);
  ASSERT_EQ(out.size(), batch.size());
  for (const auto& [lang, mean] : group_means(out)) {
    double n2 = 0.0;
    for (double x : mean) n2 += x * x;
    EXPECT_LT(std::sqrt(n2), 1e-9) << lang;
  }
}

TEST(LanguageAgnostic, Errors) {
  const std::vector<Embedding> mixed{tagged({1, 0}, "en"), tagged({1, 0, 0}, "en")};
  EXPECT_THROW(language_agnostic(mixed), DimensionError);
  const std::vector<Embedding> untagged{Embedding({1, 0})};
  EXPECT_THROW(language_agnostic(untagged), ConfigError);
}

TEST(DefenseStack, DisabledIsIdentity) {
  const Embedding e({0.1, 0.2, 0.3}, "en");
  EXPECT_EQ(apply_defense_stack(e, DefenseConfig{}, {}), e);
}

TEST(DefenseStack, MaskingOnlyEqualsMaskLanguage) {
  DefenseConfig c;
  c.masking = MaskingConfig{{{"en", 2.0}}};
  const Embedding e({0.1, 0.2, 0.3}, "en");
  EXPECT_EQ(apply_defense_stack(e, c, {}), mask_language(e, 2.0));
}

TEST(DefenseStack, MaskingOverwritesNoisedDimensionZero) {
  DefenseConfig c;
  c.noise_lambda = 1e-3;
  c.noise_seed = 5;
  c.masking = MaskingConfig{{{"en", 2.0}}};
  const Embedding e({0.1, 0.2, 0.3}, "en");
  const auto out = apply_defense_stack(e, c, {{}, "sample-1", std::nullopt});
  EXPECT_EQ(out[0], 2.0);
  EXPECT_NE(out[1], e[1]);
}

TEST(DefenseStack, DeterministicAndKeyedBySample) {
  DefenseConfig c;
  c.noise_lambda = 0.5;
  c.noise_seed = 17;
  const Embedding e({0.1, 0.2, 0.3, 0.4}, "en");
  const auto a = apply_defense_stack(e, c, {{}, "s1", std::nullopt});
  EXPECT_EQ(a, apply_defense_stack(e, c, {{}, "s1", std::nullopt}));
  EXPECT_NE(a, apply_defense_stack(e, c, {{}, "s2", std::nullopt}));
}

TEST(DefenseStack, UnknownLanguageErrors) {
  DefenseConfig c;
  c.masking = MaskingConfig{{{"en", 1.0}}};
  EXPECT_THROW(apply_defense_stack(Embedding({1, 2}, "fr"), c, {}), UnknownLanguageError);
  EXPECT_THROW(apply_defense_stack(Embedding({1, 2}), c, {}), UnknownLanguageError);
  DefenseConfig la;
  la.language_agnostic = true;
  EXPECT_THROW(apply_defense_stack(Embedding({1, 2}, "fr"), la, {}), UnknownLanguageError);
}

TEST(DefenseStack, MaskLangOverrideAndRenormalize) {
  DefenseConfig c;
  c.masking = MaskingConfig{{{"en", 1.0}, {"de", 2.0}}};
  c.renormalize_after = true;
  const auto out = apply_defense_stack(Embedding({0.6, 0.8}, "en"), c, {{}, "", "de"});
  EXPECT_NEAR(out.norm(), 1.0, 1e-12);
  EXPECT_NEAR(out[0] / out[1], 2.0 / 0.8, 1e-12);
}

TEST(DefenseStack, LanguageAgnosticUsesContextMeans) {
  DefenseConfig c;
  c.language_agnostic = true;
  GroupMeans means{{"en", {1.0, 1.0}}};
  EXPECT_EQ(apply_defense_stack(Embedding({3, 2}, "en"), c, {means, "", std::nullopt}),
            Embedding({2, 1}, "en"));
}

TEST(DefenseConfig, ValidationAndJsonRoundTrip) {
  DefenseConfig bad;
  bad.noise_lambda = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
  DefenseConfig dup;
  dup.masking = MaskingConfig{{{"en", 1.0}, {"de", 1.0}}};
  EXPECT_THROW(dup.validate(), ConfigError);

  DefenseConfig c;
  c.noise_lambda = 0.01;
  c.noise_seed = 42;
  c.masking = MaskingConfig{{{"en", 0.05}, {"de", 0.1}}};
  c.language_agnostic = true;
  c.renormalize_after = true;
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<DefenseConfig>(), c);
  EXPECT_EQ(nlohmann::json(DefenseConfig{}).get<DefenseConfig>(), DefenseConfig{});
  EXPECT_EQ(DefenseConfig{}.label(), "none");
}

// With unit-normalized embeddings masked by a small shared id, the masked
// top-1 neighbour equals the unmasked one whenever the unmasked top-1/top-2
// margin exceeds 2|id| + id^2.
TEST(MaskingProperty, SmallIdPreservesTopOneUnderMargin) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  const double id = 0.05;
  auto unit = [&](std::size_t d) {
    std::vector<double> v(d);
    for (auto& x : v) x = normal(rng);
    return normalized(Embedding(v, "en"));
  };
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<Embedding> docs;
    for (int i = 0; i < 20; ++i) docs.push_back(unit(12));
    // Queries near a document so that large margins actually occur.
    const auto& anchor = docs[rng() % docs.size()];
    std::vector<double> qv(anchor.values().begin(), anchor.values().end());
    for (auto& x : qv) x += 0.15 * normal(rng);
    const auto q = normalized(Embedding(qv, "en"));

    retrieval::Index raw, masked;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      char name[16];
      std::snprintf(name, sizeof(name), "d%02zu", i);
      raw.add(name, docs[i]);
      masked.add(name, mask_language(docs[i], id));
    }
    const auto top = retrieval::search(raw, q, 2);
    if (top[0].score - top[1].score <= 2 * std::abs(id) + id * id) continue;
    ++checked;
    EXPECT_EQ(retrieval::search(masked, mask_language(q, id), 1)[0].id, top[0].id);
  }
  EXPECT_GT(checked, 50);
}

}  // namespace
}  // namespace embinv
