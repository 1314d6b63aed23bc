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

#include <filesystem>
#include <fstream>

#include "embinv/adtrans.hpp"
#include "embinv/synthetic.hpp"

namespace embinv::adtrans {
namespace {

DictionaryTranslator en_fr() {
  DictionaryTranslator t;
  t.add_pair("en", "fr", {{"house", "maison"}, {"red", "rouge"}, {"the", "la"}});
  t.add_pair("fr", "en", {{"maison", "house"}, {"rouge", "red"}, {"la", "the"}});
  return t;
}

TEST(Gain, PublishedRoundedInputs) {
  const auto g = bleu_gain_pct(4.62, 12.4);
  ASSERT_TRUE(g.has_value());
  EXPECT_NEAR(*g, 168.4, 0.5);
  EXPECT_NEAR(*g, 100.0 * (12.4 - 4.62) / 4.62, 1e-12);
  EXPECT_FALSE(bleu_gain_pct(0.0, 10.0).has_value());
  EXPECT_LT(*bleu_gain_pct(10.0, 5.0), 0.0);
}

TEST(DictionaryTranslator, WordForWordWithPassThrough) {
  const auto t = en_fr();
  EXPECT_EQ(t.translate("the red house", "en", "fr"), "la rouge maison");
  EXPECT_EQ(t.translate("the blue house", "en", "fr"), "la blue maison");
  EXPECT_EQ(t.translate("anything", "fr", "fr"), "anything");
  EXPECT_TRUE(t.supports("en", "en"));
  EXPECT_FALSE(t.supports("en", "de"));
  EXPECT_THROW(t.translate("x", "en", "de"), ConfigError);
  EXPECT_TRUE(t.is_bijective("en", "fr"));
}

TEST(DictionaryTranslator, LoadsTsvAndRejectsMalformed) {
  const auto dir = std::filesystem::temp_directory_path() / "embinv_adtrans_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.tsv") << "cat\tchat\ndog\tchien\r\n\n";
    std::ofstream(dir / "bad.tsv") << "cat chat\n";
  }
  DictionaryTranslator t;
  t.load_pair("en", "fr", dir / "ok.tsv");
  EXPECT_EQ(t.translate("dog cat", "en", "fr"), "chien chat");
  EXPECT_THROW(t.load_pair("en", "de", dir / "bad.tsv"), ParseError);
  EXPECT_THROW(t.load_pair("en", "de", dir / "missing.tsv"), ParseError);
  std::filesystem::remove_all(dir);
}

TEST(AdTransEval, BijectiveTranslationRecoversTarget) {
  const auto t = en_fr();
  NGramEmbedder emb(NGramConfig{});
  const auto r = adtrans_eval("the red house", "en", "la rouge maison", "fr", t, emb);
  EXPECT_EQ(r.translated, "la rouge maison");
  EXPECT_DOUBLE_EQ(r.post.bleu, 100.0);
  EXPECT_NEAR(r.post.cos, 1.0, 1e-12);
  EXPECT_LT(r.pre.bleu, r.post.bleu);
  EXPECT_EQ(emb.queries_used(), 3u);
}

TEST(AdTransEval, IdentityTranslatorHasZeroGain) {
  IdentityTranslator id;
  NGramEmbedder emb(NGramConfig{});
  const auto r = adtrans_eval("a b c d", "en", "a b c e", "en", id, emb);
  EXPECT_EQ(r.pre, r.post);
  ASSERT_TRUE(r.gain_pct.has_value());
  EXPECT_DOUBLE_EQ(*r.gain_pct, 0.0);
}

TEST(AdTransEval, UnsupportedPairErrors) {
  const auto t = en_fr();
  NGramEmbedder emb(NGramConfig{});
  EXPECT_THROW(adtrans_eval("x", "en", "y", "de", t, emb), ConfigError);
}

TEST(AdTransEval, InputsUnchangedAndGainSign) {
  const auto suite = synthetic::generate(synthetic::SyntheticSpec{});
  const auto t = suite.translator();
  NGramEmbedder emb(NGramConfig{});
  const auto& en = suite.corpora.at("en").samples;
  const auto& de = suite.corpora.at("de").samples;
  for (std::size_t i = 0; i < 20; ++i) {
    const std::string gen = en[i].text;
    const auto r = adtrans_eval(gen, "en", de[i].text, "de", t, emb);
    EXPECT_EQ(gen, en[i].text);
    EXPECT_DOUBLE_EQ(r.post.bleu, 100.0);
    if (r.gain_pct) EXPECT_GE(*r.gain_pct, 0.0);
  }
}

TEST(RoundTrip, BijectiveDictionaryIsIdentity) {
  const auto suite = synthetic::generate(synthetic::SyntheticSpec{});
  const auto t = suite.translator();
  for (const auto& s : suite.corpora.at("es").samples) {
    EXPECT_EQ(round_trip(s.text, "es", "fr", t), s.text);
  }
  EXPECT_TRUE(t.is_bijective("es", "fr"));
  EXPECT_THROW(round_trip("x", "en", "xx", t), ConfigError);
}

}  // namespace
}  // namespace embinv::adtrans
