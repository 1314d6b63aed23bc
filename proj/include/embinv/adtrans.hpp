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

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "embinv/core.hpp"
#include "embinv/error.hpp"
#include "embinv/inversion.hpp"
#include "embinv/metrics.hpp"

namespace embinv::adtrans {

class Translator {
 public:
  virtual ~Translator() = default;
  virtual bool supports(std::string_view src, std::string_view tgt) const = 0;
  virtual std::string translate(std::string_view text, std::string_view src,
                                std::string_view tgt) const = 0;
};

class IdentityTranslator final : public Translator {
 public:
  bool supports(std::string_view, std::string_view) const override { return true; }
  std::string translate(std::string_view text, std::string_view,
                        std::string_view) const override {
    return std::string(text);
  }
};

// Word-for-word translation over whitespace tokens. Unknown words pass through
// unchanged; src == tgt is always supported and returns the input.
class DictionaryTranslator final : public Translator {
 public:
  using WordMap = std::map<std::string, std::string>;

  void add_pair(std::string src, std::string tgt, WordMap words) {
    maps_[{std::move(src), std::move(tgt)}] = std::move(words);
  }

  // "src_word<TAB>tgt_word" per line.
  void load_pair(std::string src, std::string tgt, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dictionary " + path.string());
    WordMap words;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) +
                         ": expected src_word<TAB>tgt_word");
      }
      words[line.substr(0, tab)] = line.substr(tab + 1);
    }
    add_pair(std::move(src), std::move(tgt), std::move(words));
  }

  bool supports(std::string_view src, std::string_view tgt) const override {
    return src == tgt || maps_.contains({std::string(src), std::string(tgt)});
  }

  std::string translate(std::string_view text, std::string_view src,
                        std::string_view tgt) const override {
    if (src == tgt) return std::string(text);
    auto it = maps_.find({std::string(src), std::string(tgt)});
    if (it == maps_.end()) {
      throw ConfigError("no dictionary for " + std::string(src) + "->" + std::string(tgt));
    }
    auto tokens = split_tokens(text);
    for (auto& tok : tokens) {
      auto w = it->second.find(tok);
      if (w != it->second.end()) tok = w->second;
    }
    return join_tokens(tokens);
  }

  bool is_bijective(const std::string& a, const std::string& b) const {
    auto ab = maps_.find({a, b});
    auto ba = maps_.find({b, a});
    if (ab == maps_.end() || ba == maps_.end()) return false;
    if (ab->second.size() != ba->second.size()) return false;
    for (const auto& [x, y] : ab->second) {
      auto back = ba->second.find(y);
      if (back == ba->second.end() || back->second != x) return false;
    }
    return true;
  }

 private:
  std::map<std::pair<std::string, std::string>, WordMap> maps_;
};

struct AdTransResult {
  metrics::MetricReport pre;   // generated vs target text
  metrics::MetricReport post;  // translate(generated) vs target text
  std::optional<double> gain_pct;  // unset when pre BLEU is 0
  std::string translated;
};

// 100 * (post - pre) / pre, or nullopt when pre is 0.
inline std::optional<double> bleu_gain_pct(double pre_bleu, double post_bleu) {
  if (pre_bleu <= 0.0) return std::nullopt;
  return 100.0 * (post_bleu - pre_bleu) / pre_bleu;
}

inline AdTransResult adtrans_eval(std::string_view generated, std::string_view src,
                                  std::string_view target_text, std::string_view tgt,
                                  const Translator& translator, BlackBoxEmbedder& embedder) {
  if (!translator.supports(src, tgt)) {
    throw ConfigError("translator does not support " + std::string(src) + "->" +
                      std::string(tgt));
  }
  AdTransResult r;
  r.translated = translator.translate(generated, src, tgt);
  const std::string texts[] = {std::string(generated), r.translated, std::string(target_text)};
  const auto emb = embedder.embed_batch(texts);
  r.pre = metrics::evaluate_pair(generated, target_text, cosine(emb[0], emb[2]));
  r.post = metrics::evaluate_pair(r.translated, target_text, cosine(emb[1], emb[2]));
  r.gain_pct = bleu_gain_pct(r.pre.bleu, r.post.bleu);
  return r;
}

inline std::string round_trip(std::string_view text, std::string_view src,
                              std::string_view pivot, const Translator& translator) {
  if (!translator.supports(src, pivot) || !translator.supports(pivot, src)) {
    throw ConfigError("round_trip: unsupported pair " + std::string(src) + "<->" +
                      std::string(pivot));
  }
  return translator.translate(translator.translate(text, src, pivot), pivot, src);
}

}  // namespace embinv::adtrans
