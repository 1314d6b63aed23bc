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
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "embinv/error.hpp"

namespace embinv {

// A fixed-dimension real vector with an optional ISO-639-1 language tag.
// Components are always finite and the dimension is at least 2 so that
// masking has a slot 0 plus content.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<double> values,
                     std::optional<std::string> lang = std::nullopt)
      : values_(std::move(values)), lang_(std::move(lang)) {
    if (values_.size() < 2) {
      throw DimensionError("embedding dimension must be >= 2, got " +
                           std::to_string(values_.size()));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw ConfigError("embedding component is not finite");
    }
  }

  static Embedding zeros(std::size_t dim,
                         std::optional<std::string> lang = std::nullopt) {
    return Embedding(std::vector<double>(dim, 0.0), std::move(lang));
  }

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  const std::optional<std::string>& lang() const { return lang_; }
  void set_lang(std::optional<std::string> lang) { lang_ = std::move(lang); }

  // Mutable access is restricted to same-dimension edits; callers must keep
  // components finite.
  std::vector<double>& mutable_values() { return values_; }

  double norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
  }

  bool is_zero() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return v == 0.0; });
  }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
  std::optional<std::string> lang_;
};

// Cosine similarity in [-1, 1]. A zero vector on either side yields 0.
inline double cosine(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("cosine: dimension mismatch " + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    na += av[i] * av[i];
    nb += bv[i] * bv[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

inline Embedding normalized(Embedding e) {
  const double n = e.norm();
  if (n > 0.0) {
    for (double& v : e.mutable_values()) v /= n;
  }
  return e;
}

struct TextSample {
  std::string id;
  std::string text;
  std::string lang;

  friend bool operator==(const TextSample&, const TextSample&) = default;
};

namespace hashing {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

// Stable across processes and platforms, unlike std::hash.
inline std::uint64_t hash_string(std::string_view s, std::uint64_t salt) {
  return splitmix64(fnv1a(s) ^ splitmix64(salt));
}

}  // namespace hashing

namespace utf8 {

// Splits valid UTF-8 into one string per code point. Throws ParseError on
// malformed input.
inline std::vector<std::string_view> code_points(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (lead < 0x80) {
      len = 1;
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      len = 2;
      cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
      len = 3;
      cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
      len = 4;
      cp = lead & 0x07;
    } else {
      throw ParseError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > s.size()) throw ParseError("truncated UTF-8 sequence");
    for (std::size_t k = 1; k < len; ++k) {
      const auto c = static_cast<unsigned char>(s[i + k]);
      if ((c & 0xC0) != 0x80) throw ParseError("invalid UTF-8 continuation byte");
      cp = (cp << 6) | (c & 0x3F);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                          (len == 4 && cp < 0x10000);
    if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw ParseError("invalid UTF-8 code point");
    }
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace utf8

namespace detail {

// kSignTable[byte][b] = +1 if bit b of byte is set, else -1.
inline constexpr auto kSignTable = [] {
  std::array<std::array<std::int32_t, 8>, 256> t{};
  for (std::size_t v = 0; v < 256; ++v) {
    for (std::size_t b = 0; b < 8; ++b) t[v][b] = ((v >> b) & 1U) ? 1 : -1;
  }
  return t;
}();

}  // namespace detail

struct NGramConfig {
  int n = 4;              // maximum character n-gram order (orders 1..n)
  std::size_t dim = 256;  // output dimension
  std::uint64_t seed = 0;
  bool unit_norm = true;

  void validate() const {
    if (dim < 2) throw ConfigError("embedder dim must be >= 2");
    if (n < 1) throw ConfigError("embedder n-gram order must be >= 1");
  }

  friend bool operator==(const NGramConfig&, const NGramConfig&) = default;
};

// Hashed character n-gram embedding. Every gram of order 1..n over the text
// framed by STX/ETX markers contributes its count times a dense pseudo-random
// +/-1 sign vector derived from hash(seed, gram). The empty text has no grams
// and maps to the zero vector.
inline Embedding embed_ngram(std::string_view text, const NGramConfig& config) {
  config.validate();
  std::vector<double> values(config.dim, 0.0);
  if (text.empty()) return Embedding(std::move(values));

  static constexpr std::string_view kBegin = "\x02";
  static constexpr std::string_view kEnd = "\x03";
  std::vector<std::string_view> chars;
  chars.push_back(kBegin);
  for (auto cp : utf8::code_points(text)) chars.push_back(cp);
  chars.push_back(kEnd);

  // Integer sign sums are exact, so the result does not depend on gram order.
  std::vector<std::int32_t> sums(config.dim, 0);
  std::string gram;
  for (int order = 1; order <= config.n; ++order) {
    const auto len = static_cast<std::size_t>(order);
    if (len > chars.size()) break;
    for (std::size_t start = 0; start + len <= chars.size(); ++start) {
      gram.clear();
      for (std::size_t k = 0; k < len; ++k) gram += chars[start + k];
      // Order is mixed into the salt so that e.g. a 1-gram never aliases a
      // longer gram with the same bytes.
      std::uint64_t state = hashing::hash_string(
          gram, config.seed ^ (static_cast<std::uint64_t>(order) << 56));
      for (std::size_t base = 0; base < config.dim; base += 64) {
        state = hashing::splitmix64(state);
        const std::uint64_t bits = state;
        const std::size_t width = std::min<std::size_t>(64, config.dim - base);
        std::int32_t* out = sums.data() + base;
        if (width == 64) {
          for (std::size_t byte = 0; byte < 8; ++byte) {
            const auto& signs = detail::kSignTable[(bits >> (8 * byte)) & 0xFFU];
            for (std::size_t b = 0; b < 8; ++b) out[8 * byte + b] += signs[b];
          }
        } else {
          for (std::size_t b = 0; b < width; ++b) {
            out[b] += static_cast<std::int32_t>(((bits >> b) & 1U) << 1) - 1;
          }
        }
      }
    }
  }
  for (std::size_t j = 0; j < config.dim; ++j) values[j] = static_cast<double>(sums[j]);
  Embedding e(std::move(values));
  return config.unit_norm ? normalized(std::move(e)) : e;
}

// Black-box encoder reachable only through embed queries. Every embedded text
// costs exactly one query.
class BlackBoxEmbedder {
 public:
  virtual ~BlackBoxEmbedder() = default;

  virtual Embedding embed(std::string_view text) = 0;

  // One query per text. Remote implementations override this to use a single
  // round trip.
  virtual std::vector<Embedding> embed_batch(std::span<const std::string> texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
  }

  virtual std::size_t dimension() const = 0;
  virtual std::uint64_t queries_used() const = 0;
};

class NGramEmbedder final : public BlackBoxEmbedder {
 public:
  explicit NGramEmbedder(NGramConfig config) : config_(config) {
    config_.validate();
  }

  Embedding embed(std::string_view text) override {
    queries_.fetch_add(1, std::memory_order_relaxed);
    return embed_ngram(text, config_);
  }

  std::size_t dimension() const override { return config_.dim; }
  std::uint64_t queries_used() const override {
    return queries_.load(std::memory_order_relaxed);
  }
  const NGramConfig& config() const { return config_; }

 private:
  NGramConfig config_;
  std::atomic<std::uint64_t> queries_{0};
};

}  // namespace embinv
