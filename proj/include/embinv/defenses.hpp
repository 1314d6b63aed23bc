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

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "embinv/core.hpp"
#include "embinv/error.hpp"

namespace embinv {

using LanguageIds = std::map<std::string, double>;

struct MaskingConfig {
  LanguageIds language_ids;

  friend bool operator==(const MaskingConfig&, const MaskingConfig&) = default;
};

// Declarative defense stack. Stages run in the fixed order
// language_agnostic -> noise -> mask -> renormalize, each skipped when off.
struct DefenseConfig {
  double noise_lambda = 0.0;
  std::uint64_t noise_seed = 0;
  std::optional<MaskingConfig> masking;
  bool language_agnostic = false;
  bool renormalize_after = false;

  bool enabled() const {
    return noise_lambda > 0.0 || masking.has_value() || language_agnostic ||
           renormalize_after;
  }

  void validate() const {
    if (!(noise_lambda >= 0.0)) throw ConfigError("noise_lambda must be >= 0");
    if (masking) {
      std::set<double> seen;
      for (const auto& [lang, id] : masking->language_ids) {
        if (!std::isfinite(id)) throw ConfigError("language id must be finite");
        if (!seen.insert(id).second) {
          throw ConfigError("language ids must be pairwise distinct");
        }
      }
    }
  }

  // Short human-readable label used in report rows.
  std::string label() const {
    if (!enabled()) return "none";
    std::string s;
    auto add = [&s](const std::string& part) {
      if (!s.empty()) s += "+";
      s += part;
    };
    if (language_agnostic) add("lang-agnostic");
    if (noise_lambda > 0.0) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "noise=%g", noise_lambda);
      add(buf);
    }
    if (masking) add("mask");
    if (renormalize_after) add("renorm");
    return s;
  }

  friend bool operator==(const DefenseConfig&, const DefenseConfig&) = default;
};

inline void to_json(nlohmann::json& j, const DefenseConfig& c) {
  j = nlohmann::json{{"noise_lambda", c.noise_lambda},
                     {"noise_seed", c.noise_seed},
                     {"language_agnostic", c.language_agnostic},
                     {"renormalize_after", c.renormalize_after}};
  if (c.masking) {
    j["masking"] = {{"language_ids", c.masking->language_ids}};
  } else {
    j["masking"] = nullptr;
  }
}

inline void from_json(const nlohmann::json& j, DefenseConfig& c) {
  c = DefenseConfig{};
  c.noise_lambda = j.value("noise_lambda", 0.0);
  c.noise_seed = j.value("noise_seed", std::uint64_t{0});
  c.language_agnostic = j.value("language_agnostic", false);
  c.renormalize_after = j.value("renormalize_after", false);
  if (j.contains("masking") && !j.at("masking").is_null()) {
    MaskingConfig m;
    m.language_ids = j.at("masking").at("language_ids").get<LanguageIds>();
    c.masking = std::move(m);
  }
  c.validate();
}

// Seeded standard-normal stream for one embedding, keyed by sample id so that
// draws do not depend on evaluation order.
inline std::mt19937_64 noise_stream(std::uint64_t noise_seed,
                                    std::string_view key) {
  return std::mt19937_64(hashing::hash_string(key, noise_seed));
}

// output_i = e_i + lambda * eps_i, eps_i ~ N(0, 1) drawn from `rng`.
inline Embedding noise_insert(const Embedding& e, double lambda,
                              std::mt19937_64& rng) {
  if (!(lambda >= 0.0)) throw ConfigError("noise lambda must be >= 0");
  if (lambda == 0.0) return e;
  Embedding out = e;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out.mutable_values()) v += lambda * normal(rng);
  return out;
}

// Languages sorted by code, assigned scale*1, scale*2, ...
inline LanguageIds assign_language_ids(const std::set<std::string>& langs,
                                       double scale = 1.0) {
  if (langs.empty()) throw ConfigError("assign_language_ids: empty language set");
  if (!(scale != 0.0) || !std::isfinite(scale)) {
    throw ConfigError("language id scale must be finite and non-zero");
  }
  LanguageIds ids;
  double k = 1.0;
  for (const auto& lang : langs) ids[lang] = scale * k++;
  return ids;
}

// Overwrites dimension 0 with the language identifier.
inline Embedding mask_language(const Embedding& e, double id) {
  if (e.dim() < 2) throw DimensionError("mask_language: dimension must be >= 2");
  Embedding out = e;
  out.mutable_values()[0] = id;
  return out;
}

using GroupMeans = std::map<std::string, std::vector<double>>;

// Component-wise mean per language tag. Every embedding must carry a tag.
inline GroupMeans group_means(std::span<const Embedding> batch) {
  GroupMeans sums;
  std::map<std::string, std::size_t> counts;
  std::optional<std::size_t> dim;
  for (const auto& e : batch) {
    if (!e.lang()) throw ConfigError("language_agnostic: embedding without language");
    if (dim && *dim != e.dim()) {
      throw DimensionError("language_agnostic: mixed dimensions in batch");
    }
    dim = e.dim();
    auto& acc = sums[*e.lang()];
    if (acc.empty()) acc.assign(e.dim(), 0.0);
    for (std::size_t i = 0; i < e.dim(); ++i) acc[i] += e[i];
    ++counts[*e.lang()];
  }
  for (auto& [lang, acc] : sums) {
    for (double& v : acc) v /= static_cast<double>(counts[lang]);
  }
  return sums;
}

inline Embedding subtract_mean(const Embedding& e, std::span<const double> mean) {
  if (mean.size() != e.dim()) {
    throw DimensionError("subtract_mean: dimension mismatch");
  }
  Embedding out = e;
  auto& v = out.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= mean[i];
  return out;
}

// Removes each language group's mean from its members. Output order matches
// input order.
inline std::vector<Embedding> language_agnostic(std::span<const Embedding> batch) {
  const GroupMeans means = group_means(batch);
  std::vector<Embedding> out;
  out.reserve(batch.size());
  for (const auto& e : batch) out.push_back(subtract_mean(e, means.at(*e.lang())));
  return out;
}

// Per-call inputs the stack cannot derive from a single embedding.
struct DefenseContext {
  GroupMeans group_means;
  // Key for the per-embedding noise stream (normally the sample id).
  std::string noise_key;
  // Overrides e.lang() when choosing the masking id (e.g. mask a
  // cross-lingual query with the document language).
  std::optional<std::string> mask_lang;
};

inline Embedding apply_defense_stack(const Embedding& e, const DefenseConfig& config,
                                     const DefenseContext& context) {
  Embedding out = e;
  if (config.language_agnostic) {
    if (!e.lang()) throw UnknownLanguageError("language_agnostic: embedding has no language");
    auto it = context.group_means.find(*e.lang());
    if (it == context.group_means.end()) {
      throw UnknownLanguageError("language_agnostic: no group mean for '" + *e.lang() + "'");
    }
    out = subtract_mean(out, it->second);
  }
  if (config.noise_lambda > 0.0) {
    auto rng = noise_stream(config.noise_seed, context.noise_key);
    out = noise_insert(out, config.noise_lambda, rng);
  }
  if (config.masking) {
    const auto lang = context.mask_lang ? context.mask_lang : e.lang();
    if (!lang) throw UnknownLanguageError("masking: embedding has no language");
    auto it = config.masking->language_ids.find(*lang);
    if (it == config.masking->language_ids.end()) {
      throw UnknownLanguageError("masking: no id for language '" + *lang + "'");
    }
    out = mask_language(out, it->second);
  }
  if (config.renormalize_after) out = normalized(std::move(out));
  return out;
}

}  // namespace embinv
