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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "embinv/adtrans.hpp"
#include "embinv/core.hpp"
#include "embinv/corpus.hpp"
#include "embinv/defenses.hpp"
#include "embinv/error.hpp"
#include "embinv/retrieval.hpp"
#include "embinv/synthetic.hpp"

namespace embinv {

struct AttackSweep {
  std::vector<int> steps{0, 1, 20, 50};
  std::vector<std::size_t> beams{1, 4, 8};
  std::size_t max_tokens = 32;
  std::optional<std::uint64_t> query_budget;
};

struct DefenseSweep {
  std::vector<double> lambdas{0.0, 1e-3, 1e-2, 1e-1, 1.0};
  bool masking = true;
  bool language_agnostic = true;
  double mask_id_scale = 1.0;
  std::optional<double> retrieval_mask_id_scale;  // defaults to mask_id_scale
  int attack_steps = 10;
  std::size_t beam = 8;
};

struct CrosslingualSweep {
  int steps = 50;
  std::size_t beam = 8;
  std::vector<std::pair<std::string, std::string>> pairs;  // (src, tgt)
};

struct TaskFiles {
  std::string name;
  std::filesystem::path queries, docs, qrels;
};

struct RemoteEndpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

struct ExperimentConfig {
  std::map<std::string, std::filesystem::path> corpora;
  NGramConfig embedder;
  AttackSweep attack;
  std::size_t test_size = 100;
  DefenseConfig defense;  // applied to released reconstruction targets
  DefenseSweep defense_sweep;
  CrosslingualSweep crosslingual;
  std::vector<TaskFiles> retrieval_tasks;
  std::map<std::string, std::filesystem::path> dictionaries;  // "src-tgt" -> TSV
  std::optional<synthetic::SyntheticSpec> synthetic;  // in-memory data instead of files
  bool multi = true;  // also run the pooled-vocabulary condition
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::optional<RemoteEndpoint> remote;

  void validate() const {
    embedder.validate();
    defense.validate();
    for (double l : defense_sweep.lambdas) {
      if (!(l >= 0.0)) throw ConfigError("defense_sweep lambdas must be >= 0");
    }
    if (attack.steps.empty() || attack.beams.empty()) {
      throw ConfigError("attack steps and beams must be non-empty");
    }
    for (int s : attack.steps) {
      if (s < 0) throw ConfigError("attack steps must be >= 0");
    }
    for (auto b : attack.beams) {
      if (b < 1) throw ConfigError("attack beams must be >= 1");
    }
    if (attack.max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    if (test_size < 1) throw ConfigError("test_size must be >= 1");
    if (corpora.empty() && !synthetic) throw ConfigError("no corpora configured");
  }
};

namespace detail {

inline std::string path_string(const std::filesystem::path& p) { return p.generic_string(); }

}  // namespace detail

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  using nlohmann::json;
  json corpora = json::object();
  for (const auto& [l, p] : c.corpora) corpora[l] = detail::path_string(p);
  json dicts = json::object();
  for (const auto& [k, p] : c.dictionaries) dicts[k] = detail::path_string(p);
  json tasks = json::array();
  for (const auto& t : c.retrieval_tasks) {
    tasks.push_back({{"name", t.name},
                     {"queries", detail::path_string(t.queries)},
                     {"docs", detail::path_string(t.docs)},
                     {"qrels", detail::path_string(t.qrels)}});
  }
  json pairs = json::array();
  for (const auto& [s, t] : c.crosslingual.pairs) pairs.push_back({s, t});
  j = json{
      {"corpora", corpora},
      {"embedder",
       {{"n", c.embedder.n},
        {"dim", c.embedder.dim},
        {"seed", c.embedder.seed},
        {"unit_norm", c.embedder.unit_norm}}},
      {"attack",
       {{"steps", c.attack.steps},
        {"beams", c.attack.beams},
        {"max_tokens", c.attack.max_tokens},
        {"query_budget", c.attack.query_budget ? json(*c.attack.query_budget) : json(nullptr)}}},
      {"test_size", c.test_size},
      {"defense", c.defense},
      {"defense_sweep",
       {{"lambdas", c.defense_sweep.lambdas},
        {"masking", c.defense_sweep.masking},
        {"language_agnostic", c.defense_sweep.language_agnostic},
        {"mask_id_scale", c.defense_sweep.mask_id_scale},
        {"retrieval_mask_id_scale", c.defense_sweep.retrieval_mask_id_scale
                                        ? json(*c.defense_sweep.retrieval_mask_id_scale)
                                        : json(nullptr)},
        {"attack_steps", c.defense_sweep.attack_steps},
        {"beam", c.defense_sweep.beam}}},
      {"crosslingual",
       {{"steps", c.crosslingual.steps}, {"beam", c.crosslingual.beam}, {"pairs", pairs}}},
      {"retrieval_tasks", tasks},
      {"dictionaries", dicts},
      {"multi", c.multi},
      {"seed", c.seed},
      {"output_dir", detail::path_string(c.output_dir)},
  };
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    j["synthetic"] = {{"langs", s.langs},         {"vocab_size", s.vocab_size},
                      {"sentence_tokens", s.sentence_tokens},
                      {"samples", s.samples},     {"retrieval_roots", s.retrieval_roots},
                      {"docs", s.docs},           {"doc_tokens", s.doc_tokens},
                      {"query_tokens", s.query_tokens}, {"seed", s.seed}};
  } else {
    j["synthetic"] = nullptr;
  }
  if (c.remote) {
    j["remote"] = {{"host", c.remote->host}, {"port", c.remote->port}};
  } else {
    j["remote"] = nullptr;
  }
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  if (j.contains("corpora")) {
    for (const auto& [l, p] : j.at("corpora").items()) c.corpora[l] = p.get<std::string>();
  }
  if (j.contains("embedder")) {
    const auto& e = j.at("embedder");
    c.embedder.n = e.value("n", c.embedder.n);
    c.embedder.dim = e.value("dim", c.embedder.dim);
    c.embedder.seed = e.value("seed", c.embedder.seed);
    c.embedder.unit_norm = e.value("unit_norm", c.embedder.unit_norm);
  }
  if (j.contains("attack")) {
    const auto& a = j.at("attack");
    c.attack.steps = a.value("steps", c.attack.steps);
    c.attack.beams = a.value("beams", c.attack.beams);
    c.attack.max_tokens = a.value("max_tokens", c.attack.max_tokens);
    if (a.contains("query_budget") && !a["query_budget"].is_null()) {
      c.attack.query_budget = a["query_budget"].get<std::uint64_t>();
    }
  }
  c.test_size = j.value("test_size", c.test_size);
  if (j.contains("defense") && !j["defense"].is_null()) c.defense = j["defense"].get<DefenseConfig>();
  if (j.contains("defense_sweep")) {
    const auto& d = j.at("defense_sweep");
    auto& s = c.defense_sweep;
    s.lambdas = d.value("lambdas", s.lambdas);
    s.masking = d.value("masking", s.masking);
    s.language_agnostic = d.value("language_agnostic", s.language_agnostic);
    s.mask_id_scale = d.value("mask_id_scale", s.mask_id_scale);
    if (d.contains("retrieval_mask_id_scale") && !d["retrieval_mask_id_scale"].is_null()) {
      s.retrieval_mask_id_scale = d["retrieval_mask_id_scale"].get<double>();
    }
    s.attack_steps = d.value("attack_steps", s.attack_steps);
    s.beam = d.value("beam", s.beam);
  }
  if (j.contains("crosslingual")) {
    const auto& x = j.at("crosslingual");
    c.crosslingual.steps = x.value("steps", c.crosslingual.steps);
    c.crosslingual.beam = x.value("beam", c.crosslingual.beam);
    if (x.contains("pairs")) {
      for (const auto& p : x["pairs"]) {
        c.crosslingual.pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      }
    }
  }
  if (j.contains("retrieval_tasks")) {
    for (const auto& t : j["retrieval_tasks"]) {
      c.retrieval_tasks.push_back({t.at("name").get<std::string>(),
                                   t.at("queries").get<std::string>(),
                                   t.at("docs").get<std::string>(),
                                   t.at("qrels").get<std::string>()});
    }
  }
  if (j.contains("dictionaries")) {
    for (const auto& [k, p] : j["dictionaries"].items()) c.dictionaries[k] = p.get<std::string>();
  }
  if (j.contains("synthetic") && !j["synthetic"].is_null()) {
    const auto& s = j["synthetic"];
    synthetic::SyntheticSpec spec;
    spec.langs = s.value("langs", spec.langs);
    spec.vocab_size = s.value("vocab_size", spec.vocab_size);
    spec.sentence_tokens = s.value("sentence_tokens", spec.sentence_tokens);
    spec.samples = s.value("samples", spec.samples);
    spec.retrieval_roots = s.value("retrieval_roots", spec.retrieval_roots);
    spec.docs = s.value("docs", spec.docs);
    spec.doc_tokens = s.value("doc_tokens", spec.doc_tokens);
    spec.query_tokens = s.value("query_tokens", spec.query_tokens);
    spec.seed = s.value("seed", spec.seed);
    c.synthetic = spec;
  }
  c.multi = j.value("multi", c.multi);
  c.seed = j.value("seed", c.seed);
  c.output_dir = j.value("output_dir", std::string("out"));
  if (j.contains("remote") && !j["remote"].is_null()) {
    c.remote = RemoteEndpoint{j["remote"].value("host", std::string("127.0.0.1")),
                              j["remote"].value("port", std::uint16_t{0})};
  }
  c.validate();
}

// Reads a JSON config; relative paths are taken relative to the file.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  ExperimentConfig c;
  try {
    c = j.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  auto fix = [&base](std::filesystem::path& p) {
    if (p.is_relative()) p = base / p;
  };
  for (auto& [l, p] : c.corpora) fix(p);
  for (auto& [k, p] : c.dictionaries) fix(p);
  for (auto& t : c.retrieval_tasks) {
    fix(t.queries);
    fix(t.docs);
    fix(t.qrels);
  }
  fix(c.output_dir);
  return c;
}

// Corpora, dictionaries and retrieval tasks resolved from a config.
struct ExperimentInputs {
  std::map<std::string, Corpus> corpora;
  adtrans::DictionaryTranslator translator;
  std::vector<retrieval::RetrievalTask> tasks;
};

inline ExperimentInputs load_inputs(const ExperimentConfig& config) {
  ExperimentInputs in;
  if (config.synthetic) {
    auto suite = synthetic::generate(*config.synthetic);
    in.corpora = std::move(suite.corpora);
    in.translator = suite.translator();
    in.tasks = std::move(suite.tasks);
  }
  for (const auto& [lang, path] : config.corpora) {
    Corpus c = load_jsonl_corpus(path);
    for (const auto& s : c.samples) {
      if (s.lang != lang) {
        throw ConfigError(path.string() + ": sample " + s.id + " has lang '" + s.lang +
                          "', expected '" + lang + "'");
      }
    }
    in.corpora[lang] = std::move(c);
  }
  for (const auto& [key, path] : config.dictionaries) {
    const auto dash = key.find('-');
    if (dash == std::string::npos) throw ConfigError("dictionary key must be 'src-tgt': " + key);
    in.translator.load_pair(key.substr(0, dash), key.substr(dash + 1), path);
  }
  for (const auto& t : config.retrieval_tasks) {
    in.tasks.push_back(retrieval::load_task(t.name, t.queries, t.docs, t.qrels));
  }
  return in;
}

}  // namespace embinv
