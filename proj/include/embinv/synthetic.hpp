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
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "embinv/adtrans.hpp"
#include "embinv/corpus.hpp"
#include "embinv/error.hpp"
#include "embinv/inversion.hpp"
#include "embinv/retrieval.hpp"

// Toy "cognate" languages: every language renders a shared set of roots with
// its own suffix, so character n-grams overlap across languages through the
// roots while the suffix gives each language a distinct mean direction.
namespace embinv::synthetic {

struct SyntheticSpec {
  std::vector<std::string> langs{"de", "en", "es", "fr"};
  std::size_t vocab_size = 20;       // roots used by reconstruction corpora
  std::size_t sentence_tokens = 4;   // tokens per reconstruction sample
  std::size_t samples = 100;         // reconstruction samples per language
  std::size_t retrieval_roots = 300;
  std::size_t docs = 100;            // documents per retrieval task
  std::size_t doc_tokens = 8;
  std::size_t query_tokens = 5;
  std::uint64_t seed = 0;

  void validate() const {
    if (langs.empty()) throw ConfigError("synthetic: no languages");
    if (vocab_size < 1 || sentence_tokens < 1 || retrieval_roots < vocab_size ||
        query_tokens > doc_tokens || query_tokens < 1) {
      throw ConfigError("synthetic: inconsistent sizes");
    }
  }
};

inline std::string suffix_for(const std::string& lang) {
  static const std::map<std::string, std::string> kSuffix{
      {"en", ""}, {"de", "en"}, {"fr", "e"}, {"es", "os"}};
  auto it = kSuffix.find(lang);
  return it == kSuffix.end() ? lang : it->second;
}

inline std::string word_for(const std::string& root, const std::string& lang) {
  return root + suffix_for(lang);
}

struct Suite {
  std::vector<std::string> roots;
  std::map<std::string, Corpus> corpora;  // parallel reconstruction corpora
  std::map<std::pair<std::string, std::string>, adtrans::DictionaryTranslator::WordMap>
      dictionaries;
  std::vector<retrieval::RetrievalTask> tasks;

  adtrans::DictionaryTranslator translator() const {
    adtrans::DictionaryTranslator t;
    for (const auto& [pair, words] : dictionaries) t.add_pair(pair.first, pair.second, words);
    return t;
  }
};

namespace detail {

inline std::vector<std::string> make_roots(std::size_t n, std::mt19937_64& rng) {
  static constexpr std::string_view kCons = "bdfgklmnprstvz";
  static constexpr std::string_view kVow = "aiou";
  std::set<std::string> seen;
  std::vector<std::string> roots;
  while (roots.size() < n) {
    std::string r;
    const int syllables = 2 + static_cast<int>(rng() % 2);
    for (int s = 0; s < syllables; ++s) {
      r += kCons[rng() % kCons.size()];
      r += kVow[rng() % kVow.size()];
    }
    if (seen.insert(r).second) roots.push_back(r);
  }
  return roots;
}

inline std::string render(const std::vector<std::size_t>& idx,
                          const std::vector<std::string>& roots, const std::string& lang) {
  std::vector<std::string> words;
  words.reserve(idx.size());
  for (auto i : idx) words.push_back(word_for(roots[i], lang));
  return join_tokens(words);
}

}  // namespace detail

inline Suite generate(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  Suite suite;
  suite.roots = detail::make_roots(spec.retrieval_roots, rng);

  std::vector<std::vector<std::size_t>> sentences(spec.samples);
  for (auto& s : sentences) {
    for (std::size_t t = 0; t < spec.sentence_tokens; ++t) s.push_back(rng() % spec.vocab_size);
  }
  for (const auto& lang : spec.langs) {
    Corpus& c = suite.corpora[lang];
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      char id[64];
      std::snprintf(id, sizeof(id), "%s-%04zu", lang.c_str(), i);
      c.samples.push_back({id, detail::render(sentences[i], suite.roots, lang), lang});
    }
  }

  for (const auto& a : spec.langs) {
    for (const auto& b : spec.langs) {
      if (a == b) continue;
      auto& words = suite.dictionaries[{a, b}];
      for (const auto& r : suite.roots) words[word_for(r, a)] = word_for(r, b);
    }
  }

  // Retrieval: each query keeps a subset of its source document's roots.
  std::vector<std::vector<std::size_t>> docs(spec.docs), queries(spec.docs);
  for (std::size_t d = 0; d < spec.docs; ++d) {
    for (std::size_t t = 0; t < spec.doc_tokens; ++t) docs[d].push_back(rng() % spec.retrieval_roots);
    std::vector<std::size_t> pos(spec.doc_tokens);
    for (std::size_t t = 0; t < pos.size(); ++t) pos[t] = t;
    for (std::size_t t = pos.size() - 1; t > 0; --t) std::swap(pos[t], pos[rng() % (t + 1)]);
    pos.resize(spec.query_tokens);
    std::sort(pos.begin(), pos.end());
    for (auto p : pos) queries[d].push_back(docs[d][p]);
  }
  auto make_task = [&](const std::string& qlang, const std::string& dlang) {
    retrieval::RetrievalTask task;
    task.name = qlang == dlang ? "mono-" + qlang : "cross-" + qlang + "-" + dlang;
    for (std::size_t d = 0; d < spec.docs; ++d) {
      char qid[64], did[64];
      std::snprintf(qid, sizeof(qid), "%s-q%03zu", task.name.c_str(), d);
      std::snprintf(did, sizeof(did), "%s-d%03zu", task.name.c_str(), d);
      task.docs.push_back({did, detail::render(docs[d], suite.roots, dlang), dlang});
      task.queries.push_back({qid, detail::render(queries[d], suite.roots, qlang), qlang});
      task.qrels[qid][did] = 1;
    }
    return task;
  };
  for (const auto& lang : spec.langs) suite.tasks.push_back(make_task(lang, lang));
  if (spec.langs.size() > 1) {
    for (std::size_t i = 0; i < spec.langs.size(); ++i) {
      suite.tasks.push_back(make_task(spec.langs[i], spec.langs[(i + 1) % spec.langs.size()]));
    }
  }
  return suite;
}

// Lays the suite out as corpora/<lang>.jsonl, dict/<a>-<b>.tsv and
// tasks/<name>/{queries.jsonl,docs.jsonl,qrels.tsv} under `dir`.
inline void write_suite(const Suite& suite, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "corpora");
  fs::create_directories(dir / "dict");
  for (const auto& [lang, corpus] : suite.corpora) {
    write_jsonl_corpus(corpus, dir / "corpora" / (lang + ".jsonl"));
  }
  for (const auto& [pair, words] : suite.dictionaries) {
    std::ofstream out(dir / "dict" / (pair.first + "-" + pair.second + ".tsv"));
    for (const auto& [a, b] : words) out << a << '\t' << b << '\n';
  }
  for (const auto& task : suite.tasks) {
    const auto tdir = dir / "tasks" / task.name;
    fs::create_directories(tdir);
    write_jsonl_corpus(Corpus{task.queries}, tdir / "queries.jsonl");
    write_jsonl_corpus(Corpus{task.docs}, tdir / "docs.jsonl");
    write_qrels(task.qrels, tdir / "qrels.tsv");
  }
}

}  // namespace embinv::synthetic
