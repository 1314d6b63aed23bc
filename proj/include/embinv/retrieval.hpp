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
#include <filesystem>
#include <iostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "embinv/core.hpp"
#include "embinv/corpus.hpp"
#include "embinv/defenses.hpp"
#include "embinv/error.hpp"
#include "embinv/metrics.hpp"

namespace embinv::retrieval {

struct RetrievalTask {
  std::string name;
  std::vector<TextSample> queries;
  std::vector<TextSample> docs;
  QrelsTable qrels;

  void validate() const {
    std::set<std::string> qids, dids;
    for (const auto& q : queries) {
      if (!qids.insert(q.id).second) throw ConfigError(name + ": duplicate query id " + q.id);
    }
    for (const auto& d : docs) {
      if (!dids.insert(d.id).second) throw ConfigError(name + ": duplicate doc id " + d.id);
    }
    for (const auto& [q, rels] : qrels) {
      if (!qids.contains(q)) throw ConfigError(name + ": qrel references unknown query " + q);
      for (const auto& [d, g] : rels) {
        if (!dids.contains(d)) throw ConfigError(name + ": qrel references unknown doc " + d);
        if (g < 1) throw ConfigError(name + ": qrel grade must be >= 1");
      }
    }
  }

  bool monolingual() const {
    std::set<std::string> langs;
    for (const auto& q : queries) langs.insert(q.lang);
    for (const auto& d : docs) langs.insert(d.lang);
    return langs.size() <= 1;
  }
};

inline RetrievalTask load_task(std::string name, const std::filesystem::path& queries,
                               const std::filesystem::path& docs,
                               const std::filesystem::path& qrels) {
  RetrievalTask task{std::move(name), load_jsonl_corpus(queries).samples,
                     load_jsonl_corpus(docs).samples, load_qrels(qrels)};
  task.validate();
  return task;
}

struct ScoredDoc {
  std::string id;
  double score = 0.0;
};

class Index {
 public:
  void add(std::string id, Embedding vec) {
    if (!vectors_.empty() && vec.dim() != vectors_.front().dim()) {
      throw DimensionError("index: dimension mismatch");
    }
    ids_.push_back(std::move(id));
    vectors_.push_back(std::move(vec));
  }

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return vectors_.empty() ? 0 : vectors_.front().dim(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<Embedding>& vectors() const { return vectors_; }

  friend bool operator==(const Index&, const Index&) = default;

 private:
  std::vector<std::string> ids_;
  std::vector<Embedding> vectors_;
};

// Raw embeddings of `samples`, tagged with each sample's language.
inline std::vector<Embedding> embed_samples(std::span<const TextSample> samples,
                                            BlackBoxEmbedder& embedder) {
  std::vector<std::string> texts;
  texts.reserve(samples.size());
  for (const auto& s : samples) texts.push_back(s.text);
  auto out = embedder.embed_batch(texts);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].set_lang(samples[i].lang);
  return out;
}

inline Index build_index(std::span<const TextSample> docs, BlackBoxEmbedder& embedder,
                         const DefenseConfig& defense, const GroupMeans& means = {}) {
  if (docs.empty()) throw ConfigError("build_index: no documents");
  defense.validate();
  const auto raw = embed_samples(docs, embedder);
  Index index;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    DefenseContext ctx{means, docs[i].id, std::nullopt};
    index.add(docs[i].id, apply_defense_stack(raw[i], defense, ctx));
  }
  return index;
}

// Exact top-k by cosine, ties by ascending id.
inline std::vector<ScoredDoc> search(const Index& index, const Embedding& query, std::size_t k) {
  if (k < 1) throw ConfigError("search: k must be >= 1");
  if (index.size() > 0 && query.dim() != index.dim()) {
    throw DimensionError("search: query dimension does not match index");
  }
  std::vector<ScoredDoc> all;
  all.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    all.push_back({index.ids()[i], cosine(query, index.vectors()[i])});
  }
  const auto keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    [](const ScoredDoc& a, const ScoredDoc& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.id < b.id;
                    });
  all.resize(keep);
  return all;
}

struct EvalOptions {
  std::size_t k = 10;
  // Mask queries with the document language id instead of their own.
  bool mask_with_doc_lang = false;
};

// Mean NDCG@k over the task's queries. Queries and documents go through the
// same defense stack; language group means are taken over the task's own
// queries and documents.
inline double evaluate_task(const RetrievalTask& task, BlackBoxEmbedder& embedder,
                            const DefenseConfig& defense, const EvalOptions& options = {}) {
  task.validate();
  if (task.queries.empty()) throw ConfigError(task.name + ": no queries");
  const auto raw_docs = embed_samples(task.docs, embedder);
  const auto raw_queries = embed_samples(task.queries, embedder);

  GroupMeans means;
  if (defense.language_agnostic) {
    std::vector<Embedding> all(raw_docs);
    all.insert(all.end(), raw_queries.begin(), raw_queries.end());
    means = group_means(all);
  }

  Index index;
  for (std::size_t i = 0; i < task.docs.size(); ++i) {
    index.add(task.docs[i].id,
              apply_defense_stack(raw_docs[i], defense, {means, task.docs[i].id, std::nullopt}));
  }
  const std::optional<std::string> doc_lang =
      options.mask_with_doc_lang && !task.docs.empty()
          ? std::optional<std::string>(task.docs.front().lang)
          : std::nullopt;

  double total = 0.0;
  for (std::size_t i = 0; i < task.queries.size(); ++i) {
    const auto& q = task.queries[i];
    auto it = task.qrels.find(q.id);
    if (it == task.qrels.end() || it->second.empty()) {
      std::cerr << "[retrieval] " << task.name << ": query " << q.id
                << " has no qrels, counted as NDCG 0\n";
      continue;
    }
    const auto qvec = apply_defense_stack(raw_queries[i], defense, {means, q.id, doc_lang});
    const auto hits = search(index, qvec, options.k);
    std::vector<std::string> ranking;
    ranking.reserve(hits.size());
    for (const auto& h : hits) ranking.push_back(h.id);
    total += metrics::ndcg_at_k(ranking, it->second, options.k);
  }
  return total / static_cast<double>(task.queries.size());
}

inline double mean_ndcg(std::span<const RetrievalTask> tasks, BlackBoxEmbedder& embedder,
                        const DefenseConfig& defense, const EvalOptions& options = {}) {
  if (tasks.empty()) throw ConfigError("mean_ndcg: no tasks");
  double total = 0.0;
  for (const auto& t : tasks) total += evaluate_task(t, embedder, defense, options);
  return total / static_cast<double>(tasks.size());
}

}  // namespace embinv::retrieval
