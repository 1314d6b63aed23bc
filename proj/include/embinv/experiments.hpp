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

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "embinv/adtrans.hpp"
#include "embinv/config.hpp"
#include "embinv/core.hpp"
#include "embinv/defenses.hpp"
#include "embinv/eaas.hpp"
#include "embinv/inversion.hpp"
#include "embinv/metrics.hpp"
#include "embinv/report.hpp"
#include "embinv/retrieval.hpp"

namespace embinv {

// Language group means over whole corpora, computed by the data owner with
// direct model access (no API queries are spent).
inline GroupMeans corpus_group_means(const std::map<std::string, Corpus>& corpora,
                                     const NGramConfig& embedder) {
  std::vector<Embedding> all;
  for (const auto& [lang, corpus] : corpora) {
    for (const auto& s : corpus.samples) {
      auto e = embed_ngram(s.text, embedder);
      e.set_lang(s.lang);
      all.push_back(std::move(e));
    }
  }
  return all.empty() ? GroupMeans{} : group_means(all);
}

// Where embeddings come from: the attacker's raw black-box access, and the
// released (defended) embeddings of sensitive samples.
class EmbeddingSource {
 public:
  virtual ~EmbeddingSource() = default;
  virtual BlackBoxEmbedder& attack_embedder() = 0;
  virtual std::vector<Embedding> release(std::span<const TextSample> samples,
                                         const DefenseConfig& defense) = 0;
  // Every query the embedder behind this source has answered.
  virtual std::uint64_t total_queries() = 0;
};

class LocalSource final : public EmbeddingSource {
 public:
  LocalSource(const NGramConfig& config, GroupMeans means)
      : embedder_(config), means_(std::move(means)) {}

  BlackBoxEmbedder& attack_embedder() override { return embedder_; }

  std::vector<Embedding> release(std::span<const TextSample> samples,
                                 const DefenseConfig& defense) override {
    auto raw = retrieval::embed_samples(samples, embedder_);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      raw[i] = apply_defense_stack(raw[i], defense, {means_, samples[i].id, std::nullopt});
    }
    return raw;
  }

  std::uint64_t total_queries() override { return embedder_.queries_used(); }

 private:
  NGramEmbedder embedder_;
  GroupMeans means_;
};

// Everything goes over the wire; the server applies release-time defenses.
class RemoteSource final : public EmbeddingSource {
 public:
  RemoteSource(const std::string& host, std::uint16_t port, std::size_t dim)
      : client_(host, port), embedder_(client_, dim) {}

  BlackBoxEmbedder& attack_embedder() override { return embedder_; }

  std::vector<Embedding> release(std::span<const TextSample> samples,
                                 const DefenseConfig& defense) override {
    std::vector<std::string> texts, ids, langs;
    for (const auto& s : samples) {
      texts.push_back(s.text);
      ids.push_back(s.id);
      langs.push_back(s.lang);
    }
    return std::move(client_.embed(texts, defense, ids, langs).embeddings);
  }

  // Server-side counter as of the most recent response.
  std::uint64_t total_queries() override { return client_.last_queries_used(); }

 private:
  eaas::Client client_;
  eaas::RemoteEmbedder embedder_;
};

inline std::unique_ptr<EmbeddingSource> make_source(const ExperimentConfig& config,
                                                    const ExperimentInputs& inputs) {
  if (config.remote) {
    return std::make_unique<RemoteSource>(config.remote->host, config.remote->port,
                                          config.embedder.dim);
  }
  return std::make_unique<LocalSource>(config.embedder,
                                       corpus_group_means(inputs.corpora, config.embedder));
}

// Sorted distinct whitespace tokens of a corpus.
inline std::vector<std::string> corpus_vocab(const Corpus& corpus) {
  std::set<std::string> vocab;
  for (const auto& s : corpus.samples) {
    for (auto& t : split_tokens(s.text)) vocab.insert(std::move(t));
  }
  return {vocab.begin(), vocab.end()};
}

inline std::vector<TextSample> test_split(const Corpus& corpus, std::size_t n) {
  const auto k = std::min(n, corpus.samples.size());
  return {corpus.samples.begin(), corpus.samples.begin() + static_cast<std::ptrdiff_t>(k)};
}

struct CellResult {
  std::vector<std::string> predictions;
  std::vector<metrics::MetricReport> per_sample;
  metrics::MetricReport aggregate;
  std::uint64_t queries = 0;
  double wall_ms = 0.0;
};

// Inverts every target with one (steps, beam) setting. The generator seed of
// each sample is derived from (seed, sample id).
inline CellResult run_attack_cell(std::span<const TextSample> samples,
                                  std::span<const Embedding> targets,
                                  const std::vector<std::string>& vocab, int steps,
                                  std::size_t beam, const AttackSweep& sweep, std::uint64_t seed,
                                  BlackBoxEmbedder& embedder) {
  CellResult cell;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    AttackConfig cfg;
    cfg.steps = steps;
    cfg.beam_width = beam;
    cfg.max_tokens = sweep.max_tokens;
    cfg.vocab = vocab;
    cfg.query_budget = sweep.query_budget;
    cfg.seed = hashing::hash_string(samples[i].id, seed);
    const auto result = invert(targets[i], embedder, cfg);
    cell.queries += result.queries_used;
    cell.per_sample.push_back(
        metrics::evaluate_pair(result.best.text, samples[i].text, result.best.score));
    cell.predictions.push_back(result.best.text);
  }
  cell.aggregate = metrics::aggregate(cell.per_sample);
  cell.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                     .count();
  return cell;
}

// Per language x steps x beam reconstruction, for the monolingual vocabulary
// and (when enabled and more than one language is present) the pooled one.
inline ExperimentReport run_reconstruction(const ExperimentConfig& config,
                                           const ExperimentInputs& inputs,
                                           EmbeddingSource& source,
                                           const std::vector<std::string>& languages) {
  for (const auto& lang : languages) {
    if (!inputs.corpora.contains(lang)) throw ConfigError("no corpus for language " + lang);
  }
  std::vector<std::string> pooled;
  {
    std::set<std::string> all;
    for (const auto& lang : languages) {
      for (auto& t : corpus_vocab(inputs.corpora.at(lang))) all.insert(std::move(t));
    }
    pooled.assign(all.begin(), all.end());
  }
  std::vector<std::pair<std::string, bool>> conditions{{"recon-mono", false}};
  if (config.multi && languages.size() > 1) conditions.emplace_back("recon-multi", true);

  ExperimentReport report;
  for (const auto& lang : languages) {
    const auto& corpus = inputs.corpora.at(lang);
    const auto samples = test_split(corpus, config.test_size);
    const auto targets = source.release(samples, config.defense);
    const auto mono = corpus_vocab(corpus);
    for (const auto& [exp_id, use_pooled] : conditions) {
      for (int steps : config.attack.steps) {
        for (auto beam : config.attack.beams) {
          auto cell = run_attack_cell(samples, targets, use_pooled ? pooled : mono, steps, beam,
                                      config.attack, config.seed, source.attack_embedder());
          report.rows.push_back({exp_id, lang, steps, static_cast<int>(beam),
                                 config.defense.label(), cell.aggregate, std::nullopt,
                                 cell.queries, cell.wall_ms, std::nullopt});
        }
      }
    }
  }
  return report;
}

// Attack with the source-language vocabulary against target-language
// embeddings; score before and after translating the reconstruction into the
// target language. Rows: xling-base (0 steps), xling-vec2text and
// xling-adtrans (with the BLEU gain over vec2text).
inline ExperimentReport run_crosslingual(const ExperimentConfig& config,
                                         const ExperimentInputs& inputs,
                                         EmbeddingSource& source, const std::string& src,
                                         const std::string& tgt) {
  if (!inputs.corpora.contains(src)) throw ConfigError("no corpus for source language " + src);
  if (!inputs.corpora.contains(tgt)) throw ConfigError("no corpus for target language " + tgt);
  if (!inputs.translator.supports(src, tgt)) {
    throw ConfigError("missing dictionary " + src + "-" + tgt);
  }
  const auto samples = test_split(inputs.corpora.at(tgt), config.test_size);
  const auto targets = source.release(samples, config.defense);
  const auto vocab = corpus_vocab(inputs.corpora.at(src));
  const std::string pair = src + "->" + tgt;
  const std::string defense = config.defense.label();

  ExperimentReport report;
  auto base = run_attack_cell(samples, targets, vocab, 0, 1, config.attack, config.seed,
                              source.attack_embedder());
  report.rows.push_back({"xling-base", pair, 0, 1, defense, base.aggregate, std::nullopt,
                         base.queries, base.wall_ms, std::nullopt});

  auto v2t = run_attack_cell(samples, targets, vocab, config.crosslingual.steps,
                             config.crosslingual.beam, config.attack, config.seed,
                             source.attack_embedder());
  report.rows.push_back({"xling-vec2text", pair, config.crosslingual.steps,
                         static_cast<int>(config.crosslingual.beam), defense, v2t.aggregate,
                         std::nullopt, v2t.queries, v2t.wall_ms, std::nullopt});

  // Scoring uses the evaluator's own model copy, not the attacked API.
  NGramEmbedder evaluator(config.embedder);
  std::vector<metrics::MetricReport> post;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto r = adtrans::adtrans_eval(v2t.predictions[i], src, samples[i].text, tgt,
                                   inputs.translator, evaluator);
    post.push_back(r.post);
  }
  const auto post_agg = metrics::aggregate(post);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  auto gain = adtrans::bleu_gain_pct(v2t.aggregate.bleu, post_agg.bleu);
  report.rows.push_back({"xling-adtrans", pair, config.crosslingual.steps,
                         static_cast<int>(config.crosslingual.beam), defense, post_agg,
                         std::nullopt, v2t.queries, v2t.wall_ms + ms,
                         gain ? gain : std::optional<double>(0.0)});
  return report;
}

struct DefenseCell {
  std::string label;
  std::string kind;  // baseline | noise | mask | lang-agnostic
  double level = 0.0;
  DefenseConfig attack_defense;
  DefenseConfig retrieval_defense;
};

inline std::vector<DefenseCell> defense_cells(const ExperimentConfig& config,
                                              const std::set<std::string>& langs) {
  const auto& sweep = config.defense_sweep;
  std::vector<DefenseCell> cells;
  cells.push_back({"baseline", "baseline", 0.0, {}, {}});
  for (double lambda : sweep.lambdas) {
    DefenseConfig d;
    d.noise_lambda = lambda;
    d.noise_seed = config.seed;
    char label[64];
    std::snprintf(label, sizeof(label), "noise:%g", lambda);
    cells.push_back({label, "noise", lambda, d, d});
  }
  if (sweep.masking && !langs.empty()) {
    DefenseConfig attack, retr;
    attack.masking = MaskingConfig{assign_language_ids(langs, sweep.mask_id_scale)};
    retr.masking = MaskingConfig{assign_language_ids(
        langs, sweep.retrieval_mask_id_scale.value_or(sweep.mask_id_scale))};
    cells.push_back({"mask", "mask", sweep.mask_id_scale, attack, retr});
  }
  if (sweep.language_agnostic) {
    DefenseConfig d;
    d.language_agnostic = true;
    cells.push_back({"lang-agnostic", "lang-agnostic", 1.0, d, d});
  }
  return cells;
}

struct DefenseSweepResult {
  ExperimentReport report;
  std::string plot_csv;  // defense,kind,level,ndcg,bleu
};

// For every defense cell: mean NDCG@10 over the retrieval tasks and pooled
// reconstruction metrics with the attack fixed at `attack_steps` steps.
inline DefenseSweepResult run_defense_sweep(const ExperimentConfig& config,
                                            const ExperimentInputs& inputs,
                                            EmbeddingSource& source) {
  std::set<std::string> langs;
  for (const auto& [l, c] : inputs.corpora) langs.insert(l);
  for (const auto& t : inputs.tasks) {
    for (const auto& q : t.queries) langs.insert(q.lang);
    for (const auto& d : t.docs) langs.insert(d.lang);
  }
  const auto& sweep = config.defense_sweep;
  NGramEmbedder owner(config.embedder);  // retrieval runs on the data owner's side

  DefenseSweepResult out;
  std::string plot = "defense,kind,level,ndcg,bleu\n";
  for (const auto& cell : defense_cells(config, langs)) {
    std::vector<metrics::MetricReport> per_sample;
    std::uint64_t queries = 0;
    double wall = 0.0;
    for (const auto& [lang, corpus] : inputs.corpora) {
      const auto samples = test_split(corpus, config.test_size);
      const auto targets = source.release(samples, cell.attack_defense);
      auto res = run_attack_cell(samples, targets, corpus_vocab(corpus), sweep.attack_steps,
                                 sweep.beam, config.attack, config.seed,
                                 source.attack_embedder());
      per_sample.insert(per_sample.end(), res.per_sample.begin(), res.per_sample.end());
      queries += res.queries;
      wall += res.wall_ms;
    }
    std::optional<double> ndcg;
    if (!inputs.tasks.empty()) {
      ndcg = retrieval::mean_ndcg(inputs.tasks, owner, cell.retrieval_defense);
    }
    const auto agg = metrics::aggregate(per_sample);
    out.report.rows.push_back({"defense-sweep", "all", sweep.attack_steps,
                               static_cast<int>(sweep.beam), cell.label, agg, ndcg, queries, wall,
                               std::nullopt});
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%s,%g,%s,%.6f\n", cell.label.c_str(), cell.kind.c_str(),
                  cell.level, ndcg ? detail::fmt6(*ndcg).c_str() : "", agg.bleu);
    plot += line;
  }
  out.plot_csv = std::move(plot);
  return out;
}

}  // namespace embinv
