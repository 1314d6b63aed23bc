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

// Command-line front end: embed, attack, defend-sweep, crosslingual,
// retrieve, serve, report, synth.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "embinv/embinv.hpp"

namespace fs = std::filesystem;
using namespace embinv;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string remote;  // host:port
};

ExperimentConfig resolve_config(const GlobalOptions& g) {
  ExperimentConfig config;
  if (!g.config_path.empty()) {
    config = load_config(g.config_path);
  } else {
    config.synthetic = synthetic::SyntheticSpec{};
    config.attack.max_tokens = 4;
  }
  if (g.seed) config.seed = *g.seed;
  if (!g.out_dir.empty()) config.output_dir = g.out_dir;
  if (!g.remote.empty()) {
    const auto colon = g.remote.rfind(':');
    if (colon == std::string::npos) throw ConfigError("--remote expects host:port");
    config.remote = RemoteEndpoint{g.remote.substr(0, colon),
                                   static_cast<std::uint16_t>(std::stoul(g.remote.substr(colon + 1)))};
  }
  return config;
}

void write_outputs(const ExperimentReport& report, const ExperimentConfig& config,
                   const std::string& stem) {
  const auto csv = emit_report(report, ReportFormat::csv, config.output_dir / (stem + ".csv"));
  const auto md = emit_report(report, ReportFormat::markdown, config.output_dir / (stem + ".md"));
  std::cout << to_markdown(report);
  std::cerr << "wrote " << csv.string() << " and " << md.string() << "\n";
}

std::vector<std::string> config_languages(const ExperimentInputs& inputs) {
  std::vector<std::string> langs;
  for (const auto& [l, c] : inputs.corpora) langs.push_back(l);
  return langs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedding inversion laboratory"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Experiment config (JSON)");
  app.add_option("--seed", g.seed, "Experiment seed (overrides config)");
  app.add_option("--out", g.out_dir, "Output directory (overrides config)");
  app.add_option("--remote", g.remote, "Use an EaaS server at host:port as the black box");

  auto* embed = app.add_subcommand("embed", "Embed texts, one JSON line per text");
  std::vector<std::string> texts;
  std::string corpus_path, lang_tag;
  embed->add_option("--text", texts, "Text to embed (repeatable)");
  embed->add_option("--corpus", corpus_path, "JSONL corpus to embed");
  embed->add_option("--lang", lang_tag, "Language tag for --text inputs");

  auto* attack = app.add_subcommand("attack", "Reconstruction sweep (languages x steps x beams)");
  std::vector<std::string> attack_langs;
  attack->add_option("--lang", attack_langs, "Languages to attack (default: all corpora)");

  auto* sweep = app.add_subcommand("defend-sweep", "Noise / masking / language-agnostic sweep");

  auto* xling = app.add_subcommand("crosslingual", "Cross-lingual attack with AdTrans scoring");
  std::string src, tgt;
  xling->add_option("--src", src, "Attack (source) language");
  xling->add_option("--tgt", tgt, "Target language");

  auto* retrieve = app.add_subcommand("retrieve", "Mean NDCG@10 of the configured tasks");

  auto* serve = app.add_subcommand("serve", "Run the EaaS server");
  std::uint16_t port = 7070;
  std::string bind = "127.0.0.1";
  serve->add_option("--port", port, "TCP port (0 = ephemeral)");
  serve->add_option("--bind", bind, "Bind address");

  auto* report = app.add_subcommand("report", "Render a report CSV");
  std::string in_csv, format = "markdown";
  report->add_option("--in", in_csv, "Report CSV")->required();
  report->add_option("--format", format, "markdown|csv")->check(CLI::IsMember({"markdown", "csv"}));

  auto* synth = app.add_subcommand("synth", "Write the synthetic suite and a config to --out");
  synthetic::SyntheticSpec spec;
  synth->add_option("--samples", spec.samples, "Reconstruction samples per language");
  synth->add_option("--vocab", spec.vocab_size, "Reconstruction vocabulary size");
  synth->add_option("--docs", spec.docs, "Documents per retrieval task");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*embed) {
      ExperimentConfig config = resolve_config(g);
      std::vector<TextSample> samples;
      if (!corpus_path.empty()) samples = load_jsonl_corpus(corpus_path).samples;
      for (std::size_t i = 0; i < texts.size(); ++i) {
        samples.push_back({"text-" + std::to_string(i), texts[i], lang_tag});
      }
      std::vector<Embedding> out;
      std::uint64_t used = 0;
      if (config.remote) {
        eaas::Client client(config.remote->host, config.remote->port);
        std::vector<std::string> t;
        for (const auto& s : samples) t.push_back(s.text);
        if (!t.empty()) {
          auto resp = client.embed(t);
          out = std::move(resp.embeddings);
          used = resp.queries_used;
        }
      } else {
        NGramEmbedder embedder(config.embedder);
        for (const auto& s : samples) out.push_back(embedder.embed(s.text));
        used = embedder.queries_used();
      }
      for (std::size_t i = 0; i < out.size(); ++i) {
        nlohmann::json line{{"id", samples[i].id},
                            {"text", samples[i].text},
                            {"embedding", std::vector<double>(out[i].values().begin(),
                                                              out[i].values().end())}};
        std::cout << line.dump() << '\n';
      }
      std::cerr << "queries_used " << used << "\n";
    } else if (*attack) {
      auto config = resolve_config(g);
      auto inputs = load_inputs(config);
      auto source = make_source(config, inputs);
      auto langs = attack_langs.empty() ? config_languages(inputs) : attack_langs;
      write_outputs(run_reconstruction(config, inputs, *source, langs), config, "reconstruction");
    } else if (*sweep) {
      auto config = resolve_config(g);
      auto inputs = load_inputs(config);
      auto source = make_source(config, inputs);
      auto result = run_defense_sweep(config, inputs, *source);
      write_outputs(result.report, config, "defense_sweep");
      std::ofstream(config.output_dir / "defense_plot.csv") << result.plot_csv;
    } else if (*xling) {
      auto config = resolve_config(g);
      auto inputs = load_inputs(config);
      auto source = make_source(config, inputs);
      auto pairs = config.crosslingual.pairs;
      if (!src.empty() || !tgt.empty()) {
        if (src.empty() || tgt.empty()) throw ConfigError("--src and --tgt go together");
        pairs = {{src, tgt}};
      }
      if (pairs.empty()) throw ConfigError("no crosslingual pairs (use --src/--tgt)");
      ExperimentReport all;
      for (const auto& [s, t] : pairs) all.append(run_crosslingual(config, inputs, *source, s, t));
      write_outputs(all, config, "crosslingual");
    } else if (*retrieve) {
      auto config = resolve_config(g);
      auto inputs = load_inputs(config);
      if (inputs.tasks.empty()) throw ConfigError("no retrieval tasks configured");
      NGramEmbedder embedder(config.embedder);
      ExperimentReport rep;
      double total = 0.0;
      for (const auto& task : inputs.tasks) {
        const double ndcg = retrieval::evaluate_task(task, embedder, config.defense);
        total += ndcg;
        rep.rows.push_back({"retrieval", task.name, 0, 1, config.defense.label(), {}, ndcg,
                            embedder.queries_used(), 0.0, std::nullopt});
        std::cout << task.name << "\t" << ndcg << "\n";
      }
      std::cout << "mean\t" << total / static_cast<double>(inputs.tasks.size()) << "\n";
      emit_report(rep, ReportFormat::csv, config.output_dir / "retrieval.csv");
    } else if (*serve) {
      auto config = resolve_config(g);
      auto inputs = load_inputs(config);
      NGramEmbedder embedder(config.embedder);
      eaas::Server server(embedder, {}, corpus_group_means(inputs.corpora, config.embedder));
      const auto bound = server.start(port, bind);
      std::cout << "listening on " << bind << ":" << bound << std::endl;
      server.wait();
    } else if (*report) {
      auto rep = load_csv(in_csv);
      std::cout << (format == "csv" ? to_csv(rep) : to_markdown(rep));
    } else if (*synth) {
      if (g.out_dir.empty()) throw ConfigError("synth needs --out");
      if (g.seed) spec.seed = *g.seed;
      const fs::path dir = g.out_dir;
      const auto suite = synthetic::generate(spec);
      synthetic::write_suite(suite, dir);
      ExperimentConfig config;
      config.attack.max_tokens = spec.sentence_tokens;
      config.output_dir = "results";
      config.seed = spec.seed;
      for (const auto& [lang, c] : suite.corpora) config.corpora[lang] = "corpora/" + lang + ".jsonl";
      for (const auto& [pair, w] : suite.dictionaries) {
        const auto key = pair.first + "-" + pair.second;
        config.dictionaries[key] = "dict/" + key + ".tsv";
      }
      for (const auto& t : suite.tasks) {
        config.retrieval_tasks.push_back({t.name, "tasks/" + t.name + "/queries.jsonl",
                                          "tasks/" + t.name + "/docs.jsonl",
                                          "tasks/" + t.name + "/qrels.tsv"});
      }
      if (spec.langs.size() > 1) config.crosslingual.pairs = {{spec.langs[0], spec.langs[1]}};
      std::ofstream(dir / "config.json") << nlohmann::json(config).dump(2) << '\n';
      std::cerr << "wrote synthetic suite and config.json to " << dir.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
