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
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "embinv/core.hpp"
#include "embinv/error.hpp"

namespace embinv {

struct Corpus {
  std::vector<TextSample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  std::set<std::string> languages() const {
    std::set<std::string> out;
    for (const auto& s : samples) out.insert(s.lang);
    return out;
  }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// One {"id", "text", "lang"} object per line. Blank lines are skipped; line
// numbers in errors are 1-based.
inline Corpus parse_jsonl_corpus(std::istream& in, const std::string& source = "<stream>") {
  Corpus corpus;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = source + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j.contains("lang") ||
        !j["id"].is_string() || !j["text"].is_string() || !j["lang"].is_string()) {
      throw ParseError(where + ": expected {\"id\": string, \"text\": string, \"lang\": string}");
    }
    TextSample s{j["id"].get<std::string>(), j["text"].get<std::string>(),
                 j["lang"].get<std::string>()};
    if (!ids.insert(s.id).second) {
      throw ParseError(where + ": duplicate id '" + s.id + "'");
    }
    corpus.samples.push_back(std::move(s));
  }
  return corpus;
}

inline Corpus load_jsonl_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file " + path.string());
  return parse_jsonl_corpus(in, path.string());
}

inline void write_jsonl_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& s : corpus.samples) {
    out << nlohmann::json{{"id", s.id}, {"text", s.text}, {"lang", s.lang}}.dump() << '\n';
  }
}

// query id -> (doc id -> grade)
using QrelsTable = std::map<std::string, std::map<std::string, int>>;

// "query_id<TAB>doc_id<TAB>grade" per line.
inline QrelsTable load_qrels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open qrels file " + path.string());
  QrelsTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected query_id<TAB>doc_id<TAB>grade");
    }
    int grade = 0;
    try {
      std::size_t used = 0;
      grade = std::stoi(line.substr(t2 + 1), &used);
      if (used != line.size() - t2 - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad grade");
    }
    table[line.substr(0, t1)][line.substr(t1 + 1, t2 - t1 - 1)] = grade;
  }
  return table;
}

inline void write_qrels(const QrelsTable& qrels, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& [q, docs] : qrels) {
    for (const auto& [d, g] : docs) out << q << '\t' << d << '\t' << g << '\n';
  }
}

}  // namespace embinv
