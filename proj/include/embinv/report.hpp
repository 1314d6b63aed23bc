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
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "embinv/error.hpp"
#include "embinv/metrics.hpp"

namespace embinv {

struct ReportRow {
  std::string experiment_id;
  std::string lang;
  int steps = 0;
  int beam = 1;
  std::string defense = "none";
  metrics::MetricReport metrics;
  std::optional<double> ndcg;
  std::uint64_t queries = 0;
  double wall_ms = 0.0;
  std::optional<double> gain_pct;  // AdTrans rows only
};

struct ExperimentReport {
  std::vector<ReportRow> rows;

  void append(const ExperimentReport& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  }
  bool has_gain() const {
    for (const auto& r : rows) {
      if (r.gain_pct) return true;
    }
    return false;
  }
};

inline constexpr const char* kCsvHeader =
    "experiment_id,lang,steps,beam,defense,bleu,rouge1,token_f1,exact,cos,ndcg,queries,wall_ms";

namespace detail {

inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

// Fixed 13-column header; a trailing gain_pct column is added only when the
// report carries AdTrans rows.
inline std::string to_csv(const ExperimentReport& report, bool include_wall_time = true) {
  if (report.rows.empty()) throw ConfigError("emit_report: empty report");
  const bool gain = report.has_gain();
  std::ostringstream out;
  out << kCsvHeader << (gain ? ",gain_pct" : "") << '\n';
  for (const auto& r : report.rows) {
    out << detail::csv_field(r.experiment_id) << ',' << detail::csv_field(r.lang) << ','
        << r.steps << ',' << r.beam << ',' << detail::csv_field(r.defense) << ','
        << detail::fmt6(r.metrics.bleu) << ',' << detail::fmt6(r.metrics.rouge1_recall) << ','
        << detail::fmt6(r.metrics.token_f1) << ',' << detail::fmt6(r.metrics.exact_match) << ','
        << detail::fmt6(r.metrics.cos) << ',' << (r.ndcg ? detail::fmt6(*r.ndcg) : "") << ','
        << r.queries << ',' << (include_wall_time ? detail::fmt6(r.wall_ms) : "");
    if (gain) out << ',' << (r.gain_pct ? detail::fmt6(*r.gain_pct) : "");
    out << '\n';
  }
  return out.str();
}

inline ExperimentReport parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("report CSV: missing header");
  const bool gain = line == std::string(kCsvHeader) + ",gain_pct";
  if (!gain && line != kCsvHeader) throw ParseError("report CSV: unexpected header");
  const std::size_t ncols = gain ? 14 : 13;
  ExperimentReport report;
  std::size_t lineno = 1;
  auto num = [&](const std::string& s) {
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw ParseError("report CSV line " + std::to_string(lineno) + ": bad number '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != ncols) {
      throw ParseError("report CSV line " + std::to_string(lineno) + ": expected " +
                       std::to_string(ncols) + " fields");
    }
    ReportRow r;
    r.experiment_id = f[0];
    r.lang = f[1];
    r.steps = static_cast<int>(num(f[2]));
    r.beam = static_cast<int>(num(f[3]));
    r.defense = f[4];
    r.metrics.bleu = num(f[5]);
    r.metrics.rouge1_recall = num(f[6]);
    r.metrics.token_f1 = num(f[7]);
    r.metrics.exact_match = num(f[8]);
    r.metrics.cos = num(f[9]);
    if (!f[10].empty()) r.ndcg = num(f[10]);
    r.queries = static_cast<std::uint64_t>(num(f[11]));
    r.wall_ms = f[12].empty() ? 0.0 : num(f[12]);
    if (gain && !f[13].empty()) r.gain_pct = num(f[13]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

inline ExperimentReport load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open report " + path.string());
  return parse_csv(in);
}

inline std::string row_label(const ReportRow& r) {
  if (r.steps == 0) return "Base (0 Steps)";
  std::string s = "(" + std::to_string(r.steps) + (r.steps == 1 ? " Step" : " Steps");
  if (r.beam > 1) s += " + " + std::to_string(r.beam) + " sbeam";
  return s + ")";
}

// One section per experiment id, one table per language inside it.
inline std::string to_markdown(const ExperimentReport& report) {
  if (report.rows.empty()) throw ConfigError("emit_report: empty report");
  std::vector<std::string> experiments;
  std::map<std::string, std::vector<std::string>> langs;
  for (const auto& r : report.rows) {
    if (!langs.contains(r.experiment_id)) experiments.push_back(r.experiment_id);
    auto& l = langs[r.experiment_id];
    if (std::find(l.begin(), l.end(), r.lang) == l.end()) l.push_back(r.lang);
  }
  std::ostringstream out;
  char buf[512];
  for (const auto& exp : experiments) {
    out << "## " << exp << "\n\n";
    for (const auto& lang : langs[exp]) {
      out << "### " << lang << "\n\n";
      out << "| Setting | Defense | #Tokens | BLEU | ROUGE-1 | TF1 | Exact | COS | NDCG@10 | "
             "Queries | Wall (ms) | Gain |\n";
      out << "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
      for (const auto& r : report.rows) {
        if (r.experiment_id != exp || r.lang != lang) continue;
        std::string ndcg = r.ndcg ? detail::fmt6(*r.ndcg).substr(0, 6) : "-";
        std::string gain = "-";
        if (r.gain_pct) {
          std::snprintf(buf, sizeof(buf), "%s%.2f%%", *r.gain_pct >= 0 ? "+" : "", *r.gain_pct);
          gain = buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "| %s | %s | %.2f | %.2f | %.2f | %.2f | %.1f | %.4f | %s | %llu | %.1f | %s |\n",
                      row_label(r).c_str(), r.defense.c_str(), r.metrics.num_tokens_pred,
                      r.metrics.bleu, 100.0 * r.metrics.rouge1_recall, 100.0 * r.metrics.token_f1,
                      r.metrics.exact_match, r.metrics.cos, ndcg.c_str(),
                      static_cast<unsigned long long>(r.queries), r.wall_ms, gain.c_str());
        out << buf;
      }
      out << '\n';
    }
  }
  return out.str();
}

enum class ReportFormat { csv, markdown };

inline std::filesystem::path emit_report(const ExperimentReport& report, ReportFormat format,
                                         const std::filesystem::path& path) {
  const std::string body = format == ReportFormat::csv ? to_csv(report) : to_markdown(report);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write report " + path.string());
  out << body;
  return path;
}

}  // namespace embinv
