/* Copyright 2026 The sensireg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sensireg/error.hpp"
#include "sensireg/eval.hpp"

namespace sensireg {
namespace {

using nlohmann::json;

std::string Shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double ParseDouble(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    Fail(ErrorCode::kCorruptFile, "report: bad " + what + " value '" + s + "'");
  return v;
}

uint64_t ParseUnsigned(const std::string& s, const std::string& what) {
  uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    Fail(ErrorCode::kCorruptFile, "report: bad " + what + " value '" + s + "'");
  return v;
}

std::string QuoteField(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted) Fail(ErrorCode::kCorruptFile, "report: unterminated quote");
  return fields;
}

std::string FormatAccuracy(const ReportRow& row) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", row.accuracy());
  return buf;
}

// 4 decimals pin n_correct exactly while n stays below 5000.
std::size_t CorrectFromAccuracy(double acc, std::size_t n) {
  return static_cast<std::size_t>(std::llround(acc * static_cast<double>(n)));
}

}  // namespace

ReportFormat ReportFormatFromPath(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".csv") return ReportFormat::kCsv;
  if (ext == ".json") return ReportFormat::kJson;
  Fail(ErrorCode::kInvalidArgument, "report: unknown extension for " + path.string());
}

std::string ReportToCsv(const EvalReport& report) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const ReportRow& r : report.rows) {
    out += QuoteField(r.attack) + "," + (r.targeted ? "true" : "false") + "," +
           Shortest(r.epsilon) + "," + FormatAccuracy(r) + "," + std::to_string(r.n) + "," +
           Shortest(r.mean_dist) + "," + std::to_string(r.queries) + "\n";
  }
  return out;
}

EvalReport ReportFromCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kReportCsvHeader)
    Fail(ErrorCode::kCorruptFile, "report: missing or wrong CSV header");
  EvalReport report;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = SplitCsvLine(line);
    if (f.size() != 7)
      Fail(ErrorCode::kCorruptFile, "report: line " + std::to_string(line_no) + " has " +
                                        std::to_string(f.size()) + " fields, expected 7");
    ReportRow r;
    r.attack = f[0];
    if (f[1] != "true" && f[1] != "false")
      Fail(ErrorCode::kCorruptFile, "report: bad targeted value '" + f[1] + "'");
    r.targeted = f[1] == "true";
    r.epsilon = ParseDouble(f[2], "epsilon");
    const double acc = ParseDouble(f[3], "accuracy");
    r.n = ParseUnsigned(f[4], "n");
    r.n_correct = CorrectFromAccuracy(acc, r.n);
    r.mean_dist = ParseDouble(f[5], "mean_dist");
    r.queries = ParseUnsigned(f[6], "queries");
    report.rows.push_back(std::move(r));
  }
  return report;
}

std::string ReportToJson(const EvalReport& report) {
  json rows = json::array();
  for (const ReportRow& r : report.rows) {
    rows.push_back({{"attack", r.attack},
                    {"targeted", r.targeted},
                    {"epsilon", r.epsilon},
                    {"accuracy", r.accuracy()},
                    {"n_correct", r.n_correct},
                    {"n", r.n},
                    {"mean_dist", r.mean_dist},
                    {"queries", r.queries}});
  }
  json doc = {{"metadata",
               {{"model_id", report.metadata.model_id},
                {"dataset", report.metadata.dataset},
                {"seed", report.metadata.seed},
                {"timestamp", report.metadata.timestamp}}},
              {"rows", rows}};
  return doc.dump(2) + "\n";
}

EvalReport ReportFromJson(const std::string& text) {
  EvalReport report;
  try {
    const json doc = json::parse(text);
    const json& m = doc.at("metadata");
    report.metadata.model_id = m.at("model_id").get<std::string>();
    report.metadata.dataset = m.at("dataset").get<std::string>();
    report.metadata.seed = m.at("seed").get<uint64_t>();
    report.metadata.timestamp = m.at("timestamp").get<std::string>();
    for (const json& j : doc.at("rows")) {
      ReportRow r;
      r.attack = j.at("attack").get<std::string>();
      r.targeted = j.at("targeted").get<bool>();
      r.epsilon = j.at("epsilon").get<double>();
      r.n = j.at("n").get<std::size_t>();
      r.n_correct = j.contains("n_correct") ? j.at("n_correct").get<std::size_t>()
                                            : CorrectFromAccuracy(j.at("accuracy").get<double>(), r.n);
      r.mean_dist = j.at("mean_dist").get<double>();
      r.queries = j.at("queries").get<uint64_t>();
      report.rows.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    Fail(ErrorCode::kCorruptFile, std::string("report: ") + e.what());
  }
  return report;
}

void EmitReport(const EvalReport& report, const std::filesystem::path& path,
                ReportFormat format) {
  const std::string body = format == ReportFormat::kCsv ? ReportToCsv(report) : ReportToJson(report);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << body;
  out.flush();
  if (!out) Fail(ErrorCode::kIo, "write failed: " + path.string());
}

EvalReport ReadReport(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return ReportFormatFromPath(path) == ReportFormat::kCsv ? ReportFromCsv(ss.str())
                                                            : ReportFromJson(ss.str());
  } catch (const Error& e) {
    Fail(e.code(), std::string(e.what()) + " (" + path.string() + ")");
  }
}

}  // namespace sensireg
