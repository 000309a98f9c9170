#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "apt/errors.hpp"
#include "apt/replicate.hpp"
#include "apt/sampler.hpp"

namespace apt {

// ---------------------------------------------------------------------------
// Number formatting shared by every text artifact. Shortest representation
// that round-trips, "nan" / "inf" / "-inf" for non-finite values.

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw RuntimeError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw RuntimeError("not a number: '" + s + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Trace: JSON lines. The first line is a header object
//   {"format":"apt-trace","version":1,"levels":L,"dim":d}
// followed by one object per recorded iteration with the fields
//   iteration      1-based iteration number
//   betas          inverse temperatures after the iteration's adaptation
//   rho            temperature parameters after the iteration's adaptation
//   swap_pair      lower level of the proposed swap, 1-based
//   swap_prob      swap acceptance probability
//   swap_accepted  whether the swap was accepted
//   accept_prob    per-level move acceptance probability
//   accepted       per-level move outcome (0/1)
//   log_scale      per-level proposal log-scale (empty for lattice targets)
//   x1             level-1 state (absent when not recorded)

inline constexpr const char* kTraceFormat = "apt-trace";
inline constexpr int kTraceVersion = 1;

struct TraceHeader {
  std::size_t levels = 0;
  std::size_t dim = 0;
};

inline nlohmann::json to_json(const IterationRecord& r) {
  nlohmann::json j;
  j["iteration"] = r.iteration;
  j["betas"] = r.betas;
  j["rho"] = r.rho;
  j["swap_pair"] = r.swap_pair + 1;
  j["swap_prob"] = r.swap_prob;
  j["swap_accepted"] = r.swap_accepted;
  j["accept_prob"] = r.accept_prob;
  std::vector<int> acc(r.accepted.begin(), r.accepted.end());
  j["accepted"] = acc;
  j["log_scale"] = r.log_scale;
  if (!r.x1.empty()) j["x1"] = r.x1;
  return j;
}

inline IterationRecord record_from_json(const nlohmann::json& j) {
  IterationRecord r;
  try {
    r.iteration = j.at("iteration").get<std::size_t>();
    r.betas = j.at("betas").get<std::vector<double>>();
    r.rho = j.at("rho").get<std::vector<double>>();
    const auto pair = j.at("swap_pair").get<std::size_t>();
    if (pair < 1) throw RuntimeError("trace: swap_pair must be >= 1");
    r.swap_pair = pair - 1;
    r.swap_prob = j.at("swap_prob").get<double>();
    r.swap_accepted = j.at("swap_accepted").get<bool>();
    r.accept_prob = j.at("accept_prob").get<std::vector<double>>();
    for (int v : j.at("accepted").get<std::vector<int>>()) r.accepted.push_back(static_cast<std::uint8_t>(v));
    r.log_scale = j.at("log_scale").get<std::vector<double>>();
    if (j.contains("x1")) r.x1 = j.at("x1").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw RuntimeError(std::string("trace: malformed record: ") + e.what());
  }
  return r;
}

class TraceWriter {
 public:
  TraceWriter(std::ostream& out, const TraceHeader& header) : out_(&out) {
    nlohmann::json h;
    h["format"] = kTraceFormat;
    h["version"] = kTraceVersion;
    h["levels"] = header.levels;
    h["dim"] = header.dim;
    *out_ << h.dump() << '\n';
  }

  void write(const IterationRecord& r) { *out_ << to_json(r).dump() << '\n'; }

 private:
  std::ostream* out_;
};

struct Trace {
  TraceHeader header;
  std::vector<IterationRecord> records;
};

inline Trace read_trace(std::istream& in) {
  Trace t;
  std::string line;
  if (!std::getline(in, line)) throw RuntimeError("trace: empty input");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw RuntimeError(std::string("trace: bad header: ") + e.what());
  }
  if (!h.is_object() || h.value("format", "") != kTraceFormat) throw RuntimeError("trace: missing apt-trace header");
  if (h.value("version", 0) != kTraceVersion)
    throw RuntimeError("trace: unsupported version " + std::to_string(h.value("version", 0)));
  t.header.levels = h.value("levels", std::size_t{0});
  t.header.dim = h.value("dim", std::size_t{0});
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      t.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw RuntimeError("trace: line " + std::to_string(lineno) + ": " + e.what());
    }
    if (t.records.back().betas.size() != t.header.levels)
      throw RuntimeError("trace: line " + std::to_string(lineno) + ": betas length differs from header");
  }
  return t;
}

// ---------------------------------------------------------------------------
// Summary: CSV with a version line, a column header and one row per
// estimator. Lines starting with '#' after the first are comments.
//
//   # apt-summary v1
//   estimator,mean,std,rmse
//   E[X1],4.47,0.58,0.57

inline constexpr const char* kSummaryHeader = "# apt-summary v1";

inline void write_summary(std::ostream& out, const ReplicationTable& table) {
  out << kSummaryHeader << '\n';
  out << "# replications " << table.replications;
  if (table.single_replication) out << " (std undefined, reported as 0)";
  out << '\n';
  out << "estimator,mean,std,rmse\n";
  for (const auto& r : table.rows)
    out << r.name << ',' << format_double(r.mean) << ',' << format_double(r.std) << ',' << format_double(r.rmse)
        << '\n';
}

inline std::vector<EstimatorRow> read_summary(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSummaryHeader) throw RuntimeError("summary: missing '# apt-summary v1' line");
  bool have_columns = false;
  std::vector<EstimatorRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!have_columns) {
      if (line != "estimator,mean,std,rmse") throw RuntimeError("summary: unexpected column header '" + line + "'");
      have_columns = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw RuntimeError("summary: expected 4 columns in '" + line + "'");
    rows.push_back(EstimatorRow{cells[0], parse_double(cells[1]), parse_double(cells[2]), parse_double(cells[3])});
  }
  if (!have_columns) throw RuntimeError("summary: missing column header");
  return rows;
}

// ---------------------------------------------------------------------------
// Plot-ready tables.

/// Inverse-temperature trajectories: iteration, beta_1..beta_L, log-betas.
class BetaTableWriter {
 public:
  BetaTableWriter(std::ostream& out, std::size_t levels) : out_(&out), levels_(levels) {
    *out_ << "iteration";
    for (std::size_t l = 1; l <= levels; ++l) *out_ << ",beta_" << l;
    for (std::size_t l = 1; l <= levels; ++l) *out_ << ",log_beta_" << l;
    *out_ << '\n';
  }

  void write(const IterationRecord& r) {
    if (r.betas.size() != levels_) throw RuntimeError("beta table: level count mismatch");
    *out_ << r.iteration;
    for (double b : r.betas) *out_ << ',' << format_double(b);
    for (double b : r.betas) *out_ << ',' << format_double(std::log(b));
    *out_ << '\n';
  }

 private:
  std::ostream* out_;
  std::size_t levels_;
};

/// Level-1 samples: iteration, x_1..x_d.
class ScatterTableWriter {
 public:
  ScatterTableWriter(std::ostream& out, std::size_t dim) : out_(&out), dim_(dim) {
    *out_ << "iteration";
    for (std::size_t i = 1; i <= dim; ++i) *out_ << ",x" << i;
    *out_ << '\n';
  }

  void write(const IterationRecord& r) {
    if (r.x1.size() != dim_) return;
    *out_ << r.iteration;
    for (double v : r.x1) *out_ << ',' << format_double(v);
    *out_ << '\n';
  }

 private:
  std::ostream* out_;
  std::size_t dim_;
};

/// Minimal CSV reader for the plot tables: header names plus numeric rows.
struct NumericTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline NumericTable read_numeric_csv(std::istream& in) {
  NumericTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (t.columns.empty()) {
      t.columns = split(line);
      continue;
    }
    auto cells = split(line);
    if (cells.size() != t.columns.size()) throw RuntimeError("csv: row width differs from header in '" + line + "'");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c));
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw RuntimeError("csv: missing header");
  return t;
}

}  // namespace apt
