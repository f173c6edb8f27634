#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "mmsl/errors.hpp"
#include "mmsl/fitting.hpp"
#include "mmsl/laws.hpp"
#include "mmsl/records.hpp"

namespace mmsl {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Full-precision decimal rendering used for all numeric text output.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Parse a count that may use scientific notation or an M/B suffix
/// (1M = 1e6, 1B = 1e9), e.g. "28.35B", "5e9", "125000000".
inline double parse_quantity(const std::string& text) {
  if (text.empty()) throw ParseError("empty quantity");
  std::string body = text;
  double scale = 1.0;
  const char last = body.back();
  if (last == 'M' || last == 'm') {
    scale = 1e6;
    body.pop_back();
  } else if (last == 'B' || last == 'b') {
    scale = 1e9;
    body.pop_back();
  }
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(body, &used);
  } catch (const std::exception&) {
    throw ParseError("invalid quantity '" + text + "'");
  }
  if (used != body.size()) throw ParseError("invalid quantity '" + text + "'");
  return value * scale;
}

namespace io_detail {

inline const json& require_key(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError("missing field '" + std::string(key) + "' " + where);
  return *it;
}

inline double as_double(const json& j, const char* key, const std::string& where) {
  if (!j.is_number()) throw ParseError("field '" + std::string(key) + "' is not a number " + where);
  return j.get<double>();
}

inline std::uint64_t as_count(const json& j, const char* key, const std::string& where) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    const std::int64_t v = j.get<std::int64_t>();
    if (v < 0) throw ParseError("field '" + std::string(key) + "' is negative " + where);
    return static_cast<std::uint64_t>(v);
  }
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v < 0.0 || v != std::floor(v) || v > 1.8e19)
      throw ParseError("field '" + std::string(key) + "' is not a whole count " + where);
    return static_cast<std::uint64_t>(v);
  }
  throw ParseError("field '" + std::string(key) + "' is not a number " + where);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Run registry: a JSON array of run objects.

inline json to_json(const RunRecord& r) {
  json j;
  j["run_id"] = r.run_id;
  j["labels"] = r.labels;
  j["n_params"] = r.n_params;
  j["tokens_per_dataset"] = r.tokens_per_dataset;
  j["final_loss"] = r.final_loss;
  if (r.per_modality_final_loss) j["per_modality_final_loss"] = *r.per_modality_final_loss;
  j["batch_size"] = r.batch_size;
  j["objective"] = to_string(r.objective);
  return j;
}

inline RunRecord run_record_from_json(const json& j, const std::string& where) {
  using io_detail::as_count;
  using io_detail::as_double;
  using io_detail::require_key;
  if (!j.is_object()) throw ParseError("run record is not an object " + where);
  RunRecord r;
  r.run_id = require_key(j, "run_id", where).get<std::string>();
  const std::string in_run = "in run " + r.run_id;
  r.labels = require_key(j, "labels", in_run).get<std::vector<std::string>>();
  r.n_params = as_count(require_key(j, "n_params", in_run), "n_params", in_run);
  for (const auto& [name, count] : require_key(j, "tokens_per_dataset", in_run).items())
    r.tokens_per_dataset[name] = as_count(count, "tokens_per_dataset", in_run);
  r.final_loss = as_double(require_key(j, "final_loss", in_run), "final_loss", in_run);
  if (auto it = j.find("per_modality_final_loss"); it != j.end() && !it->is_null())
    r.per_modality_final_loss = it->get<std::map<std::string, double>>();
  r.batch_size = as_count(require_key(j, "batch_size", in_run), "batch_size", in_run);
  r.objective = objective_from_string(require_key(j, "objective", in_run).get<std::string>());
  try {
    validate(r);
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
  return r;
}

inline std::vector<RunRecord> load_registry(std::istream& in) {
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("registry is not valid JSON: ") + e.what());
  }
  if (!root.is_array()) throw ParseError("registry must be a JSON array of run objects");
  std::vector<RunRecord> records;
  records.reserve(root.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < root.size(); ++i) {
    RunRecord r = run_record_from_json(root[i], "at registry index " + std::to_string(i));
    if (!seen.insert(r.run_id).second)
      throw ParseError("duplicate run_id '" + r.run_id + "' at registry index " +
                       std::to_string(i));
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<RunRecord> load_registry(const std::string& path) {
  auto in = io_detail::open_input(path);
  return load_registry(in);
}

inline void save_registry(const std::vector<RunRecord>& records, std::ostream& out) {
  json root = json::array();
  for (const auto& r : records) root.push_back(to_json(r));
  out << root.dump(2) << "\n";
}

inline void save_registry(const std::vector<RunRecord>& records, const std::string& path) {
  auto out = io_detail::open_output(path);
  save_registry(records, out);
}

// ---------------------------------------------------------------------------
// Curve logs: one JSON record per line, appendable while training runs.

inline json to_json(const CurvePoint& p) {
  json j;
  j["step"] = p.step;
  j["tokens_seen"] = p.tokens_seen;
  j["loss"] = p.loss;
  if (!p.per_modality_loss.empty()) j["per_modality_loss"] = p.per_modality_loss;
  if (p.grad_norm) j["grad_norm"] = *p.grad_norm;
  if (p.learning_rate) j["learning_rate"] = *p.learning_rate;
  return j;
}

/// Streaming parse: one line is held in memory at a time. Every
/// rejection names the offending 1-based line.
inline TrainingCurve load_curve(std::istream& in) {
  TrainingCurve curve;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "at line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw ParseError("malformed line " + where);
    }
    if (!j.is_object()) throw ParseError("malformed line " + where);
    CurvePoint p;
    try {
      p.step = io_detail::require_key(j, "step", where).get<std::int64_t>();
      p.tokens_seen = io_detail::require_key(j, "tokens_seen", where).get<std::int64_t>();
      p.loss = io_detail::as_double(io_detail::require_key(j, "loss", where), "loss", where);
      if (auto it = j.find("per_modality_loss"); it != j.end() && !it->is_null())
        p.per_modality_loss = it->get<std::map<std::string, double>>();
      if (auto it = j.find("grad_norm"); it != j.end() && !it->is_null())
        p.grad_norm = it->get<double>();
      if (auto it = j.find("learning_rate"); it != j.end() && !it->is_null())
        p.learning_rate = it->get<double>();
      if (auto it = j.find("run_id"); it != j.end() && !it->is_null())
        curve.run_id = it->get<std::string>();
    } catch (const json::exception&) {
      throw ParseError("malformed line " + where);
    }
    if (!(p.loss > 0.0)) throw ParseError("non-positive loss " + where);
    if (!curve.points.empty()) {
      if (p.step <= curve.points.back().step)
        throw ParseError("non-increasing step " + where);
      if (p.tokens_seen < curve.points.back().tokens_seen)
        throw ParseError("tokens_seen decreased " + where);
    }
    curve.points.push_back(std::move(p));
  }
  if (curve.points.empty()) throw ParseError("curve log has no records");
  return curve;
}

inline TrainingCurve load_curve(const std::string& path) {
  auto in = io_detail::open_input(path);
  return load_curve(in);
}

inline void save_curve(const TrainingCurve& curve, std::ostream& out) {
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    json j = to_json(curve.points[i]);
    if (i == 0 && !curve.run_id.empty()) j["run_id"] = curve.run_id;
    out << j.dump() << "\n";
  }
}

inline void save_curve(const TrainingCurve& curve, const std::string& path) {
  auto out = io_detail::open_output(path);
  save_curve(curve, out);
}

// ---------------------------------------------------------------------------
// Law documents.

/// Container for a fitted law, its fit diagnostics and provenance.
struct LawDocument {
  std::variant<UnimodalLaw, BimodalLaw> parameters;
  FitReport fit_report;
  std::string created_at;
  std::vector<std::string> source_run_ids;

  bool is_unimodal() const { return std::holds_alternative<UnimodalLaw>(parameters); }
  const UnimodalLaw& unimodal() const { return std::get<UnimodalLaw>(parameters); }
  const BimodalLaw& bimodal() const { return std::get<BimodalLaw>(parameters); }

  bool operator==(const LawDocument&) const = default;
};

inline json to_json(const UnimodalLaw& law) {
  json j;
  j["modality"] = law.modality;
  j["E"] = law.E;
  j["A"] = law.A;
  j["B"] = law.B;
  j["alpha"] = law.alpha;
  j["beta"] = law.beta;
  return j;
}

inline UnimodalLaw unimodal_law_from_json(const json& j, const std::string& where) {
  using io_detail::as_double;
  using io_detail::require_key;
  UnimodalLaw law;
  law.modality = require_key(j, "modality", where).get<std::string>();
  law.E = as_double(require_key(j, "E", where), "E", where);
  law.A = as_double(require_key(j, "A", where), "A", where);
  law.B = as_double(require_key(j, "B", where), "B", where);
  law.alpha = as_double(require_key(j, "alpha", where), "alpha", where);
  law.beta = as_double(require_key(j, "beta", where), "beta", where);
  try {
    validate(law);
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
  return law;
}

inline json to_json(const BimodalLaw& law) {
  json j;
  j["pair"] = {law.modality_i, law.modality_j};
  j["C"] = law.C;
  j["A"] = law.A;
  j["B"] = law.B;
  j["alpha"] = law.alpha;
  j["beta"] = law.beta;
  j["law_i"] = to_json(law.law_i);
  j["law_j"] = to_json(law.law_j);
  return j;
}

inline BimodalLaw bimodal_law_from_json(const json& j, const std::string& where) {
  using io_detail::as_double;
  using io_detail::require_key;
  BimodalLaw law;
  const auto& pair = require_key(j, "pair", where);
  if (!pair.is_array() || pair.size() != 2)
    throw ParseError("field 'pair' must list two modalities " + where);
  law.modality_i = pair[0].get<std::string>();
  law.modality_j = pair[1].get<std::string>();
  law.C = as_double(require_key(j, "C", where), "C", where);
  law.A = as_double(require_key(j, "A", where), "A", where);
  law.B = as_double(require_key(j, "B", where), "B", where);
  law.alpha = as_double(require_key(j, "alpha", where), "alpha", where);
  law.beta = as_double(require_key(j, "beta", where), "beta", where);
  law.law_i = unimodal_law_from_json(require_key(j, "law_i", where), where + " law_i");
  law.law_j = unimodal_law_from_json(require_key(j, "law_j", where), where + " law_j");
  try {
    validate(law);
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
  return law;
}

inline json to_json(const FitReport& report) {
  json j;
  j["objective_value"] = report.objective_value;
  j["residuals"] = report.residuals;
  j["winning_init"] = report.winning_init;
  j["converged"] = report.converged;
  j["on_grid_boundary"] = report.on_grid_boundary;
  j["n_runs"] = report.n_runs;
  return j;
}

inline FitReport fit_report_from_json(const json& j) {
  FitReport report;
  report.objective_value = j.value("objective_value", 0.0);
  report.residuals = j.value("residuals", std::vector<double>{});
  report.winning_init = j.value("winning_init", std::vector<double>{});
  report.converged = j.value("converged", false);
  report.on_grid_boundary = j.value("on_grid_boundary", false);
  report.n_runs = j.value("n_runs", 0);
  if (report.residuals.size() != static_cast<std::size_t>(report.n_runs))
    throw ParseError("fit_report residuals do not match n_runs");
  return report;
}

inline void save_law(const LawDocument& doc, std::ostream& out) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = doc.is_unimodal() ? "unimodal" : "bimodal";
  j["created_at"] = doc.created_at;
  j["source_run_ids"] = doc.source_run_ids;
  j["parameters"] = doc.is_unimodal() ? to_json(doc.unimodal()) : to_json(doc.bimodal());
  j["fit_report"] = to_json(doc.fit_report);
  out << j.dump(2) << "\n";
}

inline void save_law(const LawDocument& doc, const std::string& path) {
  auto out = io_detail::open_output(path);
  save_law(doc, out);
}

inline LawDocument load_law(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("law document is not valid JSON: ") + e.what());
  }
  const auto& version = io_detail::require_key(j, "schema_version", "in law document");
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion)
    throw ParseError("unsupported schema_version " + version.dump());
  const std::string kind =
      io_detail::require_key(j, "kind", "in law document").get<std::string>();
  LawDocument doc;
  const auto& params = io_detail::require_key(j, "parameters", "in law document");
  if (kind == "unimodal")
    doc.parameters = unimodal_law_from_json(params, "in law document");
  else if (kind == "bimodal")
    doc.parameters = bimodal_law_from_json(params, "in law document");
  else
    throw ParseError("unknown kind '" + kind + "'");
  if (auto it = j.find("fit_report"); it != j.end() && !it->is_null())
    doc.fit_report = fit_report_from_json(*it);
  doc.created_at = j.value("created_at", std::string{});
  doc.source_run_ids = j.value("source_run_ids", std::vector<std::string>{});
  return doc;
}

inline LawDocument load_law(const std::string& path) {
  auto in = io_detail::open_input(path);
  return load_law(in);
}

// ---------------------------------------------------------------------------
// Fit configuration files. Every key is optional; omitted keys keep the
// built-in defaults.

inline FitConfig fit_config_from_json(const json& j) {
  FitConfig config;
  config.huber_delta = j.value("huber_delta", config.huber_delta);
  config.max_iterations = j.value("max_iterations", config.max_iterations);
  config.gradient_tolerance = j.value("gradient_tolerance", config.gradient_tolerance);
  if (auto it = j.find("init_grid"); it != j.end()) {
    config.init_grid.log_a = it->value("log_a", config.init_grid.log_a);
    config.init_grid.log_b = it->value("log_b", config.init_grid.log_b);
    config.init_grid.log_ec = it->value("log_ec", config.init_grid.log_ec);
    config.init_grid.alpha = it->value("alpha", config.init_grid.alpha);
    config.init_grid.beta = it->value("beta", config.init_grid.beta);
  }
  if (auto it = j.find("bounds"); it != j.end()) {
    const auto lo = it->value("lo", std::vector<double>{});
    const auto hi = it->value("hi", std::vector<double>{});
    if (!lo.empty()) {
      if (lo.size() != kNumFitParams) throw ParseError("bounds.lo needs 5 values");
      std::copy(lo.begin(), lo.end(), config.bounds.lo.begin());
    }
    if (!hi.empty()) {
      if (hi.size() != kNumFitParams) throw ParseError("bounds.hi needs 5 values");
      std::copy(hi.begin(), hi.end(), config.bounds.hi.begin());
    }
  }
  try {
    validate(config);
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
  return config;
}

inline FitConfig load_fit_config(const std::string& path) {
  auto in = io_detail::open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  return fit_config_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV export.

inline void write_csv(std::ostream& out, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_full(row[i]);
    out << "\n";
  }
}

}  // namespace mmsl
