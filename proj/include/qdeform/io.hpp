#pragma once

// Serialization: matrix documents, ODE tables, flat reports (JSON and CSV).
// Numbers are written with 17 significant digits; reports carry no timestamps.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdeform/errors.hpp"
#include "qdeform/fock.hpp"
#include "qdeform/position_rep.hpp"
#include "qdeform/report.hpp"
#include "qdeform/similarity.hpp"

namespace qdeform {

using Json = nlohmann::ordered_json;

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// JSON number, or the strings "nan"/"inf"/"-inf" which JSON cannot represent.
inline Json number_json(double v) {
  if (std::isfinite(v)) return Json(v);
  return Json(format_number(v));
}

inline Json matrix_json(const FockMatrix& m) {
  Json doc;
  doc["dim"] = m.dim();
  doc["label"] = m.label();
  Json re = Json::array();
  Json im = Json::array();
  for (Eigen::Index r = 0; r < m.mat().rows(); ++r) {
    Json row_re = Json::array();
    Json row_im = Json::array();
    for (Eigen::Index c = 0; c < m.mat().cols(); ++c) {
      row_re.push_back(m(r, c).real());
      row_im.push_back(m(r, c).imag());
    }
    re.push_back(std::move(row_re));
    im.push_back(std::move(row_im));
  }
  doc["re"] = std::move(re);
  doc["im"] = std::move(im);
  return doc;
}

inline FockMatrix matrix_from_json(const Json& doc) {
  try {
    const auto dim = doc.at("dim").get<std::size_t>();
    const auto& re = doc.at("re");
    const auto& im = doc.at("im");
    require(re.size() == dim && im.size() == dim, ErrorKind::io, "matrix document rows do not match dim");
    CMatrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < dim; ++r) {
      require(re[r].size() == dim && im[r].size() == dim, ErrorKind::io, "matrix document row length mismatch");
      for (std::size_t c = 0; c < dim; ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            Complex(re[r][c].get<double>(), im[r][c].get<double>());
    }
    return FockMatrix(std::move(m), doc.at("label").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, std::string("malformed matrix document: ") + e.what());
  }
}

/// Sidecar for a similarity solve: per-column residuals, gauge factors,
/// resonance flags and condition estimates.
template <class Real>
Json similarity_sidecar(const SimilaritySolution<Real>& sol) {
  Json doc;
  doc["q"] = sol.q;
  doc["u"] = sol.u;
  doc["dim"] = sol.dim();
  doc["trivial"] = sol.trivial;
  doc["working_digits"] = decimal_digits<Real>();
  Json syl = Json::array();
  for (double v : sol.sylvester_residual) syl.push_back(number_json(v));
  doc["sylvester_residual"] = std::move(syl);
  doc["recurrence_residual"] = number_json(sol.recurrence_residual);
  Json gauge = Json::array();
  for (const auto& g : sol.column_gauge) gauge.push_back(number_json(to_double(g)));
  doc["column_gauge"] = std::move(gauge);
  Json res = Json::array();
  for (const auto& [m, n] : sol.resonance_flags) res.push_back(Json::array({m, n}));
  doc["resonance_flags"] = std::move(res);
  if (sol.condition) {
    doc["condition"] = Json{{"full", number_json(sol.condition->full)},
                            {"interior", number_json(sol.condition->interior)}};
  }
  return doc;
}

/// Plain-text (x, psi, psi') table with '#' header metadata.
inline std::string ode_table(const OdeSolution& sol) {
  std::ostringstream os;
  os << "# q = " << format_number(sol.problem.q) << '\n'
     << "# u = " << format_number(sol.problem.u) << '\n'
     << "# branch = " << to_string(sol.branch) << '\n'
     << "# method = " << to_string(sol.method) << '\n'
     << "# growth_class = " << to_string(sol.growth) << '\n'
     << "# envelope_slope = " << format_number(sol.envelope_slope) << '\n'
     << "# x psi dpsi\n";
  for (std::size_t i = 0; i < sol.grid.size(); ++i)
    os << format_number(sol.grid[i]) << ' ' << format_number(sol.values[i]) << ' '
       << format_number(sol.derivatives[i]) << '\n';
  return os.str();
}

struct Report {
  std::string subcommand;
  Json config = Json::object();
  bool nonstandard_thresholds = false;
  std::vector<ReportEntry> entries;
  Json diagnostics = Json::object();
  std::string error;  // set when the run stopped before its checks

  bool passed() const { return error.empty() && all_passed(entries); }
};

inline Json entry_json(const ReportEntry& e) {
  return Json{{"tag", e.tag},
              {"check", e.check},
              {"block", e.block},
              {"norm", e.norm},
              {"value", number_json(e.value)},
              {"threshold", e.informational ? Json(nullptr) : number_json(e.threshold)},
              {"comparison", e.comparison()},
              {"status", e.informational ? "info" : (e.passed() ? "pass" : "fail")}};
}

inline Json report_json(const Report& r) {
  Json doc;
  doc["tool"] = "qdeform";
  doc["version"] = kToolVersion;
  doc["subcommand"] = r.subcommand;
  doc["config"] = r.config;
  doc["nonstandard_thresholds"] = r.nonstandard_thresholds;
  Json entries = Json::array();
  for (const auto& e : r.entries) entries.push_back(entry_json(e));
  doc["entries"] = std::move(entries);
  if (!r.diagnostics.empty()) doc["diagnostics"] = r.diagnostics;
  if (!r.error.empty()) doc["error"] = r.error;
  doc["passed"] = r.passed();
  return doc;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string report_csv(const Report& r) {
  std::ostringstream os;
  os << "tag,check,block,norm,value,threshold,comparison,status\n";
  for (const auto& e : r.entries) {
    os << csv_field(e.tag) << ',' << csv_field(e.check) << ',' << e.block << ',' << e.norm << ','
       << format_number(e.value) << ',' << (e.informational ? "" : format_number(e.threshold)) << ','
       << e.comparison() << ',' << (e.informational ? "info" : (e.passed() ? "pass" : "fail")) << '\n';
  }
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

inline void append_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for appending");
  out << content;
}

}  // namespace qdeform
