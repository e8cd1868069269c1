#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gbb/block_bootstrap.hpp"
#include "gbb/blocksize_solver.hpp"
#include "gbb/copula_test.hpp"
#include "gbb/error.hpp"
#include "gbb/series.hpp"
#include "gbb/var_model.hpp"

namespace gbb {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1";

// ---------------------------------------------------------------------------
// Text helpers

inline std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline double parse_double(std::string_view field, const std::string& context) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
    field.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    throw Error(ErrorKind::kParse, context + ": cannot parse number '" + std::string(field) + "'");
  return value;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> fields;
  std::size_t begin = 0;
  while (true) {
    const std::size_t comma = line.find(',', begin);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(begin));
      break;
    }
    fields.push_back(line.substr(begin, comma - begin));
    begin = comma + 1;
  }
  return fields;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  return out;
}

// ---------------------------------------------------------------------------
// Series: headerless CSV, one row per time point.

inline Series read_series_csv(std::istream& in, const std::string& source = "<stream>") {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    for (auto f : split_csv_line(line))
      row.push_back(parse_double(f, source + ":" + std::to_string(line_no)));
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorKind::kParse, source + ":" + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::kParse, source + ": no data rows");
  return Series::from_rows(rows);
}

inline Series load_series_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_series_csv(in, path.string());
}

inline void write_series_csv(std::ostream& out, const Series& s) {
  for (Eigen::Index t = 0; t < s.n(); ++t) {
    for (Eigen::Index j = 0; j < s.d(); ++j) {
      if (j) out << ',';
      out << format_double(s(t, j));
    }
    out << '\n';
  }
}

inline void save_series_csv(const std::filesystem::path& path, const Series& s) {
  auto out = open_output(path);
  write_series_csv(out, s);
}

// ---------------------------------------------------------------------------
// Matrices and models

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json flat_row_major(const Matrix& m) {
  Json flat = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return flat;
}

inline Matrix matrix_from_flat(const Json& flat, Eigen::Index rows, Eigen::Index cols,
                               const std::string& what) {
  if (!flat.is_array() || static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw Error(ErrorKind::kParse, what + ": expected " + std::to_string(rows * cols) + " entries");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = flat.at(static_cast<std::size_t>(i * cols + j)).get<double>();
  return m;
}

inline Json var_model_to_json(const VarModel& m) {
  Json j;
  j["schema"] = kSchemaVersion;
  j["d"] = m.d();
  j["p"] = m.p();
  Json coeffs = Json::array();
  for (const auto& a : m.coeffs()) coeffs.push_back(flat_row_major(a));
  j["coeffs"] = std::move(coeffs);
  j["innov_cov"] = flat_row_major(m.innov_cov());
  return j;
}

inline VarModel var_model_from_json(const Json& j) {
  try {
    const auto d = j.at("d").get<Eigen::Index>();
    const auto p = j.at("p").get<int>();
    require(d >= 1 && p >= 1, ErrorKind::kParse, "model needs d >= 1 and p >= 1");
    const auto& coeffs = j.at("coeffs");
    require(coeffs.is_array() && static_cast<int>(coeffs.size()) == p, ErrorKind::kParse,
            "model coeffs must hold p matrices");
    std::vector<Matrix> a;
    for (const auto& c : coeffs) a.push_back(matrix_from_flat(c, d, d, "coeffs"));
    return VarModel(std::move(a), matrix_from_flat(j.at("innov_cov"), d, d, "innov_cov"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("model JSON: ") + e.what());
  }
}

inline Json read_json_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Reports

inline void write_block_log_csv(std::ostream& out, const std::vector<Block>& blocks) {
  out << "start,length\n";
  for (const auto& b : blocks) out << b.start << ',' << b.length << '\n';
}

inline Json solve_report_to_json(const SolveReport& r) {
  Json j;
  j["schema"] = kSchemaVersion;
  j["status"] = to_string(r.status);
  j["b_hat"] = r.b_hat ? Json(*r.b_hat) : Json(nullptr);
  j["target"] = r.target;
  j["achieved"] = r.achieved;
  j["relative_residual"] = std::abs(r.achieved - r.target) / r.target;
  j["iterations"] = r.iterations;
  j["bracket"] = {r.bracket_lo, r.bracket_hi};
  j["sign_changes"] = r.sign_changes;
  return j;
}

// Two-column (b, trace) CSV; the header JSON carries the model target.
inline void write_trace_curve_csv(std::ostream& out, const TraceCurve& curve) {
  out << "b,trace\n";
  for (const auto& pt : curve.points) out << format_double(pt.b) << ',' << format_double(pt.trace) << '\n';
}

inline Json trace_curve_header(const TraceCurve& curve, double target) {
  Json j;
  j["schema"] = kSchemaVersion;
  j["n"] = curve.n;
  j["points"] = curve.points.size();
  j["target"] = target;
  j["n_times_target"] = target * static_cast<double>(curve.n);
  return j;
}

// Linear-interpolation quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  require(!sorted.empty(), ErrorKind::kInvalidArgument, "quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline Json homogeneity_report_to_json(const HomogeneityReport& r) {
  std::vector<double> sorted = r.replicates;
  std::sort(sorted.begin(), sorted.end());
  Json j;
  j["schema"] = kSchemaVersion;
  j["s_obs"] = r.s_obs;
  j["p_value"] = r.p_value;
  j["reps"] = r.reps;
  j["b_used"] = r.b_used;
  j["n"] = r.n;
  j["m"] = r.m;
  j["replicates_summary"] = {{"min", sorted.front()},
                             {"q1", sorted_quantile(sorted, 0.25)},
                             {"median", sorted_quantile(sorted, 0.5)},
                             {"q3", sorted_quantile(sorted, 0.75)},
                             {"max", sorted.back()}};
  return j;
}

inline void write_replicates_csv(std::ostream& out, const std::vector<double>& replicates) {
  out << "statistic\n";
  for (double v : replicates) out << format_double(v) << '\n';
}

}  // namespace gbb
