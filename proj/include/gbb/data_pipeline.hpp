#pragma once

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gbb/error.hpp"
#include "gbb/io.hpp"
#include "gbb/rng.hpp"
#include "gbb/series.hpp"
#include "gbb/var_model.hpp"

namespace gbb {

using Date = std::chrono::sys_days;

inline constexpr int kDaySlots = 366;

inline Date make_date(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

inline std::chrono::year_month_day civil(Date d) { return std::chrono::year_month_day{d}; }

// Ordinal day of the calendar year, 1..366.
inline int day_of_year(Date d) {
  const auto ymd = civil(d);
  const Date jan1{ymd.year() / std::chrono::January / 1};
  return static_cast<int>((d - jan1).count()) + 1;
}

inline std::string format_date(Date d) {
  const auto ymd = civil(d);
  std::ostringstream os;
  os << std::setfill('0') << std::setw(4) << static_cast<int>(ymd.year()) << '-' << std::setw(2)
     << static_cast<unsigned>(ymd.month()) << '-' << std::setw(2) << static_cast<unsigned>(ymd.day());
  return os.str();
}

inline Date parse_date(std::string_view text, const std::string& context) {
  auto field = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc() || ptr != text.data() + pos + len)
      throw Error(ErrorKind::kParse, context + ": bad date '" + std::string(text) + "'");
    return v;
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw Error(ErrorKind::kParse, context + ": expected YYYY-MM-DD, got '" + std::string(text) + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{field(0, 4)},
                                        std::chrono::month{static_cast<unsigned>(field(5, 2))},
                                        std::chrono::day{static_cast<unsigned>(field(8, 2))}};
  if (!ymd.ok()) throw Error(ErrorKind::kParse, context + ": invalid date '" + std::string(text) + "'");
  return Date{ymd};
}

// Daily observations, one column per station. Missing values are NaN and
// may only appear in freshly loaded panels.
struct DailyPanel {
  std::vector<Date> dates;
  std::vector<std::string> station_ids;
  Matrix values;  // days x stations

  Eigen::Index days() const { return values.rows(); }
  Eigen::Index stations() const { return values.cols(); }

  Eigen::Index station_index(const std::string& id) const {
    for (std::size_t j = 0; j < station_ids.size(); ++j)
      if (station_ids[j] == id) return static_cast<Eigen::Index>(j);
    throw Error(ErrorKind::kInvalidArgument, "unknown station '" + id + "'");
  }

  std::vector<bool> missing_rows() const {
    std::vector<bool> out(static_cast<std::size_t>(days()), false);
    for (Eigen::Index t = 0; t < days(); ++t)
      out[static_cast<std::size_t>(t)] = !values.row(t).allFinite();
    return out;
  }
};

inline void validate_calendar(const std::vector<Date>& dates, const std::string& source) {
  for (std::size_t i = 1; i < dates.size(); ++i) {
    const auto step = (dates[i] - dates[i - 1]).count();
    if (step <= 0)
      throw Error(ErrorKind::kParse, source + ": dates not strictly increasing at " +
                                         format_date(dates[i]));
    if (step != 1)
      throw Error(ErrorKind::kDateGap, source + ": gap of " + std::to_string(step) +
                                           " days before " + format_date(dates[i]));
  }
}

// CSV with header `date,station1,station2,...`; empty fields are missing.
inline DailyPanel read_panel(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kParse, source + ": empty file");
  auto header = split_csv_line(line);
  if (header.size() < 2 || header.front() != "date")
    throw Error(ErrorKind::kParse, source + ":1: header must be date,station1,...");
  DailyPanel panel;
  for (std::size_t j = 1; j < header.size(); ++j) panel.station_ids.emplace_back(header[j]);
  const std::size_t k = panel.station_ids.size();

  std::vector<double> flat;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string ctx = source + ":" + std::to_string(line_no);
    auto fields = split_csv_line(line);
    if (fields.size() != k + 1)
      throw Error(ErrorKind::kParse, ctx + ": expected " + std::to_string(k + 1) + " fields");
    panel.dates.push_back(parse_date(fields[0], ctx));
    for (std::size_t j = 1; j <= k; ++j) {
      auto f = fields[j];
      while (!f.empty() && (f.back() == ' ' || f.back() == '\r')) f.remove_suffix(1);
      flat.push_back(f.empty() ? std::numeric_limits<double>::quiet_NaN() : parse_double(f, ctx));
    }
  }
  if (panel.dates.empty()) throw Error(ErrorKind::kParse, source + ": no data rows");
  validate_calendar(panel.dates, source);
  panel.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), static_cast<Eigen::Index>(panel.dates.size()), static_cast<Eigen::Index>(k));
  for (Eigen::Index j = 0; j < panel.stations(); ++j)
    if (!panel.values.col(j).array().isFinite().any())
      throw Error(ErrorKind::kMissingData,
                  source + ": station '" + panel.station_ids[static_cast<std::size_t>(j)] +
                      "' has no observations");
  return panel;
}

inline DailyPanel load_panel(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_panel(in, path.string());
}

inline void write_panel(std::ostream& out, const DailyPanel& panel) {
  out << "date";
  for (const auto& id : panel.station_ids) out << ',' << id;
  out << '\n';
  for (Eigen::Index t = 0; t < panel.days(); ++t) {
    out << format_date(panel.dates[static_cast<std::size_t>(t)]);
    for (Eigen::Index j = 0; j < panel.stations(); ++j) {
      out << ',';
      if (std::isfinite(panel.values(t, j))) out << format_double(panel.values(t, j));
    }
    out << '\n';
  }
}

inline void save_panel(const std::filesystem::path& path, const DailyPanel& panel) {
  auto out = open_output(path);
  write_panel(out, panel);
}

// ---------------------------------------------------------------------------
// Seasonal smoothing

struct SmoothingOptions {
  double span = 0.3;  // fraction of the 366-slot circle covered by the window
  int degree = 2;     // local polynomial degree (1 or 2)
};

struct SeasonalCurve {
  std::array<double, kDaySlots> mean{};
  std::array<double, kDaySlots> sd{};
};

// Local polynomial regression with tricube weights on the day-of-year
// circle. Slots with weight 0 (no raw estimate) are skipped as inputs but
// still receive a fitted value.
inline std::array<double, kDaySlots> loess_circular(const std::array<double, kDaySlots>& y,
                                                    const std::array<bool, kDaySlots>& valid,
                                                    const SmoothingOptions& opts) {
  require(opts.span > 0.0 && opts.span <= 1.0, ErrorKind::kInvalidArgument,
          "span must be in (0, 1]");
  require(opts.degree == 1 || opts.degree == 2, ErrorKind::kInvalidArgument,
          "loess degree must be 1 or 2");
  const double half_width = opts.span * kDaySlots / 2.0;
  const int terms = opts.degree + 1;
  std::array<double, kDaySlots> out{};
  for (int x0 = 0; x0 < kDaySlots; ++x0) {
    Eigen::Matrix3d xtx = Eigen::Matrix3d::Zero();
    Eigen::Vector3d xty = Eigen::Vector3d::Zero();
    for (int x = 0; x < kDaySlots; ++x) {
      if (!valid[static_cast<std::size_t>(x)]) continue;
      int off = x - x0;
      if (off > kDaySlots / 2) off -= kDaySlots;
      if (off < -kDaySlots / 2) off += kDaySlots;
      const double u = std::abs(off) / half_width;
      if (u >= 1.0) continue;
      const double t = 1.0 - u * u * u;
      const double w = t * t * t;
      const double z = off / half_width;
      const Eigen::Vector3d basis(1.0, z, z * z);
      xtx.topLeftCorner(terms, terms).noalias() +=
          w * basis.head(terms) * basis.head(terms).transpose();
      xty.head(terms) += w * y[static_cast<std::size_t>(x)] * basis.head(terms);
    }
    const Eigen::VectorXd coef =
        xtx.topLeftCorner(terms, terms).ldlt().solve(xty.head(terms));
    out[static_cast<std::size_t>(x0)] = coef(0);
  }
  return out;
}

// Per-day-of-year raw mean and SD across years, each smoothed on the circle.
inline SeasonalCurve seasonal_curve(const DailyPanel& panel, Eigen::Index station,
                                    const SmoothingOptions& opts = {}) {
  require(station >= 0 && station < panel.stations(), ErrorKind::kInvalidArgument,
          "station index out of range");
  std::array<double, kDaySlots> sum{}, sum_sq{};
  std::array<int, kDaySlots> count{};
  for (Eigen::Index t = 0; t < panel.days(); ++t) {
    const double x = panel.values(t, station);
    if (!std::isfinite(x)) continue;
    const auto slot = static_cast<std::size_t>(day_of_year(panel.dates[static_cast<std::size_t>(t)]) - 1);
    sum[slot] += x;
    sum_sq[slot] += x * x;
    ++count[slot];
  }
  std::array<double, kDaySlots> raw_mean{}, raw_sd{};
  std::array<bool, kDaySlots> valid{};
  for (std::size_t k = 0; k < kDaySlots; ++k) {
    if (count[k] < 2) {
      require(k == kDaySlots - 1, ErrorKind::kInsufficientData,
              "day-of-year " + std::to_string(k + 1) + " has fewer than two observations");
      continue;
    }
    const double c = count[k];
    raw_mean[k] = sum[k] / c;
    raw_sd[k] = std::sqrt(std::max(0.0, (sum_sq[k] - c * raw_mean[k] * raw_mean[k]) / (c - 1.0)));
    valid[k] = true;
  }
  SeasonalCurve curve;
  curve.mean = loess_circular(raw_mean, valid, opts);
  curve.sd = loess_circular(raw_sd, valid, opts);
  const double scale = std::max(1.0, std::abs(curve.mean[0]));
  for (std::size_t k = 0; k < kDaySlots; ++k)
    require(curve.sd[k] > 1e-12 * scale, ErrorKind::kZeroVariance,
            "smoothed SD is not positive on day-of-year " + std::to_string(k + 1));
  return curve;
}

// (x - m_doy) / s_doy per station.
inline DailyPanel standardize(const DailyPanel& panel, const std::vector<SeasonalCurve>& curves) {
  require(static_cast<Eigen::Index>(curves.size()) == panel.stations(),
          ErrorKind::kDimensionMismatch, "need one seasonal curve per station");
  DailyPanel out = panel;
  for (Eigen::Index t = 0; t < panel.days(); ++t) {
    const auto slot = static_cast<std::size_t>(day_of_year(panel.dates[static_cast<std::size_t>(t)]) - 1);
    for (Eigen::Index j = 0; j < panel.stations(); ++j) {
      const auto& c = curves[static_cast<std::size_t>(j)];
      require(std::isfinite(c.mean[slot]) && std::isfinite(c.sd[slot]) && c.sd[slot] > 0.0,
              ErrorKind::kMissingData, "seasonal curve lacks day-of-year " + std::to_string(slot + 1));
      out.values(t, j) = (panel.values(t, j) - c.mean[slot]) / c.sd[slot];
    }
  }
  return out;
}

// Ten-day means of the selected stations. Calendar-anchored mode restarts
// at each January 1 and folds days 361..366 into a 37th short block;
// otherwise blocks run continuously and the trailing remainder is dropped.
inline Series decade_average(const DailyPanel& panel, const std::vector<Eigen::Index>& stations,
                             bool calendar_anchored = true) {
  require(!stations.empty(), ErrorKind::kInvalidArgument, "select at least one station");
  for (auto j : stations)
    require(j >= 0 && j < panel.stations(), ErrorKind::kInvalidArgument, "station index out of range");
  const auto k = static_cast<Eigen::Index>(stations.size());

  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;  // [begin, end) rows
  if (calendar_anchored) {
    auto key = [&](Eigen::Index t) {
      const Date d = panel.dates[static_cast<std::size_t>(t)];
      return std::pair<int, int>(static_cast<int>(civil(d).year()), std::min((day_of_year(d) - 1) / 10, 36));
    };
    Eigen::Index begin = 0;
    for (Eigen::Index t = 1; t <= panel.days(); ++t)
      if (t == panel.days() || key(t) != key(begin)) {
        spans.emplace_back(begin, t);
        begin = t;
      }
  } else {
    for (Eigen::Index t = 0; t + 10 <= panel.days(); t += 10) spans.emplace_back(t, t + 10);
  }
  require(!spans.empty(), ErrorKind::kInsufficientData, "panel shorter than one ten-day block");

  Matrix out(static_cast<Eigen::Index>(spans.size()), k);
  for (std::size_t b = 0; b < spans.size(); ++b) {
    for (Eigen::Index c = 0; c < k; ++c) {
      double acc = 0.0;
      int cnt = 0;
      for (Eigen::Index t = spans[b].first; t < spans[b].second; ++t) {
        const double x = panel.values(t, stations[static_cast<std::size_t>(c)]);
        if (std::isfinite(x)) {
          acc += x;
          ++cnt;
        }
      }
      require(cnt > 0, ErrorKind::kMissingData,
              "ten-day block starting " + format_date(panel.dates[static_cast<std::size_t>(spans[b].first)]) +
                  " has no observations");
      out(static_cast<Eigen::Index>(b), c) = acc / cnt;
    }
  }
  return Series(std::move(out));
}

// First ceil(n/2) rows and the rest.
inline std::pair<Series, Series> split_halves(const Series& s) {
  require(s.n() >= 2, ErrorKind::kInsufficientData, "need at least two rows to split");
  const Eigen::Index first = (s.n() + 1) / 2;
  return {s.rows(0, first), s.rows(first, s.n() - first)};
}

// ---------------------------------------------------------------------------
// Synthetic fixtures

struct SyntheticPanelSpec {
  int start_year = 1961;
  int years = 40;
  std::uint64_t seed = 1;
  std::vector<std::string> station_ids = {"A", "B"};
  // Daily anomaly dynamics; rescaled to unit marginal variance per station.
  std::vector<Matrix> daily_coeffs;
  Matrix daily_innov_cov;
};

inline double synthetic_mean(int doy, Eigen::Index station) {
  const double phase = 2.0 * std::numbers::pi * (doy - 110.0) / 365.25;
  return 10.0 + 0.7 * static_cast<double>(station) + (11.0 - 0.4 * station) * std::sin(phase);
}

inline double synthetic_sd(int doy, Eigen::Index station) {
  const double phase = 2.0 * std::numbers::pi * (doy - 15.0) / 365.25;
  return 3.0 + 0.1 * static_cast<double>(station) + 1.2 * std::cos(phase);
}

// Daily panel with an injected annual cycle in mean and SD on top of VAR
// anomalies; deterministic given the seed.
inline DailyPanel synthetic_panel(const SyntheticPanelSpec& spec) {
  const auto k = static_cast<Eigen::Index>(spec.station_ids.size());
  std::vector<Matrix> coeffs = spec.daily_coeffs;
  Matrix innov = spec.daily_innov_cov;
  if (coeffs.empty()) {
    coeffs.push_back(0.7 * Matrix::Identity(k, k));
    innov = Matrix::Constant(k, k, 0.6) + 0.4 * Matrix::Identity(k, k);
  }
  const VarModel model(coeffs, innov);
  const Date first = make_date(spec.start_year, 1, 1);
  const Date end = make_date(spec.start_year + spec.years, 1, 1);
  const auto days = static_cast<Eigen::Index>((end - first).count());
  const Series anomalies = simulate(model, days, spec.seed);
  const Vector marginal_sd = autocov(model, 0).diagonal().cwiseSqrt();

  DailyPanel panel;
  panel.station_ids = spec.station_ids;
  panel.values.resize(days, k);
  for (Eigen::Index t = 0; t < days; ++t) {
    const Date d = first + std::chrono::days{t};
    panel.dates.push_back(d);
    const int doy = day_of_year(d);
    for (Eigen::Index j = 0; j < k; ++j)
      panel.values(t, j) = synthetic_mean(doy, j) + synthetic_sd(doy, j) * anomalies(t, j) / marginal_sd(j);
  }
  return panel;
}

}  // namespace gbb
