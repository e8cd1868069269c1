#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gbb/block_bootstrap.hpp"
#include "gbb/blocksize_solver.hpp"
#include "gbb/copula_test.hpp"
#include "gbb/data_pipeline.hpp"
#include "gbb/error.hpp"
#include "gbb/io.hpp"
#include "gbb/series.hpp"
#include "gbb/var_model.hpp"

namespace gbb::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitNoSolution = 2,
  kExitValidation = 3,
  kExitIo = 4,
};

inline int exit_code_for(ErrorKind kind) { return kind == ErrorKind::kIo ? kExitIo : kExitValidation; }

struct RunConfig {
  std::string command;
  std::filesystem::path input;
  std::filesystem::path second;  // homogeneity: second sample
  std::filesystem::path model;   // blocksize/homogeneity: fitted model JSON
  std::filesystem::path out = "out";
  std::vector<std::string> pair;
  int p_max = 10;
  double b_lo = 1.01;
  double b_hi = 0.0;  // <= 0: n/4
  double tol = 1e-4;
  double block = 0.0;  // homogeneity: explicit block size, 0 = solve from model
  Eigen::Index reps = 2000;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool calendar_blocks = true;
  double span = 0.3;
  int loess_degree = 2;
  int ljung_box_lags = 20;
  Eigen::Index sim_n = 0;      // simulate: series length
  int panel_years = 0;         // simulate: synthetic daily panel instead of a series
  std::vector<std::string> stations = {"A", "B"};
};

// Outcome of one command: the exit code plus the files it produced.
struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::filesystem::path> files;
  Json summary;
};

inline std::uint64_t require_seed(const RunConfig& cfg) {
  require(cfg.seed.has_value(), ErrorKind::kInvalidArgument,
          cfg.command + " is stochastic: --seed is required");
  return *cfg.seed;
}

inline Json config_to_json(const RunConfig& cfg) {
  Json j;
  j["command"] = cfg.command;
  j["input"] = cfg.input.string();
  if (!cfg.second.empty()) j["second"] = cfg.second.string();
  if (!cfg.model.empty()) j["model"] = cfg.model.string();
  j["out"] = cfg.out.string();
  j["pair"] = cfg.pair;
  j["pmax"] = cfg.p_max;
  j["brange"] = {cfg.b_lo, cfg.b_hi};
  j["tol"] = cfg.tol;
  j["reps"] = cfg.reps;
  j["seed"] = cfg.seed ? Json(*cfg.seed) : Json(nullptr);
  j["calendar_blocks"] = cfg.calendar_blocks;
  j["span"] = cfg.span;
  j["loess_degree"] = cfg.loess_degree;
  return j;
}

inline void write_seasonal_curve_csv(std::ostream& out, const SeasonalCurve& c) {
  out << "day,mean,sd\n";
  for (int k = 0; k < kDaySlots; ++k)
    out << k + 1 << ',' << format_double(c.mean[static_cast<std::size_t>(k)]) << ','
        << format_double(c.sd[static_cast<std::size_t>(k)]) << '\n';
}

// standardize: seasonal curves, standardized panel, and (with --pair) the
// ten-day pair series and its two halves.
inline CommandResult cmd_standardize(const RunConfig& cfg) {
  CommandResult res;
  const DailyPanel panel = load_panel(cfg.input);
  const SmoothingOptions smooth{cfg.span, cfg.loess_degree};

  std::vector<SeasonalCurve> curves;
  for (Eigen::Index j = 0; j < panel.stations(); ++j) {
    curves.push_back(seasonal_curve(panel, j, smooth));
    const auto path = cfg.out / ("seasonal_" + panel.station_ids[static_cast<std::size_t>(j)] + ".csv");
    auto out = open_output(path);
    write_seasonal_curve_csv(out, curves.back());
    res.files.push_back(path);
  }
  const DailyPanel std_panel = standardize(panel, curves);
  save_panel(cfg.out / "standardized.csv", std_panel);
  res.files.push_back(cfg.out / "standardized.csv");

  Json j;
  j["schema"] = kSchemaVersion;
  j["days"] = panel.days();
  j["stations"] = panel.station_ids;
  j["first_date"] = format_date(panel.dates.front());
  j["last_date"] = format_date(panel.dates.back());
  j["span"] = cfg.span;
  j["loess_degree"] = cfg.loess_degree;

  if (!cfg.pair.empty()) {
    require(cfg.pair.size() == 2, ErrorKind::kInvalidArgument, "--pair takes exactly two stations");
    const std::vector<Eigen::Index> cols = {panel.station_index(cfg.pair[0]),
                                            panel.station_index(cfg.pair[1])};
    const Series ten_day = decade_average(std_panel, cols, cfg.calendar_blocks);
    const auto [first, second] = split_halves(ten_day);
    save_series_csv(cfg.out / "pair_series.csv", ten_day);
    save_series_csv(cfg.out / "first_half.csv", first);
    save_series_csv(cfg.out / "second_half.csv", second);
    for (const char* f : {"pair_series.csv", "first_half.csv", "second_half.csv"})
      res.files.push_back(cfg.out / f);
    j["pair"] = cfg.pair;
    j["calendar_blocks"] = cfg.calendar_blocks;
    j["ten_day_points"] = ten_day.n();
    j["halves"] = {first.n(), second.n()};
  }
  write_json_file(cfg.out / "standardize.json", j);
  res.files.push_back(cfg.out / "standardize.json");
  res.summary = std::move(j);
  return res;
}

// fit: AIC lag choice, the fitted VAR, and Ljung-Box on its residuals.
inline CommandResult cmd_fit(const RunConfig& cfg) {
  CommandResult res;
  const Series s = load_series_csv(cfg.input);
  const LagSelection sel = select_lag_aic(s, cfg.p_max);
  const VarModel model = fit_var(s, sel.chosen_p);
  const LjungBoxResult lb = ljung_box(residuals(model, s), cfg.ljung_box_lags);
  const Stationarity st = is_stationary(model);

  write_json_file(cfg.out / "model.json", var_model_to_json(model));
  res.files.push_back(cfg.out / "model.json");

  Json j;
  j["schema"] = kSchemaVersion;
  j["n"] = s.n();
  j["d"] = s.d();
  j["chosen_p"] = sel.chosen_p;
  j["aic"] = sel.scores;
  j["stationary"] = st.stationary;
  j["spectral_radius"] = st.spectral_radius;
  j["ljung_box"] = {{"lags", lb.lags},
                    {"statistic", lb.statistic},
                    {"p_value", lb.p_value},
                    {"min_p_value", lb.min_p_value}};
  write_json_file(cfg.out / "fit.json", j);
  res.files.push_back(cfg.out / "fit.json");
  res.summary = std::move(j);
  return res;
}

inline SolveOptions solve_options(const RunConfig& cfg) {
  SolveOptions opts;
  opts.lo = cfg.b_lo;
  opts.hi = cfg.b_hi;
  opts.tol = cfg.tol;
  return opts;
}

// blocksize: solves the trace equation and exports the trace curve.
inline CommandResult cmd_blocksize(const RunConfig& cfg) {
  CommandResult res;
  const Series s = load_series_csv(cfg.input);
  const VarModel model = var_model_from_json(read_json_file(cfg.model));
  const SolveOptions opts = solve_options(cfg);
  const SolveReport rep = solve_block_size(s, model, opts);

  const double hi = opts.hi > 0.0 ? opts.hi : static_cast<double>(s.n()) / 4.0;
  const auto grid = block_grid(1.0, hi, 0.25);
  const TraceCurve curve = trace_curve(s, grid);
  {
    auto out = open_output(cfg.out / "trace_curve.csv");
    write_trace_curve_csv(out, curve);
  }
  Json j = solve_report_to_json(rep);
  j["n"] = s.n();
  j["curve"] = trace_curve_header(curve, rep.target);
  write_json_file(cfg.out / "blocksize.json", j);
  res.files = {cfg.out / "blocksize.json", cfg.out / "trace_curve.csv"};
  if (!rep.b_hat) res.exit_code = kExitNoSolution;
  res.summary = std::move(j);
  return res;
}

// homogeneity: block size from --block, else solved from --model.
inline CommandResult cmd_homogeneity(const RunConfig& cfg) {
  CommandResult res;
  const std::uint64_t seed = require_seed(cfg);
  const Series first = load_series_csv(cfg.input);
  const Series second = load_series_csv(cfg.second);

  double b = cfg.block;
  if (b <= 0.0) {
    require(!cfg.model.empty(), ErrorKind::kInvalidArgument,
            "homogeneity needs --block or --model");
    const VarModel model = var_model_from_json(read_json_file(cfg.model));
    const SolveReport rep = solve_block_size(first, model, solve_options(cfg));
    if (!rep.b_hat) {
      Json j = solve_report_to_json(rep);
      res.exit_code = kExitNoSolution;
      res.summary = std::move(j);
      return res;
    }
    b = *rep.b_hat;
  }

  HomogeneityOptions opts;
  opts.reps = cfg.reps;
  opts.seed = seed;
  opts.threads = cfg.threads;
  const HomogeneityReport rep = homogeneity_test(first, second, BlockSize(b), opts);
  Json j = homogeneity_report_to_json(rep);
  j["seed"] = seed;
  write_json_file(cfg.out / "homogeneity.json", j);
  {
    auto out = open_output(cfg.out / "replicates.csv");
    write_replicates_csv(out, rep.replicates);
  }
  res.files = {cfg.out / "homogeneity.json", cfg.out / "replicates.csv"};
  res.summary = std::move(j);
  return res;
}

// simulate: a VAR series from --model, or a synthetic daily panel.
inline CommandResult cmd_simulate(const RunConfig& cfg) {
  CommandResult res;
  const std::uint64_t seed = require_seed(cfg);
  if (cfg.panel_years > 0) {
    SyntheticPanelSpec spec;
    spec.years = cfg.panel_years;
    spec.seed = seed;
    spec.station_ids = cfg.stations;
    const DailyPanel panel = synthetic_panel(spec);
    save_panel(cfg.out / "panel.csv", panel);
    res.files.push_back(cfg.out / "panel.csv");
    res.summary = {{"schema", kSchemaVersion}, {"days", panel.days()}, {"stations", panel.station_ids}};
    return res;
  }
  require(!cfg.model.empty() && cfg.sim_n > 0, ErrorKind::kInvalidArgument,
          "simulate needs --model and --n, or --panel-years");
  const VarModel model = var_model_from_json(read_json_file(cfg.model));
  save_series_csv(cfg.out / "series.csv", simulate(model, cfg.sim_n, seed));
  res.files.push_back(cfg.out / "series.csv");
  res.summary = {{"schema", kSchemaVersion}, {"n", cfg.sim_n}, {"d", model.d()}};
  return res;
}

// run-all: standardize -> fit (first half) -> blocksize -> homogeneity,
// each step in its own subdirectory, plus a manifest.
inline CommandResult cmd_run_all(const RunConfig& cfg) {
  require(cfg.pair.size() == 2, ErrorKind::kInvalidArgument, "run-all needs --pair A,B");
  const std::uint64_t seed = require_seed(cfg);
  CommandResult res;
  Json manifest;
  manifest["schema"] = kSchemaVersion;
  manifest["config"] = config_to_json(cfg);
  Json steps = Json::object();

  auto step = [&](const char* name, RunConfig sub, auto&& fn) {
    sub.command = name;
    sub.out = cfg.out / name;
    CommandResult r = fn(sub);
    Json files = Json::array();
    for (const auto& f : r.files) {
      files.push_back(std::filesystem::relative(f, cfg.out).generic_string());
      res.files.push_back(f);
    }
    steps[name] = {{"exit_code", r.exit_code}, {"files", files}, {"summary", r.summary}};
    return r;
  };

  step("standardize", cfg, cmd_standardize);
  const auto std_dir = cfg.out / "standardize";

  RunConfig fit_cfg = cfg;
  fit_cfg.input = std_dir / "first_half.csv";
  step("fit", fit_cfg, cmd_fit);

  RunConfig bs_cfg = cfg;
  bs_cfg.input = std_dir / "first_half.csv";
  bs_cfg.model = cfg.out / "fit" / "model.json";
  const CommandResult bs = step("blocksize", bs_cfg, cmd_blocksize);

  if (bs.exit_code == kExitOk) {
    RunConfig h_cfg = cfg;
    h_cfg.input = std_dir / "first_half.csv";
    h_cfg.second = std_dir / "second_half.csv";
    h_cfg.block = bs.summary.at("b_hat").get<double>();
    h_cfg.seed = seed;
    step("homogeneity", h_cfg, cmd_homogeneity);
  }
  res.exit_code = bs.exit_code;
  manifest["steps"] = std::move(steps);
  manifest["exit_code"] = res.exit_code;
  write_json_file(cfg.out / "manifest.json", manifest);
  res.files.push_back(cfg.out / "manifest.json");
  res.summary = std::move(manifest);
  return res;
}

inline CommandResult dispatch(const RunConfig& cfg) {
  if (cfg.command == "standardize") return cmd_standardize(cfg);
  if (cfg.command == "fit") return cmd_fit(cfg);
  if (cfg.command == "blocksize") return cmd_blocksize(cfg);
  if (cfg.command == "homogeneity") return cmd_homogeneity(cfg);
  if (cfg.command == "simulate") return cmd_simulate(cfg);
  if (cfg.command == "run-all") return cmd_run_all(cfg);
  throw Error(ErrorKind::kInvalidArgument, "unknown command '" + cfg.command + "'");
}

// Runs a command, mapping library errors onto exit codes.
inline int run(const RunConfig& cfg, std::ostream& err = std::cerr, CommandResult* out = nullptr) {
  try {
    CommandResult r = dispatch(cfg);
    const int code = r.exit_code;
    if (out) *out = std::move(r);
    return code;
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error [io]: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace gbb::cli
