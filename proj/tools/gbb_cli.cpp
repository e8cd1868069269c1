// gbb: generalized block bootstrap pipeline for daily temperature pairs.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "gbb/commands.hpp"

namespace {

using gbb::cli::RunConfig;

const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  2  no block size solves the trace equation in --brange\n"
    "  3  validation failure (bad arguments, parse errors, unusable data)\n"
    "  4  I/O failure";

// Raw text of options that need post-processing.
struct RawFlags {
  std::string pair;
  std::string brange;
  std::string calendar = "on";
  std::string config;
};

void add_common(CLI::App* sub, RunConfig& cfg, RawFlags& raw) {
  sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
  sub->add_option("--config", raw.config, "JSON file of flag values (command-line flags win)");
}

void add_input(CLI::App* sub, RunConfig& cfg, const std::string& what) {
  sub->add_option("--input", cfg.input, what)->required();
}

void add_seed(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--seed", cfg.seed, "RNG seed (required)");
}

void add_solver(CLI::App* sub, RunConfig& cfg, RawFlags& raw) {
  sub->add_option("--brange", raw.brange, "Block size search range lo:hi (default 1.01:n/4)");
  sub->add_option("--tol", cfg.tol, "Relative tolerance on the trace residual")->capture_default_str();
}

void add_bootstrap(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--reps", cfg.reps, "Bootstrap replicates")->capture_default_str();
  sub->add_option("--threads", cfg.threads, "Worker threads for replicates")->capture_default_str();
}

void add_panel(CLI::App* sub, RunConfig& cfg, RawFlags& raw) {
  sub->add_option("--pair", raw.pair, "Station pair A,B for the ten-day series");
  sub->add_option("--calendar-blocks", raw.calendar,
                  "Ten-day blocks restart each January 1 (on) or run continuously (off)")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  sub->add_option("--span", cfg.span, "Loess span as a fraction of the year")->capture_default_str();
  sub->add_option("--loess-degree", cfg.loess_degree, "Local polynomial degree (1 or 2)")
      ->capture_default_str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t begin = 0;
  while (true) {
    const auto pos = s.find(sep, begin);
    parts.push_back(s.substr(begin, pos - begin));
    if (pos == std::string::npos) break;
    begin = pos + 1;
  }
  return parts;
}

// Fills options not given on the command line from a JSON object whose
// keys are flag names without the leading dashes.
void merge_config(CLI::App* sub, const std::string& path) {
  const gbb::Json j = gbb::read_json_file(path);
  if (!j.is_object()) throw gbb::Error(gbb::ErrorKind::kParse, path + ": config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "config") continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) throw gbb::Error(gbb::ErrorKind::kParse, path + ": unknown option '" + key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value.is_string() ? value.get<std::string>() : value.dump());
    opt->run_callback();
  }
}

void finish(RunConfig& cfg, const RawFlags& raw) {
  if (!raw.pair.empty()) {
    cfg.pair = split(raw.pair, ',');
    gbb::require(cfg.pair.size() == 2, gbb::ErrorKind::kInvalidArgument, "--pair expects A,B");
  }
  if (!raw.brange.empty()) {
    const auto parts = split(raw.brange, ':');
    gbb::require(parts.size() == 2, gbb::ErrorKind::kInvalidArgument, "--brange expects lo:hi");
    cfg.b_lo = gbb::parse_double(parts[0], "--brange");
    cfg.b_hi = gbb::parse_double(parts[1], "--brange");
  }
  cfg.calendar_blocks = raw.calendar == "on";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized block bootstrap: block-size calibration and copula homogeneity testing."};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  RunConfig cfg;
  RawFlags raw;

  auto* std_cmd = app.add_subcommand("standardize", "Seasonal curves, standardized panel, ten-day pair halves");
  add_input(std_cmd, cfg, "Daily panel CSV (date,station1,...)");
  add_panel(std_cmd, cfg, raw);
  add_common(std_cmd, cfg, raw);

  auto* fit_cmd = app.add_subcommand("fit", "AIC lag selection, VAR fit and Ljung-Box residual check");
  add_input(fit_cmd, cfg, "Headerless series CSV");
  fit_cmd->add_option("--pmax", cfg.p_max, "Largest VAR order considered")->capture_default_str();
  fit_cmd->add_option("--lb-lags", cfg.ljung_box_lags, "Ljung-Box lags")->capture_default_str();
  add_common(fit_cmd, cfg, raw);

  auto* bs_cmd = app.add_subcommand("blocksize", "Solve the trace equation for a real block size");
  add_input(bs_cmd, cfg, "Headerless series CSV");
  bs_cmd->add_option("--model", cfg.model, "Model JSON from fit")->required();
  add_solver(bs_cmd, cfg, raw);
  add_common(bs_cmd, cfg, raw);

  auto* h_cmd = app.add_subcommand("homogeneity", "Block bootstrap copula homogeneity test");
  add_input(h_cmd, cfg, "First sample, headerless CSV");
  h_cmd->add_option("--second", cfg.second, "Second sample, headerless CSV")->required();
  h_cmd->add_option("--block", cfg.block, "Block size; solved from --model when omitted");
  h_cmd->add_option("--model", cfg.model, "Model JSON used to solve for the block size");
  add_solver(h_cmd, cfg, raw);
  add_bootstrap(h_cmd, cfg);
  add_seed(h_cmd, cfg);
  add_common(h_cmd, cfg, raw);

  auto* all_cmd = app.add_subcommand("run-all", "standardize, fit, blocksize and homogeneity with a manifest");
  add_input(all_cmd, cfg, "Daily panel CSV (date,station1,...)");
  add_panel(all_cmd, cfg, raw);
  all_cmd->add_option("--pmax", cfg.p_max, "Largest VAR order considered")->capture_default_str();
  add_solver(all_cmd, cfg, raw);
  add_bootstrap(all_cmd, cfg);
  add_seed(all_cmd, cfg);
  add_common(all_cmd, cfg, raw);

  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a VAR series or a synthetic daily panel");
  sim_cmd->add_option("--model", cfg.model, "Model JSON");
  sim_cmd->add_option("--n", cfg.sim_n, "Series length");
  sim_cmd->add_option("--panel-years", cfg.panel_years, "Write a synthetic daily panel of this many years");
  add_seed(sim_cmd, cfg);
  add_common(sim_cmd, cfg, raw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gbb::cli::kExitValidation;
  }

  CLI::App* sub = app.get_subcommands().front();
  cfg.command = sub->get_name();
  try {
    if (!raw.config.empty()) merge_config(sub, raw.config);
    finish(cfg, raw);
  } catch (const gbb::Error& e) {
    std::cerr << "error [" << gbb::to_string(e.kind()) << "]: " << e.what() << '\n';
    return gbb::cli::exit_code_for(e.kind());
  } catch (const CLI::ParseError& e) {
    std::cerr << "error [config]: " << e.what() << '\n';
    return gbb::cli::kExitValidation;
  }

  gbb::cli::CommandResult result;
  const int code = gbb::cli::run(cfg, std::cerr, &result);
  if (code == gbb::cli::kExitOk && cfg.command == "homogeneity")
    std::cout << "p_value " << gbb::format_double(result.summary.at("p_value").get<double>()) << '\n';
  if (cfg.command == "blocksize" || cfg.command == "run-all") {
    const gbb::Json& j = cfg.command == "blocksize" ? result.summary
                                                    : result.summary.value("steps", gbb::Json::object())
                                                          .value("blocksize", gbb::Json::object())
                                                          .value("summary", gbb::Json::object());
    if (j.contains("status")) std::cout << "status " << j["status"].get<std::string>() << '\n';
  }
  if (cfg.command == "run-all" && result.summary.contains("steps") &&
      result.summary["steps"].contains("homogeneity"))
    std::cout << "p_value "
              << gbb::format_double(result.summary["steps"]["homogeneity"]["summary"]["p_value"].get<double>())
              << '\n';
  return code;
}
