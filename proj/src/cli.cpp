#include "dmpc/cli.hpp"

#include "dmpc/artifacts.hpp"
#include "dmpc/coordinator.hpp"
#include "dmpc/scenario_config.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <optional>
#include <ostream>

namespace dmpc {

namespace {

struct Source {
  std::string config;
  std::string preset;
};

ScenarioConfig load_source(const Source& src) {
  if (!src.config.empty() && !src.preset.empty()) {
    throw ConfigError("--config and --preset are mutually exclusive");
  }
  if (!src.config.empty()) return load_config(src.config);
  return preset_by_name(src.preset.empty() ? "paper-sec6" : src.preset);
}

void add_source(CLI::App* cmd, Source& src) {
  cmd->add_option("--config", src.config, "Scenario config (JSON)");
  cmd->add_option("--preset", src.preset, "Built-in scenario (paper-sec6)");
}

}  // namespace

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("dmpc");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("DMPC_LOG_LEVEL")) {
    const auto parsed = spdlog::level::from_str(env);
    if (parsed != spdlog::level::off || std::string(env) == "off") level = parsed;
  }
  spdlog::set_level(level);
}

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributed MPC rendezvous of follower quadrotors on a moving landing platform"};
  app.require_subcommand(1);

  Source vsrc;
  auto* validate = app.add_subcommand("validate", "Check a scenario without running it");
  add_source(validate, vsrc);

  Source rsrc;
  std::string out_dir = "run";
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<int> threads;
  bool plot_data = false;
  auto* run = app.add_subcommand("run", "Run a scenario and write its artifacts");
  add_source(run, rsrc);
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--steps", steps, "Override the step cap")->check(CLI::PositiveNumber);
  run->add_option("--threads", threads, "Solver threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  run->add_flag("--plot-data", plot_data, "Also write plot_top.csv and plot_3d.csv");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize the artifacts of a run");
  report->add_option("--out,dir", report_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*validate) {
      const ScenarioConfig cfg = load_source(vsrc);
      const ValidationReport rep = validate_config(cfg);
      for (const std::string& e : rep.errors) err << "error: " << e << '\n';
      for (const std::string& a : rep.advisories) out << "advisory: " << a << '\n';
      out << (rep.ok() ? "ok" : "invalid") << '\n';
      return rep.ok() ? 0 : 1;
    }
    if (*run) {
      ScenarioConfig cfg = load_source(rsrc);
      if (seed) cfg.seed = *seed;
      if (steps) cfg.step_cap = *steps;
      if (threads) cfg.threads = *threads;
      const ValidationReport rep = validate_config(cfg);
      if (!rep.ok()) {
        for (const std::string& e : rep.errors) err << "error: " << e << '\n';
        return 1;
      }
      spdlog::info("running '{}' with M={} N={} cap={}", cfg.name, cfg.followers.count, cfg.horizon,
                   cfg.step_cap);
      const RunResult result = run_scenario(cfg, [](const StepRecord& s) {
        spdlog::info("t={} latched {}/{} lambda_max={:.4f} min h_C={:.4f} min h_ij={:.4f}", s.t,
                     s.latched_count, static_cast<int>(s.agents.size()) - 1, s.lambda_max, s.min_h_C,
                     s.min_pairwise);
      });
      const RunOutcome outcome = write_run_artifacts(out_dir, cfg, result, plot_data);
      out << "outcome: " << to_string(outcome) << " after " << result.steps.size() << " steps ("
          << result.wall_seconds << " s), artifacts in " << out_dir << '\n';
      return exit_code(outcome);
    }
    if (*report) {
      out << render_report(report_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace dmpc
