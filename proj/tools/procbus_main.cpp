// Scenario runner for the virtual process-bus testbed.
//
//   procbus run      --config <file> [--out-dir <dir>] [--mode m] [--seed n]
//   procbus suite    --dir <dir>     [--out-dir <dir>] [--mode m]
//   procbus export   --config <file> [--out-dir <dir>] [--formats csv,pcap,jsonl]
//   procbus validate --config <file>
//
// Exit codes: 0 all expectations met, 1 expectation failure, 2 config/IO error.

#include <cstdio>
#include <exception>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "procbus/scenario.hpp"

namespace {

std::optional<bool> parse_mode(const std::string& mode) {
  if (mode.empty()) return std::nullopt;
  if (mode == "baseline") return false;
  if (mode == "resilience") return true;
  throw procbus::ConfigError({"--mode: must be 'baseline' or 'resilience'"});
}

procbus::ExportOptions parse_formats(const std::string& formats) {
  if (formats.empty()) return {};
  procbus::ExportOptions opts{false, false, false};
  std::stringstream ss(formats);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "jsonl")
      opts.jsonl = true;
    else if (item == "pcap")
      opts.pcap = true;
    else if (item == "csv")
      opts.csv = true;
    else
      throw procbus::ConfigError({"--formats: unknown format '" + item + "'"});
  }
  return opts;
}

void print_report(const procbus::RunReport& report) {
  std::printf("%s [%s]: %s\n", report.scenario.c_str(), report.mode.c_str(),
              report.pass ? "PASS" : "FAIL");
  for (const auto& res : report.expectations)
    std::printf("  %s %-9s %s\n", res.pass ? "ok  " : "FAIL",
                to_string(res.expectation.event), res.note.c_str());
  if (report.trip_latency_s)
    std::printf("  trip latency: %.3f ms\n", *report.trip_latency_s * 1e3);
  if (report.block_latency_s)
    std::printf("  block latency: %.3f ms\n", *report.block_latency_s * 1e3);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IEC 61850 process-bus attack/resilience scenario runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string dir_path;
  std::string out_dir = "out";
  std::string mode;
  std::string formats;
  std::optional<uint64_t> seed;

  auto* run_cmd = app.add_subcommand("run", "Run one scenario config");
  run_cmd->add_option("--config", config_path, "Scenario config (JSON)")->required();
  run_cmd->add_option("--out-dir", out_dir, "Output directory");
  run_cmd->add_option("--mode", mode, "Override mode: baseline|resilience");
  run_cmd->add_option("--seed", seed, "Override seed");

  auto* suite_cmd = app.add_subcommand("suite", "Run every config in a directory");
  suite_cmd->add_option("--dir", dir_path, "Directory of scenario configs")->required();
  suite_cmd->add_option("--out-dir", out_dir, "Output directory");
  suite_cmd->add_option("--mode", mode, "Override mode for all configs");

  auto* export_cmd = app.add_subcommand("export", "Run and export selected artifacts");
  export_cmd->add_option("--config", config_path, "Scenario config (JSON)")->required();
  export_cmd->add_option("--out-dir", out_dir, "Output directory");
  export_cmd->add_option("--formats", formats, "Comma list: csv,pcap,jsonl (default all)");
  export_cmd->add_option("--mode", mode, "Override mode: baseline|resilience");
  export_cmd->add_option("--seed", seed, "Override seed");

  auto* validate_cmd = app.add_subcommand("validate", "Validate a scenario config");
  validate_cmd->add_option("--config", config_path, "Scenario config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate_cmd->parsed()) {
      procbus::load_scenario_config(config_path);
      std::printf("%s: OK\n", config_path.c_str());
      return 0;
    }

    const auto mode_override = parse_mode(mode);

    if (suite_cmd->parsed()) {
      const auto suite = procbus::run_suite(dir_path, out_dir, mode_override);
      for (const auto& report : suite.runs) print_report(report);
      std::printf("suite: %zu runs, %s\n", suite.runs.size(), suite.pass ? "PASS" : "FAIL");
      return suite.pass ? 0 : 1;
    }

    procbus::ScenarioConfig config = procbus::load_scenario_config(config_path);
    if (mode_override) config.resilience_mode = *mode_override;
    if (seed) config.seed = *seed;

    const auto opts = export_cmd->parsed() ? parse_formats(formats) : procbus::ExportOptions{};
    const auto report = procbus::run_scenario(config, out_dir, opts);
    print_report(report);
    return report.pass ? 0 : 1;
  } catch (const procbus::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
