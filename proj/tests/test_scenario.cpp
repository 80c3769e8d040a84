#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "procbus/scenario.hpp"

using namespace procbus;

namespace {

const std::string kScenarioDir = PROCBUS_SCENARIO_DIR;

ScenarioConfig load(const std::string& name) {
  return load_scenario_config(kScenarioDir + "/" + name);
}

std::string temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("procbus_test_" + tag);
  std::filesystem::remove_all(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("config: bundled scenarios parse and validate") {
  for (const auto& entry : std::filesystem::directory_iterator(kScenarioDir))
    if (entry.path().extension() == ".json")
      CHECK_NOTHROW(load_scenario_config(entry.path().string()));
}

TEST_CASE("config: validation collects the offending fields") {
  Json j;
  j["name"] = "broken";
  j["duration_s"] = 0.3;
  j["fault"] = {{"kind", "three_phase"}, {"onset_s", 0.5}};
  j["attack"] = {{"type", "replay"}, {"onset_s", 0.4}, {"replay_len", 0}};

  try {
    parse_scenario_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    auto has = [&](const std::string& needle) {
      for (const auto& issue : e.issues())
        if (issue.find(needle) != std::string::npos) return true;
      return false;
    };
    CHECK(has("duration_s: must exceed fault.onset_s"));
    CHECK(has("duration_s: must exceed attack.onset_s"));
    CHECK(has("attack.replay_len"));
  }
}

TEST_CASE("config: more rejected shapes") {
  Json j;
  j["duration_s"] = 1.0;

  SUBCASE("unknown attack type") {
    j["attack"] = {{"type", "quantum"}};
    CHECK_THROWS_AS(parse_scenario_config(j), ConfigError);
  }
  SUBCASE("bad mode") {
    j["mode"] = "turbo";
    CHECK_THROWS_AS(parse_scenario_config(j), ConfigError);
  }
  SUBCASE("masquerade threshold below nominal") {
    j["attack"] = {{"type", "masquerade"}, {"i_max_a", 0.1}};
    CHECK_THROWS_AS(parse_scenario_config(j), ConfigError);
  }
  SUBCASE("forged master equal to the legitimate GM") {
    j["attack"] = {{"type", "ptp"},
                   {"ptp_mode", "inject"},
                   {"forged_master_id", "00:1b:19:ff:fe:00:00:01"}};
    CHECK_THROWS_AS(parse_scenario_config(j), ConfigError);
  }
  SUBCASE("oversized sv_id") {
    j["mu"] = {{"sv_id", std::string(65, 'x')}};
    CHECK_THROWS_AS(parse_scenario_config(j), ConfigError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_scenario_config("/nonexistent/nope.json"), ConfigError);
  }
}

TEST_CASE("config: round-trips through its JSON form") {
  const ScenarioConfig cfg = load("scenario3_replay_baseline.json");
  const ScenarioConfig again = parse_scenario_config(config_to_json(cfg));
  CHECK(again.name == cfg.name);
  CHECK(again.attack.replay_len == cfg.attack.replay_len);
  CHECK(again.fault.onset_s == cfg.fault.onset_s);
  CHECK(again.expectations.size() == cfg.expectations.size());
}

TEST_CASE("run: scenario 1 baseline trips and reports PASS") {
  ScenarioRun run(load("scenario1_force_baseline.json"));
  run.execute();
  const RunReport report = run.evaluate();
  CHECK(report.pass);
  REQUIRE(report.trip_time_s.has_value());
  CHECK(*report.trip_time_s > 0.5);
  CHECK(*report.trip_latency_s < 0.06);
  CHECK(run.local_relay().tripped());
}

TEST_CASE("run: scenario 2 baseline masks the fault end to end") {
  ScenarioRun run(load("scenario2_masquerade_baseline.json"));
  run.execute();
  const RunReport report = run.evaluate();
  CHECK(report.pass);
  CHECK_FALSE(report.trip_time_s.has_value());

  // MU-side trace carries the fault, relay-side trace stays nominal
  double mu_peak = 0, relay_peak = 0;
  for (const auto& s : run.local_mu().trace())
    if (s.t >= 0.6) mu_peak = std::max(mu_peak, std::abs(s.i[0]));
  for (const auto& p : run.local_relay().trace())
    if (p.t_us >= 600000) relay_peak = std::max(relay_peak, std::abs(p.i[0]));
  CHECK(mu_peak > 20.0);
  CHECK(relay_peak < 0.5);
}

TEST_CASE("run: scenario 1 export views are swapped relative to scenario 2") {
  ScenarioRun run(load("scenario1_force_baseline.json"));
  run.execute();
  double mu_peak = 0, relay_peak = 0;
  for (const auto& s : run.local_mu().trace())
    if (s.t >= 0.6) mu_peak = std::max(mu_peak, std::abs(s.i[0]));
  for (const auto& p : run.local_relay().trace())
    if (p.t_us >= 600000 && p.t_us <= 1400000)
      relay_peak = std::max(relay_peak, std::abs(p.i[0]));
  CHECK(mu_peak < 0.5);     // physically nominal
  CHECK(relay_peak > 21.0); // forged fault at the relay
}

TEST_CASE("run: no-attack run has identical views up to quantization") {
  ScenarioConfig cfg = load(std::string("extra") + "/noattack_nofault.json");
  ScenarioRun run(cfg);
  run.execute();
  const auto& mu_trace = run.local_mu().trace();
  const auto& relay_trace = run.local_relay().trace();
  REQUIRE(relay_trace.size() > 1000);
  ScaleConvention scale;
  for (size_t k = 0; k < relay_trace.size(); ++k) {
    // relay sees tick k delayed by the link latency
    REQUIRE(std::abs(relay_trace[k].i[0] - mu_trace[k].i[0]) <= scale.current_scale / 2);
    REQUIRE(std::abs(relay_trace[k].v[0] - mu_trace[k].v[0]) <= scale.voltage_scale / 2);
  }
}

TEST_CASE("run: determinism, same config gives byte-identical logs") {
  auto run_once = [](const char* name) {
    ScenarioRun run(load_scenario_config(kScenarioDir + "/" + name));
    run.execute();
    return run.log().to_jsonl();
  };
  for (const char* name :
       {"scenario1_force_baseline.json", "scenario3_replay_resilience.json",
        "scenario4_ptp_baseline.json"}) {
    CAPTURE(name);
    CHECK(run_once(name) == run_once(name));
  }
}

TEST_CASE("run: trip loop-back clears the fault when configured") {
  ScenarioConfig cfg = load(std::string("extra") + "/noattack_fault.json");
  cfg.halt_fault_on_trip = true;
  cfg.breaker_delay_ms = 40.0;
  ScenarioRun run(cfg);
  run.execute();
  REQUIRE(run.local_relay().tripped());
  const double trip_s = double(*run.local_relay().first_event_time(RelayEventKind::Trip)) * 1e-6;

  // fault current collapses one breaker delay after the trip
  double late_peak = 0;
  for (const auto& s : run.local_mu().trace())
    if (s.t > trip_s + 0.045) late_peak = std::max(late_peak, std::abs(s.i[0]));
  CHECK(late_peak < 0.5);
}

TEST_CASE("run_scenario: writes the full artifact set") {
  const std::string out = temp_dir("artifacts");
  const RunReport report = run_scenario(load("scenario1_force_baseline.json"), out);
  CHECK(report.pass);
  for (const char* name : {"config.json", "events.jsonl", "attack.jsonl", "capture.pcap",
                           "mu_waveform.csv", "relay_waveform.csv", "report.json"})
    CHECK(std::filesystem::exists(std::filesystem::path(out) / name));

  // report.json parses and agrees on the verdict
  std::ifstream f(std::filesystem::path(out) / "report.json");
  Json j;
  f >> j;
  CHECK(j["pass"] == true);
  CHECK(j["scenario"] == "scenario1_force_baseline");
}

TEST_CASE("run_suite: bundled directory yields eight passing reports") {
  const std::string out = temp_dir("suite");
  const SuiteReport suite = run_suite(kScenarioDir, out);
  CHECK(suite.runs.size() == 8);
  CHECK(suite.pass);
  CHECK(std::filesystem::exists(std::filesystem::path(out) / "suite_report.json"));

  // deterministic ordering by filename
  CHECK(suite.runs.front().scenario == "scenario1_force_baseline");
  CHECK(suite.runs.back().scenario == "scenario4_ptp_resilience");
}

TEST_CASE("run_suite: empty directory is an error") {
  const std::string out = temp_dir("empty");
  std::filesystem::create_directories(out + "/configs");
  CHECK_THROWS_AS(run_suite(out + "/configs", out + "/results"), ConfigError);
}

TEST_CASE("run_suite: mode override applies to every run") {
  const std::string out = temp_dir("override");
  std::filesystem::create_directories(out + "/configs");
  std::filesystem::copy_file(kScenarioDir + "/scenario1_force_baseline.json",
                             out + "/configs/s1.json");
  const SuiteReport suite = run_suite(out + "/configs", out + "/results", true);
  REQUIRE(suite.runs.size() == 1);
  CHECK(suite.runs[0].mode == "resilience");
  // in resilience mode the forged trip is suppressed, so the baseline
  // expectation (TRIP must occur) now fails
  CHECK_FALSE(suite.runs[0].pass);
}

TEST_CASE("run: an expectation failure is reported as FAIL") {
  ScenarioConfig cfg = load("scenario1_force_baseline.json");
  cfg.expectations.push_back({RelayEventKind::Unblock, true, 0.0, 1.0});
  ScenarioRun run(cfg);
  run.execute();
  const RunReport report = run.evaluate();
  CHECK_FALSE(report.pass);
}

TEST_CASE("run: conflicting-master injection blocks the relay too") {
  ScenarioConfig cfg = load("scenario4_ptp_baseline.json");
  cfg.attack.ptp_mode = PtpAttackParams::Mode::Inject;
  cfg.duration_s = 1.5;
  cfg.fault.kind = FaultKind::None;
  cfg.expectations.clear();

  ScenarioRun run(cfg);
  run.execute();
  const auto& relay = run.local_relay();
  const auto block = relay.first_event_time(RelayEventKind::Block);
  const auto sync_lost = relay.first_event_time(RelayEventKind::SyncLost);
  REQUIRE(block.has_value());
  REQUIRE(sync_lost.has_value());
  // first injected announce lands at the attack onset; the MU marks the
  // next frame NONE and the relay blocks on it
  CHECK(*block >= 500000);
  CHECK(*block <= 501000);
  CHECK_FALSE(relay.tripped());
}

TEST_CASE("run_suite: reports are identical across invocations modulo paths") {
  auto strip_paths = [](SuiteReport suite) {
    Json j = suite.to_json();
    for (auto& run : j["runs"]) run.erase("artifacts");
    return j.dump();
  };
  const std::string a = strip_paths(run_suite(kScenarioDir, temp_dir("suite_a")));
  const std::string b = strip_paths(run_suite(kScenarioDir, temp_dir("suite_b")));
  CHECK(a == b);
}

TEST_CASE("run: port count matches the configured topology") {
  // baseline force attack: MU + relay + GM, MitM is an inline tap (no port)
  ScenarioRun baseline(load("scenario1_force_baseline.json"));
  baseline.execute();
  CHECK(baseline.log().entries().size() > 0);
  size_t baseline_ports = 0;
  for (const auto& e : baseline.log().entries())
    if (e.source == "fabric" && e.kind == "attach") ++baseline_ports;
  CHECK(baseline_ports == 3);

  // resilience replay: local bay + GM + remote bay + attacker port
  ScenarioRun resilience(load("scenario3_replay_resilience.json"));
  resilience.execute();
  size_t resilience_ports = 0;
  for (const auto& e : resilience.log().entries())
    if (e.source == "fabric" && e.kind == "attach") ++resilience_ports;
  CHECK(resilience_ports == 6);
}
