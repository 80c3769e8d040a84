#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "procbus/attack.hpp"
#include "procbus/event_log.hpp"
#include "procbus/fabric.hpp"
#include "procbus/merging_unit.hpp"
#include "procbus/ptp.hpp"
#include "procbus/relay.hpp"
#include "procbus/waveform.hpp"

namespace procbus {

// Declarative description of one run. JSON field reference:
// docs/scenario-config.md; bundled examples under scenarios/.

struct Expectation {
  RelayEventKind event = RelayEventKind::Trip;
  bool must_occur = true;
  std::optional<double> not_before_s;
  std::optional<double> deadline_s;
};

struct AttackSection {
  enum class Type { None, Force, Masquerade, Replay, Ptp };
  Type type = Type::None;
  double onset_s = 0.0;
  std::optional<double> end_s;

  // force
  double target_current_peak_a = 22.0;
  double target_voltage_peak_v = 5.0;
  int ramp_frames = 0;

  // masquerade
  double i_max_a = 1.0;
  double v_min_v = 40.0;
  int baseline_capacity = 80;

  // replay
  double replay_rate_s = 0.02;
  int replay_len = 8;
  double value_scale = 1.25;

  // ptp
  PtpAttackParams::Mode ptp_mode = PtpAttackParams::Mode::Throttle;
  double throttle_interval_s = 10.0;
  double inject_rate_s = 0.5;
  int inject_len = 2;
  uint8_t forged_priority = 0;
  GmId forged_master_id = {0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x99};
};

struct RelaySection {
  double oc_pickup = 2.0;
  double uv_threshold = 30.0;
  double zone_reach = 10.0;
  int window = 80;
  int persist_samples = 80;
  int consistency_window = 8;
  double teleprotection_delay_ms = 5.0;
  double teleprotection_hold_ms = 100.0;
};

struct MuSection {
  std::string sv_id = "MU01";
  uint16_t appid = 0x4000;
  double binary_overcurrent_rms = 1.0;
  double binary_undervoltage_rms = 30.0;
  int binary_window = 80;
  double binary_delay_ms = 0.5;
  bool reset_smp_cnt_on_sync_loss = false;
};

struct PtpSection {
  double sync_interval_s = 1.0;
  double announce_interval_s = 2.0;
  int timeout_multiplier = 3;
};

struct ScenarioConfig {
  std::string name = "scenario";
  uint64_t seed = 1;
  double duration_s = 2.0;
  bool resilience_mode = false;
  SystemParams system;
  FaultSpec fault;
  AttackSection attack;
  RelaySection relay;
  MuSection mu;
  PtpSection ptp;
  bool halt_fault_on_trip = false;
  double breaker_delay_ms = 40.0;
  std::vector<Expectation> expectations;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

// Parses with defaults; throws ConfigError listing every offending field.
ScenarioConfig parse_scenario_config(const Json& j);
ScenarioConfig load_scenario_config(const std::string& path);
std::vector<std::string> validate_config(const ScenarioConfig& config);
Json config_to_json(const ScenarioConfig& config);

// ---------------------------------------------------------------------------

struct ExpectationResult {
  Expectation expectation;
  bool pass = false;
  std::string note;
};

struct RunReport {
  std::string scenario;
  std::string mode;
  uint64_t seed = 1;
  bool pass = false;
  std::vector<ExpectationResult> expectations;
  std::optional<double> trip_time_s;
  std::optional<double> block_time_s;
  std::optional<double> trip_latency_s;   // from fault (or attack) onset
  std::optional<double> block_latency_s;  // from attack onset
  uint64_t frames_published = 0;
  uint64_t frames_delivered = 0;
  std::map<std::string, std::string> artifacts;
  Json to_json() const;
};

struct ExportOptions {
  bool jsonl = true;
  bool pcap = true;
  bool csv = true;
};

// Owns the full topology for one scenario on one virtual timeline.
class ScenarioRun {
 public:
  explicit ScenarioRun(ScenarioConfig config);
  ~ScenarioRun();

  void execute();

  const ScenarioConfig& config() const { return config_; }
  const EventLog& log() const { return log_; }
  Fabric& fabric() { return fabric_; }
  const Fabric& fabric() const { return fabric_; }
  const Relay& local_relay() const { return *relay_local_; }
  const MergingUnit& local_mu() const { return *mu_local_; }
  const Relay* remote_relay() const { return relay_remote_.get(); }

  RunReport evaluate() const;

  // Fills report.artifacts. Throws std::runtime_error on I/O failure.
  void write_artifacts(const std::string& out_dir, const ExportOptions& opts,
                       RunReport& report) const;

 private:
  void build();

  ScenarioConfig config_;
  EventLog log_;
  Fabric fabric_;

  WaveformSource wave_local_;
  WaveformSource wave_remote_;

  std::unique_ptr<Grandmaster> gm_;
  std::unique_ptr<PtpClient> mu_client_;
  std::unique_ptr<PtpClient> relay_client_;
  std::unique_ptr<MergingUnit> mu_local_;
  std::unique_ptr<Relay> relay_local_;
  std::unique_ptr<MergingUnit> mu_remote_;
  std::unique_ptr<Relay> relay_remote_;
  std::unique_ptr<ReplayAttacker> replay_attacker_;
  std::unique_ptr<PtpAttacker> ptp_attacker_;

  bool executed_ = false;
};

// Convenience wrappers used by the CLI.
RunReport run_scenario(const ScenarioConfig& config, const std::string& out_dir,
                       const ExportOptions& opts = {});

struct SuiteReport {
  std::vector<RunReport> runs;
  bool pass = false;
  Json to_json() const;
};

SuiteReport run_suite(const std::string& config_dir, const std::string& out_dir,
                      const std::optional<bool>& resilience_override = std::nullopt);

}  // namespace procbus
