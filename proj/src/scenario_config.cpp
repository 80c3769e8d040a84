#include "procbus/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace procbus {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string out = "invalid scenario config:";
  for (const auto& issue : issues) {
    out += "\n  - ";
    out += issue;
  }
  return out;
}

// Collects per-field problems instead of failing on the first one.
struct Reader {
  const Json& j;
  std::string prefix;
  std::vector<std::string>& issues;

  bool has(const char* key) const { return j.is_object() && j.contains(key); }

  template <typename T>
  T get(const char* key, T dflt) const {
    if (!has(key)) return dflt;
    try {
      return j.at(key).get<T>();
    } catch (const Json::exception&) {
      issues.push_back(prefix + key + ": wrong type");
      return dflt;
    }
  }

  Json section(const char* key) const {
    if (!has(key)) return Json::object();
    if (!j.at(key).is_object()) {
      issues.push_back(prefix + key + ": must be an object");
      return Json::object();
    }
    return j.at(key);
  }
};

FaultKind parse_fault_kind(const std::string& text, std::vector<std::string>& issues) {
  if (text == "none") return FaultKind::None;
  if (text == "three_phase") return FaultKind::ThreePhase;
  if (text == "single_line_ground") return FaultKind::SingleLineGround;
  issues.push_back("fault.kind: unknown kind '" + text + "'");
  return FaultKind::None;
}

Phase parse_phase(const std::string& text, std::vector<std::string>& issues) {
  if (text == "A" || text == "a") return Phase::A;
  if (text == "B" || text == "b") return Phase::B;
  if (text == "C" || text == "c") return Phase::C;
  issues.push_back("fault.faulted_phase: must be A, B or C");
  return Phase::A;
}

AttackSection::Type parse_attack_type(const std::string& text,
                                      std::vector<std::string>& issues) {
  if (text == "none") return AttackSection::Type::None;
  if (text == "force") return AttackSection::Type::Force;
  if (text == "masquerade") return AttackSection::Type::Masquerade;
  if (text == "replay") return AttackSection::Type::Replay;
  if (text == "ptp") return AttackSection::Type::Ptp;
  issues.push_back("attack.type: unknown type '" + text + "'");
  return AttackSection::Type::None;
}

PtpAttackParams::Mode parse_ptp_mode(const std::string& text,
                                     std::vector<std::string>& issues) {
  if (text == "throttle") return PtpAttackParams::Mode::Throttle;
  if (text == "inject") return PtpAttackParams::Mode::Inject;
  if (text == "both") return PtpAttackParams::Mode::Both;
  issues.push_back("attack.ptp_mode: unknown mode '" + text + "'");
  return PtpAttackParams::Mode::Throttle;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

ScenarioConfig parse_scenario_config(const Json& j) {
  std::vector<std::string> issues;
  ScenarioConfig cfg;

  Reader root{j, "", issues};
  cfg.name = root.get<std::string>("name", cfg.name);
  cfg.seed = root.get<uint64_t>("seed", cfg.seed);
  cfg.duration_s = root.get<double>("duration_s", cfg.duration_s);
  const std::string mode = root.get<std::string>("mode", "baseline");
  if (mode == "resilience")
    cfg.resilience_mode = true;
  else if (mode != "baseline")
    issues.push_back("mode: must be 'baseline' or 'resilience'");
  cfg.halt_fault_on_trip = root.get<bool>("halt_fault_on_trip", cfg.halt_fault_on_trip);
  cfg.breaker_delay_ms = root.get<double>("breaker_delay_ms", cfg.breaker_delay_ms);

  {
    Reader r{root.section("system"), "system.", issues};
    cfg.system.frequency = r.get<double>("frequency_hz", cfg.system.frequency);
    cfg.system.nominal_voltage_peak =
        r.get<double>("nominal_voltage_peak_v", cfg.system.nominal_voltage_peak);
    cfg.system.nominal_current_peak =
        r.get<double>("nominal_current_peak_a", cfg.system.nominal_current_peak);
    cfg.system.ct_ratio = r.get<double>("ct_ratio", cfg.system.ct_ratio);
    cfg.system.vt_ratio = r.get<double>("vt_ratio", cfg.system.vt_ratio);
    cfg.system.sample_rate = r.get<int>("sample_rate_hz", cfg.system.sample_rate);
  }

  {
    Reader r{root.section("fault"), "fault.", issues};
    cfg.fault.kind = parse_fault_kind(r.get<std::string>("kind", "none"), issues);
    cfg.fault.onset_s = r.get<double>("onset_s", cfg.fault.onset_s);
    if (r.has("clear_s")) cfg.fault.clear_s = r.get<double>("clear_s", cfg.fault.clear_s);
    cfg.fault.fault_resistance = r.get<double>("fault_resistance_ohm", cfg.fault.fault_resistance);
    cfg.fault.fault_current_peak =
        r.get<double>("fault_current_peak_a", cfg.fault.fault_current_peak);
    cfg.fault.fault_voltage_peak =
        r.get<double>("fault_voltage_peak_v", cfg.fault.fault_voltage_peak);
    if (r.has("faulted_phase"))
      cfg.fault.faulted_phase = parse_phase(r.get<std::string>("faulted_phase", "A"), issues);
    cfg.fault.dc_offset = r.get<bool>("dc_offset", cfg.fault.dc_offset);
    cfg.fault.dc_time_constant = r.get<double>("dc_time_constant_s", cfg.fault.dc_time_constant);
  }

  {
    Reader r{root.section("attack"), "attack.", issues};
    cfg.attack.type = parse_attack_type(r.get<std::string>("type", "none"), issues);
    cfg.attack.onset_s = r.get<double>("onset_s", cfg.attack.onset_s);
    if (r.has("end_s")) cfg.attack.end_s = r.get<double>("end_s", 0.0);
    cfg.attack.target_current_peak_a =
        r.get<double>("target_current_peak_a", cfg.attack.target_current_peak_a);
    cfg.attack.target_voltage_peak_v =
        r.get<double>("target_voltage_peak_v", cfg.attack.target_voltage_peak_v);
    cfg.attack.ramp_frames = r.get<int>("ramp_frames", cfg.attack.ramp_frames);
    cfg.attack.i_max_a = r.get<double>("i_max_a", cfg.attack.i_max_a);
    cfg.attack.v_min_v = r.get<double>("v_min_v", cfg.attack.v_min_v);
    cfg.attack.baseline_capacity = r.get<int>("baseline_capacity", cfg.attack.baseline_capacity);
    cfg.attack.replay_rate_s = r.get<double>("replay_rate_s", cfg.attack.replay_rate_s);
    cfg.attack.replay_len = r.get<int>("replay_len", cfg.attack.replay_len);
    cfg.attack.value_scale = r.get<double>("value_scale", cfg.attack.value_scale);
    cfg.attack.ptp_mode = parse_ptp_mode(r.get<std::string>("ptp_mode", "throttle"), issues);
    cfg.attack.throttle_interval_s =
        r.get<double>("throttle_interval_s", cfg.attack.throttle_interval_s);
    cfg.attack.inject_rate_s = r.get<double>("inject_rate_s", cfg.attack.inject_rate_s);
    cfg.attack.inject_len = r.get<int>("inject_len", cfg.attack.inject_len);
    cfg.attack.forged_priority = uint8_t(r.get<int>("forged_priority", cfg.attack.forged_priority));
    if (r.has("forged_master_id")) {
      const auto id = parse_gm_id(r.get<std::string>("forged_master_id", ""));
      if (id)
        cfg.attack.forged_master_id = *id;
      else
        issues.push_back("attack.forged_master_id: expected 8 hex octets aa:bb:...");
    }
  }

  {
    Reader r{root.section("relay"), "relay.", issues};
    cfg.relay.oc_pickup = r.get<double>("oc_pickup_a_rms", cfg.relay.oc_pickup);
    cfg.relay.uv_threshold = r.get<double>("uv_threshold_v_rms", cfg.relay.uv_threshold);
    cfg.relay.zone_reach = r.get<double>("zone_reach_ohm", cfg.relay.zone_reach);
    cfg.relay.window = r.get<int>("window_samples", cfg.relay.window);
    cfg.relay.persist_samples = r.get<int>("persist_samples", cfg.relay.persist_samples);
    cfg.relay.consistency_window =
        r.get<int>("consistency_window_frames", cfg.relay.consistency_window);
    cfg.relay.teleprotection_delay_ms =
        r.get<double>("teleprotection_delay_ms", cfg.relay.teleprotection_delay_ms);
    cfg.relay.teleprotection_hold_ms =
        r.get<double>("teleprotection_hold_ms", cfg.relay.teleprotection_hold_ms);
  }

  {
    Reader r{root.section("mu"), "mu.", issues};
    cfg.mu.sv_id = r.get<std::string>("sv_id", cfg.mu.sv_id);
    cfg.mu.appid = uint16_t(r.get<int>("appid", cfg.mu.appid));
    cfg.mu.binary_overcurrent_rms =
        r.get<double>("binary_overcurrent_a_rms", cfg.mu.binary_overcurrent_rms);
    cfg.mu.binary_undervoltage_rms =
        r.get<double>("binary_undervoltage_v_rms", cfg.mu.binary_undervoltage_rms);
    cfg.mu.binary_window = r.get<int>("binary_window_samples", cfg.mu.binary_window);
    cfg.mu.binary_delay_ms = r.get<double>("binary_delay_ms", cfg.mu.binary_delay_ms);
    cfg.mu.reset_smp_cnt_on_sync_loss =
        r.get<bool>("reset_smp_cnt_on_sync_loss", cfg.mu.reset_smp_cnt_on_sync_loss);
  }

  {
    Reader r{root.section("ptp"), "ptp.", issues};
    cfg.ptp.sync_interval_s = r.get<double>("sync_interval_s", cfg.ptp.sync_interval_s);
    cfg.ptp.announce_interval_s =
        r.get<double>("announce_interval_s", cfg.ptp.announce_interval_s);
    cfg.ptp.timeout_multiplier = r.get<int>("timeout_multiplier", cfg.ptp.timeout_multiplier);
  }

  if (root.has("expectations")) {
    const Json& arr = j.at("expectations");
    if (!arr.is_array()) {
      issues.push_back("expectations: must be an array");
    } else {
      for (size_t idx = 0; idx < arr.size(); ++idx) {
        const std::string prefix = "expectations[" + std::to_string(idx) + "].";
        Reader r{arr[idx], prefix, issues};
        Expectation exp;
        const std::string kind = r.get<std::string>("event", "");
        const auto parsed = relay_event_from_string(kind);
        if (!parsed) {
          issues.push_back(prefix + "event: unknown kind '" + kind + "'");
          continue;
        }
        exp.event = *parsed;
        exp.must_occur = r.get<bool>("must_occur", true);
        if (r.has("not_before_s")) exp.not_before_s = r.get<double>("not_before_s", 0.0);
        if (r.has("deadline_s")) exp.deadline_s = r.get<double>("deadline_s", 0.0);
        cfg.expectations.push_back(exp);
      }
    }
  }

  for (const auto& issue : validate_config(cfg)) issues.push_back(issue);
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError({"cannot open config file: " + path});
  Json j;
  try {
    f >> j;
  } catch (const Json::exception& e) {
    throw ConfigError({path + ": " + e.what()});
  }
  return parse_scenario_config(j);
}

std::vector<std::string> validate_config(const ScenarioConfig& cfg) {
  std::vector<std::string> issues;

  if (cfg.duration_s <= 0) issues.push_back("duration_s: must be positive");

  if (cfg.system.frequency <= 0) issues.push_back("system.frequency_hz: must be positive");
  if (cfg.system.nominal_voltage_peak <= 0 || cfg.system.nominal_current_peak <= 0)
    issues.push_back("system: nominal peaks must be positive");
  if (cfg.system.ct_ratio <= 0 || cfg.system.vt_ratio <= 0)
    issues.push_back("system: transformer ratios must be positive");
  if (cfg.system.sample_rate <= 0) {
    issues.push_back("system.sample_rate_hz: must be positive");
  } else if (cfg.system.frequency > 0 &&
             std::fmod(double(cfg.system.sample_rate), cfg.system.frequency) != 0.0) {
    issues.push_back("system.sample_rate_hz: must be an integer multiple of frequency_hz");
  }

  if (cfg.fault.kind != FaultKind::None) {
    if (cfg.fault.onset_s >= cfg.fault.clear_s)
      issues.push_back("fault.onset_s: must be before fault.clear_s");
    if (cfg.fault.fault_current_peak <= cfg.system.nominal_current_peak)
      issues.push_back("fault.fault_current_peak_a: must exceed the nominal peak");
    if (cfg.fault.fault_voltage_peak >= cfg.system.nominal_voltage_peak)
      issues.push_back("fault.fault_voltage_peak_v: must be below the nominal peak");
    if (cfg.duration_s <= cfg.fault.onset_s)
      issues.push_back("duration_s: must exceed fault.onset_s");
  }

  if (cfg.attack.type != AttackSection::Type::None) {
    if (cfg.duration_s <= cfg.attack.onset_s)
      issues.push_back("duration_s: must exceed attack.onset_s");
    if (cfg.attack.end_s && *cfg.attack.end_s <= cfg.attack.onset_s)
      issues.push_back("attack.end_s: must be after attack.onset_s");
  }
  switch (cfg.attack.type) {
    case AttackSection::Type::Force:
      if (cfg.attack.ramp_frames < 0) issues.push_back("attack.ramp_frames: must be >= 0");
      if (cfg.attack.target_current_peak_a <= 0 || cfg.attack.target_voltage_peak_v <= 0)
        issues.push_back("attack: forged peaks must be positive");
      break;
    case AttackSection::Type::Masquerade:
      if (cfg.attack.i_max_a <= cfg.system.nominal_current_peak)
        issues.push_back("attack.i_max_a: must exceed the nominal current peak");
      if (cfg.attack.v_min_v >= cfg.system.nominal_voltage_peak)
        issues.push_back("attack.v_min_v: must be below the nominal voltage peak");
      if (cfg.attack.baseline_capacity < 1)
        issues.push_back("attack.baseline_capacity: must be >= 1");
      break;
    case AttackSection::Type::Replay:
      if (cfg.attack.replay_len < 1) issues.push_back("attack.replay_len: must be >= 1");
      if (cfg.attack.replay_rate_s <= 0)
        issues.push_back("attack.replay_rate_s: must be positive");
      break;
    case AttackSection::Type::Ptp:
      if (cfg.attack.ptp_mode != PtpAttackParams::Mode::Throttle) {
        if (cfg.attack.inject_len < 1) issues.push_back("attack.inject_len: must be >= 1");
        if (cfg.attack.inject_rate_s <= 0)
          issues.push_back("attack.inject_rate_s: must be positive");
        if (cfg.attack.forged_master_id == GmConfig{}.gm_id)
          issues.push_back("attack.forged_master_id: must differ from the legitimate GM");
      }
      if (cfg.attack.ptp_mode != PtpAttackParams::Mode::Inject &&
          cfg.attack.throttle_interval_s <= 0)
        issues.push_back("attack.throttle_interval_s: must be positive");
      break;
    case AttackSection::Type::None:
      break;
  }

  if (cfg.relay.oc_pickup <= cfg.system.nominal_current_peak / std::numbers::sqrt2)
    issues.push_back("relay.oc_pickup_a_rms: must exceed the nominal RMS current");
  if (cfg.relay.zone_reach <= 0) issues.push_back("relay.zone_reach_ohm: must be positive");
  if (cfg.relay.window < 1) issues.push_back("relay.window_samples: must be >= 1");
  if (cfg.relay.persist_samples < 1) issues.push_back("relay.persist_samples: must be >= 1");
  if (cfg.relay.consistency_window < 1)
    issues.push_back("relay.consistency_window_frames: must be >= 1");

  if (cfg.mu.sv_id.empty() || cfg.mu.sv_id.size() > kMaxSvIdLen)
    issues.push_back("mu.sv_id: must be 1..64 bytes");
  if (cfg.mu.binary_window < 1) issues.push_back("mu.binary_window_samples: must be >= 1");

  if (cfg.ptp.sync_interval_s <= 0 || cfg.ptp.announce_interval_s <= 0)
    issues.push_back("ptp: intervals must be positive");
  if (cfg.ptp.timeout_multiplier < 1)
    issues.push_back("ptp.timeout_multiplier: must be >= 1");

  for (size_t i = 0; i < cfg.expectations.size(); ++i) {
    const auto& exp = cfg.expectations[i];
    if (exp.not_before_s && exp.deadline_s && *exp.not_before_s > *exp.deadline_s)
      issues.push_back("expectations[" + std::to_string(i) +
                       "]: not_before_s must not exceed deadline_s");
  }

  return issues;
}

Json config_to_json(const ScenarioConfig& cfg) {
  Json j;
  j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  j["duration_s"] = cfg.duration_s;
  j["mode"] = cfg.resilience_mode ? "resilience" : "baseline";
  j["halt_fault_on_trip"] = cfg.halt_fault_on_trip;
  j["breaker_delay_ms"] = cfg.breaker_delay_ms;

  j["system"] = {{"frequency_hz", cfg.system.frequency},
                 {"nominal_voltage_peak_v", cfg.system.nominal_voltage_peak},
                 {"nominal_current_peak_a", cfg.system.nominal_current_peak},
                 {"ct_ratio", cfg.system.ct_ratio},
                 {"vt_ratio", cfg.system.vt_ratio},
                 {"sample_rate_hz", cfg.system.sample_rate}};

  Json fault;
  switch (cfg.fault.kind) {
    case FaultKind::None: fault["kind"] = "none"; break;
    case FaultKind::ThreePhase: fault["kind"] = "three_phase"; break;
    case FaultKind::SingleLineGround: fault["kind"] = "single_line_ground"; break;
  }
  fault["onset_s"] = cfg.fault.onset_s;
  if (std::isfinite(cfg.fault.clear_s)) fault["clear_s"] = cfg.fault.clear_s;
  fault["fault_resistance_ohm"] = cfg.fault.fault_resistance;
  fault["fault_current_peak_a"] = cfg.fault.fault_current_peak;
  fault["fault_voltage_peak_v"] = cfg.fault.fault_voltage_peak;
  fault["faulted_phase"] = std::string(1, char('A' + int(cfg.fault.faulted_phase)));
  j["fault"] = fault;

  Json attack;
  switch (cfg.attack.type) {
    case AttackSection::Type::None: attack["type"] = "none"; break;
    case AttackSection::Type::Force: attack["type"] = "force"; break;
    case AttackSection::Type::Masquerade: attack["type"] = "masquerade"; break;
    case AttackSection::Type::Replay: attack["type"] = "replay"; break;
    case AttackSection::Type::Ptp: attack["type"] = "ptp"; break;
  }
  attack["onset_s"] = cfg.attack.onset_s;
  if (cfg.attack.end_s) attack["end_s"] = *cfg.attack.end_s;
  switch (cfg.attack.type) {
    case AttackSection::Type::Force:
      attack["target_current_peak_a"] = cfg.attack.target_current_peak_a;
      attack["target_voltage_peak_v"] = cfg.attack.target_voltage_peak_v;
      attack["ramp_frames"] = cfg.attack.ramp_frames;
      break;
    case AttackSection::Type::Masquerade:
      attack["i_max_a"] = cfg.attack.i_max_a;
      attack["v_min_v"] = cfg.attack.v_min_v;
      attack["baseline_capacity"] = cfg.attack.baseline_capacity;
      break;
    case AttackSection::Type::Replay:
      attack["replay_rate_s"] = cfg.attack.replay_rate_s;
      attack["replay_len"] = cfg.attack.replay_len;
      attack["value_scale"] = cfg.attack.value_scale;
      break;
    case AttackSection::Type::Ptp:
      attack["ptp_mode"] = to_string(cfg.attack.ptp_mode);
      attack["throttle_interval_s"] = cfg.attack.throttle_interval_s;
      attack["inject_rate_s"] = cfg.attack.inject_rate_s;
      attack["inject_len"] = cfg.attack.inject_len;
      attack["forged_priority"] = cfg.attack.forged_priority;
      attack["forged_master_id"] = gm_id_to_string(cfg.attack.forged_master_id);
      break;
    case AttackSection::Type::None:
      break;
  }
  j["attack"] = attack;

  j["relay"] = {{"oc_pickup_a_rms", cfg.relay.oc_pickup},
                {"uv_threshold_v_rms", cfg.relay.uv_threshold},
                {"zone_reach_ohm", cfg.relay.zone_reach},
                {"window_samples", cfg.relay.window},
                {"persist_samples", cfg.relay.persist_samples},
                {"consistency_window_frames", cfg.relay.consistency_window},
                {"teleprotection_delay_ms", cfg.relay.teleprotection_delay_ms},
                {"teleprotection_hold_ms", cfg.relay.teleprotection_hold_ms}};

  j["mu"] = {{"sv_id", cfg.mu.sv_id},
             {"appid", cfg.mu.appid},
             {"binary_overcurrent_a_rms", cfg.mu.binary_overcurrent_rms},
             {"binary_undervoltage_v_rms", cfg.mu.binary_undervoltage_rms},
             {"binary_window_samples", cfg.mu.binary_window},
             {"binary_delay_ms", cfg.mu.binary_delay_ms},
             {"reset_smp_cnt_on_sync_loss", cfg.mu.reset_smp_cnt_on_sync_loss}};

  j["ptp"] = {{"sync_interval_s", cfg.ptp.sync_interval_s},
              {"announce_interval_s", cfg.ptp.announce_interval_s},
              {"timeout_multiplier", cfg.ptp.timeout_multiplier}};

  Json exps = Json::array();
  for (const auto& exp : cfg.expectations) {
    Json e;
    e["event"] = to_string(exp.event);
    e["must_occur"] = exp.must_occur;
    if (exp.not_before_s) e["not_before_s"] = *exp.not_before_s;
    if (exp.deadline_s) e["deadline_s"] = *exp.deadline_s;
    exps.push_back(e);
  }
  j["expectations"] = exps;
  return j;
}

}  // namespace procbus
