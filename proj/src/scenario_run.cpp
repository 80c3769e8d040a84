#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "procbus/scenario.hpp"

namespace procbus {

namespace {

uint64_t to_us(double seconds) { return uint64_t(std::llround(seconds * 1e6)); }

std::string format_seconds(uint64_t t_us) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", double(t_us) * 1e-6);
  return buf;
}

bool write_csv(const std::string& path, const std::vector<AnalogSample>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) return false;
  f << "t_s,ia,ib,ic,va,vb,vc\n";
  char line[200];
  for (const auto& s : rows) {
    std::snprintf(line, sizeof(line), "%.9f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  s.t, s.i[0], s.i[1], s.i[2], s.v[0], s.v[1], s.v[2]);
    f << line;
  }
  return bool(f);
}

bool write_csv(const std::string& path, const std::vector<Relay::TracePoint>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) return false;
  f << "t_s,ia,ib,ic,va,vb,vc\n";
  char line[200];
  for (const auto& p : rows) {
    std::snprintf(line, sizeof(line), "%.9f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  double(p.t_us) * 1e-6, p.i[0], p.i[1], p.i[2], p.v[0], p.v[1], p.v[2]);
    f << line;
  }
  return bool(f);
}

}  // namespace

ScenarioRun::ScenarioRun(ScenarioConfig config)
    : config_(std::move(config)),
      fabric_(FabricConfig{}, &log_),
      wave_local_(config_.system, config_.fault),
      wave_remote_(config_.system, config_.fault) {}

ScenarioRun::~ScenarioRun() = default;

void ScenarioRun::build() {
  const GmConfig gm_config{config_.ptp.sync_interval_s, config_.ptp.announce_interval_s};
  const PtpClientConfig client_config{config_.ptp.sync_interval_s,
                                      config_.ptp.timeout_multiplier};

  const PortId mu_port = fabric_.attach("mu_local");
  const PortId relay_port = fabric_.attach("relay_local");
  const PortId gm_port = fabric_.attach("gm");
  fabric_.enable_capture(relay_port);

  gm_ = std::make_unique<Grandmaster>(fabric_, gm_port, gm_config, &log_);
  gm_->start(0);

  mu_client_ = std::make_unique<PtpClient>(client_config, "mu/" + config_.mu.sv_id + "/ptp", &log_);
  mu_client_->force_synced(0, gm_config.gm_id, gm_config.priority);
  relay_client_ = std::make_unique<PtpClient>(client_config, "relay_local/ptp", &log_);
  relay_client_->force_synced(0, gm_config.gm_id, gm_config.priority);

  RelaySettings settings;
  settings.subscribed_sv_id = config_.mu.sv_id;
  settings.oc_pickup = config_.relay.oc_pickup;
  settings.uv_threshold = config_.relay.uv_threshold;
  settings.zone_reach = config_.relay.zone_reach;
  settings.window = config_.relay.window;
  settings.persist_samples = config_.relay.persist_samples;
  settings.consistency_window = config_.relay.consistency_window;
  settings.resilience_mode = config_.resilience_mode;
  settings.teleprotection.enabled = config_.resilience_mode;
  settings.teleprotection.channel_delay_us = to_us(config_.relay.teleprotection_delay_ms * 1e-3);
  settings.teleprotection.hold_us = to_us(config_.relay.teleprotection_hold_ms * 1e-3);

  relay_local_ = std::make_unique<Relay>(fabric_, relay_port, settings, "relay_local", &log_);
  relay_local_->attach_ptp_client(relay_client_.get());
  relay_local_->enable_trace();
  relay_local_->set_trip_callback([this](uint64_t t_us) {
    log_.record(t_us, "runner", "trip_loopback",
                {{"halt_fault", config_.halt_fault_on_trip}});
    if (config_.halt_fault_on_trip) {
      const double clear_t = double(t_us) * 1e-6 + config_.breaker_delay_ms * 1e-3;
      wave_local_.clear_fault_at(clear_t);
      wave_remote_.clear_fault_at(clear_t);
    }
  });
  fabric_.set_receiver(relay_port,
                       [this](const FrameEnvelope& env) { relay_local_->on_frame(env); });

  MuConfig mu_config;
  mu_config.sv_id = config_.mu.sv_id;
  mu_config.appid = config_.mu.appid;
  mu_config.sample_rate = config_.system.sample_rate;
  mu_config.binary.overcurrent_rms = config_.mu.binary_overcurrent_rms;
  mu_config.binary.undervoltage_rms = config_.mu.binary_undervoltage_rms;
  mu_config.binary.window = config_.mu.binary_window;
  mu_config.binary.channel_delay_us = to_us(config_.mu.binary_delay_ms * 1e-3);
  mu_config.reset_smp_cnt_on_sync_loss = config_.mu.reset_smp_cnt_on_sync_loss;

  mu_local_ = std::make_unique<MergingUnit>(fabric_, mu_port, wave_local_, mu_config, &log_);
  mu_local_->attach_ptp_client(mu_client_.get());
  mu_local_->enable_trace();
  mu_local_->set_binary_listener(
      [this](bool flag, uint64_t t_us) { relay_local_->on_mu_binary(flag, t_us); });
  fabric_.set_receiver(mu_port, [this](const FrameEnvelope& env) {
    if (env.bytes.size() < 14) return;
    if (be::get_u16(env.bytes.data() + 12) != kEthertypePtp) return;
    PtpMessage msg;
    if (decode_ptp(env.bytes, msg)) mu_client_->on_message(msg, env.timestamp_us);
  });

  if (config_.resilience_mode) {
    // Opposite line end: an unattacked bay on its own time reference,
    // observing the same line fault and confirming it over the pilot
    // channel.
    const PortId mu_r_port = fabric_.attach("mu_remote");
    const PortId relay_r_port = fabric_.attach("relay_remote");

    MuConfig remote_mu_config = mu_config;
    remote_mu_config.sv_id = config_.mu.sv_id + "-RMT";
    remote_mu_config.appid = uint16_t(config_.mu.appid + 1);
    remote_mu_config.src_mac = {0x02, 0x00, 0x00, 0x00, 0x00, 0xA2};
    remote_mu_config.dst_mac[5] = uint8_t(remote_mu_config.dst_mac[5] + 1);

    RelaySettings remote_settings = settings;
    remote_settings.subscribed_sv_id = remote_mu_config.sv_id;
    remote_settings.resilience_mode = false;
    remote_settings.teleprotection.enabled = true;

    relay_remote_ =
        std::make_unique<Relay>(fabric_, relay_r_port, remote_settings, "relay_remote", &log_);
    fabric_.set_receiver(relay_r_port,
                         [this](const FrameEnvelope& env) { relay_remote_->on_frame(env); });
    relay_remote_->set_permissive_sender([this, remote_settings](uint64_t t_us) {
      const uint64_t at = t_us + remote_settings.teleprotection.channel_delay_us;
      fabric_.schedule(at, [this, at]() { relay_local_->on_teleprotection_permissive(at); });
    });

    mu_remote_ = std::make_unique<MergingUnit>(fabric_, mu_r_port, wave_remote_,
                                               remote_mu_config, &log_);
    mu_remote_->set_binary_listener(
        [this](bool flag, uint64_t t_us) { relay_remote_->on_mu_binary(flag, t_us); });
    mu_remote_->start(0);
  }

  const uint64_t attack_from = to_us(config_.attack.onset_s);
  const uint64_t attack_until = config_.attack.end_s
                                    ? to_us(*config_.attack.end_s)
                                    : std::numeric_limits<uint64_t>::max();
  const TargetMatch target{config_.mu.sv_id, config_.mu.appid};

  switch (config_.attack.type) {
    case AttackSection::Type::Force: {
      ForceParams params;
      const double i_scale =
          config_.attack.target_current_peak_a / config_.system.nominal_current_peak;
      const double v_scale =
          config_.attack.target_voltage_peak_v / config_.system.nominal_voltage_peak;
      for (int ch = 0; ch < kSvChannelCount; ++ch)
        params.scale[ch] = ch < 4 ? i_scale : v_scale;
      params.ramp = config_.attack.ramp_frames;
      params.target = target;
      params.active_from_us = attack_from;
      params.active_until_us = attack_until;
      fabric_.insert_tap(mu_port, relay_port, make_mitm_force(params, &log_));
      break;
    }
    case AttackSection::Type::Masquerade: {
      MasqueradeParams params;
      params.i_max = config_.attack.i_max_a;
      params.v_min = config_.attack.v_min_v;
      params.baseline_capacity = config_.attack.baseline_capacity;
      params.target = target;
      params.active_from_us = attack_from;
      params.active_until_us = attack_until;
      fabric_.insert_tap(mu_port, relay_port, make_mitm_masquerade(params, &log_));
      break;
    }
    case AttackSection::Type::Replay: {
      const PortId attacker_port = fabric_.attach("attacker");
      ReplayParams params;
      params.replay_rate_s = config_.attack.replay_rate_s;
      params.replay_len = config_.attack.replay_len;
      params.value_scale = config_.attack.value_scale;
      params.frame_spacing_us = 1000000ull / uint64_t(config_.system.sample_rate);
      params.target = target;
      params.active_from_us = attack_from;
      params.active_until_us = attack_until;
      replay_attacker_ = std::make_unique<ReplayAttacker>(fabric_, attacker_port, params, &log_);
      fabric_.set_receiver(attacker_port, [this](const FrameEnvelope& env) {
        replay_attacker_->on_frame(env);
      });
      replay_attacker_->start();
      break;
    }
    case AttackSection::Type::Ptp: {
      const PortId attacker_port = fabric_.attach("attacker");
      PtpAttackParams params;
      params.mode = config_.attack.ptp_mode;
      params.throttle_interval_s = config_.attack.throttle_interval_s;
      params.inject_rate_s = config_.attack.inject_rate_s;
      params.inject_len = config_.attack.inject_len;
      params.forged_master_id = config_.attack.forged_master_id;
      params.forged_priority = config_.attack.forged_priority;
      params.active_from_us = attack_from;
      params.active_until_us = attack_until;
      ptp_attacker_ =
          std::make_unique<PtpAttacker>(fabric_, attacker_port, params, gm_.get(), &log_);
      ptp_attacker_->start();
      break;
    }
    case AttackSection::Type::None:
      break;
  }

  mu_local_->start(0);
}

void ScenarioRun::execute() {
  if (executed_) return;
  build();
  fabric_.advance(to_us(config_.duration_s));
  executed_ = true;
}

RunReport ScenarioRun::evaluate() const {
  RunReport report;
  report.scenario = config_.name;
  report.mode = config_.resilience_mode ? "resilience" : "baseline";
  report.seed = config_.seed;
  report.frames_published = mu_local_->frames_published();
  report.frames_delivered = fabric_.frames_delivered();

  const auto& events = relay_local_->events();
  const uint64_t duration_us = to_us(config_.duration_s);

  report.pass = true;
  for (const auto& exp : config_.expectations) {
    const uint64_t from = exp.not_before_s ? to_us(*exp.not_before_s) : 0;
    const uint64_t until = exp.deadline_s ? std::min(to_us(*exp.deadline_s), duration_us)
                                          : duration_us;
    std::optional<uint64_t> first;
    for (const auto& ev : events) {
      if (ev.kind != exp.event || ev.t_us < from || ev.t_us > until) continue;
      first = ev.t_us;
      break;
    }
    ExpectationResult res;
    res.expectation = exp;
    if (exp.must_occur) {
      res.pass = first.has_value();
      res.note = first ? std::string(to_string(exp.event)) + " at " + format_seconds(*first) + " s"
                       : std::string("no ") + to_string(exp.event) + " in [" +
                             format_seconds(from) + ", " + format_seconds(until) + "] s";
    } else {
      res.pass = !first.has_value();
      res.note = first ? std::string(to_string(exp.event)) + " at " + format_seconds(*first) +
                             " s (must not occur)"
                       : std::string("no ") + to_string(exp.event) + " (as required)";
    }
    report.pass = report.pass && res.pass;
    report.expectations.push_back(std::move(res));
  }

  if (const auto trip = relay_local_->first_event_time(RelayEventKind::Trip)) {
    report.trip_time_s = double(*trip) * 1e-6;
    double ref = 0.0;
    if (config_.fault.kind != FaultKind::None)
      ref = config_.fault.onset_s;
    else if (config_.attack.type != AttackSection::Type::None)
      ref = config_.attack.onset_s;
    report.trip_latency_s = *report.trip_time_s - ref;
  }
  if (const auto block = relay_local_->first_event_time(RelayEventKind::Block)) {
    report.block_time_s = double(*block) * 1e-6;
    if (config_.attack.type != AttackSection::Type::None)
      report.block_latency_s = *report.block_time_s - config_.attack.onset_s;
  }
  return report;
}

void ScenarioRun::write_artifacts(const std::string& out_dir, const ExportOptions& opts,
                                  RunReport& report) const {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

  {
    std::ofstream f(path("config.json"), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path("config.json"));
    f << config_to_json(config_).dump(2) << '\n';
    report.artifacts["config"] = path("config.json");
  }
  if (opts.jsonl) {
    if (!log_.write(path("events.jsonl")))
      throw std::runtime_error("cannot write " + path("events.jsonl"));
    report.artifacts["events"] = path("events.jsonl");

    std::ofstream f(path("attack.jsonl"), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path("attack.jsonl"));
    for (const auto& entry : log_.entries())
      if (entry.source.rfind("attack", 0) == 0) f << to_jsonl_line(entry) << '\n';
    report.artifacts["attack_log"] = path("attack.jsonl");
  }
  if (opts.pcap) {
    if (!fabric_.capture().write(path("capture.pcap")))
      throw std::runtime_error("cannot write " + path("capture.pcap"));
    report.artifacts["pcap"] = path("capture.pcap");
  }
  if (opts.csv) {
    if (!write_csv(path("mu_waveform.csv"), mu_local_->trace()))
      throw std::runtime_error("cannot write " + path("mu_waveform.csv"));
    if (!write_csv(path("relay_waveform.csv"), relay_local_->trace()))
      throw std::runtime_error("cannot write " + path("relay_waveform.csv"));
    report.artifacts["mu_csv"] = path("mu_waveform.csv");
    report.artifacts["relay_csv"] = path("relay_waveform.csv");
  }
}

Json RunReport::to_json() const {
  Json j;
  j["scenario"] = scenario;
  j["mode"] = mode;
  j["seed"] = seed;
  j["pass"] = pass;
  Json exps = Json::array();
  for (const auto& res : expectations) {
    Json e;
    e["event"] = to_string(res.expectation.event);
    e["must_occur"] = res.expectation.must_occur;
    if (res.expectation.not_before_s) e["not_before_s"] = *res.expectation.not_before_s;
    if (res.expectation.deadline_s) e["deadline_s"] = *res.expectation.deadline_s;
    e["pass"] = res.pass;
    e["note"] = res.note;
    exps.push_back(e);
  }
  j["expectations"] = exps;
  if (trip_time_s) j["trip_time_s"] = *trip_time_s;
  if (trip_latency_s) j["trip_latency_s"] = *trip_latency_s;
  if (block_time_s) j["block_time_s"] = *block_time_s;
  if (block_latency_s) j["block_latency_s"] = *block_latency_s;
  j["frames_published"] = frames_published;
  j["frames_delivered"] = frames_delivered;
  Json arts = Json::object();
  for (const auto& [name, p] : artifacts) arts[name] = p;
  j["artifacts"] = arts;
  return j;
}

RunReport run_scenario(const ScenarioConfig& config, const std::string& out_dir,
                       const ExportOptions& opts) {
  ScenarioRun run(config);
  run.execute();
  RunReport report = run.evaluate();
  run.write_artifacts(out_dir, opts, report);

  const auto report_path = (std::filesystem::path(out_dir) / "report.json").string();
  std::ofstream f(report_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + report_path);
  report.artifacts["report"] = report_path;
  f << report.to_json().dump(2) << '\n';
  return report;
}

Json SuiteReport::to_json() const {
  Json j;
  j["pass"] = pass;
  Json arr = Json::array();
  for (const auto& run : runs) arr.push_back(run.to_json());
  j["runs"] = arr;
  return j;
}

SuiteReport run_suite(const std::string& config_dir, const std::string& out_dir,
                      const std::optional<bool>& resilience_override) {
  namespace fs = std::filesystem;
  std::vector<fs::path> configs;
  if (!fs::is_directory(config_dir))
    throw ConfigError({"not a directory: " + config_dir});
  for (const auto& entry : fs::directory_iterator(config_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      configs.push_back(entry.path());
  std::sort(configs.begin(), configs.end());
  if (configs.empty()) throw ConfigError({"no scenario configs in " + config_dir});

  SuiteReport suite;
  suite.pass = true;
  for (const auto& config_path : configs) {
    ScenarioConfig config = load_scenario_config(config_path.string());
    if (resilience_override) config.resilience_mode = *resilience_override;
    const auto run_dir = (fs::path(out_dir) / config_path.stem()).string();
    RunReport report = run_scenario(config, run_dir);
    suite.pass = suite.pass && report.pass;
    suite.runs.push_back(std::move(report));
  }

  fs::create_directories(out_dir);
  const auto suite_path = (fs::path(out_dir) / "suite_report.json").string();
  std::ofstream f(suite_path, std::ios::binary);
  if (f) f << suite.to_json().dump(2) << '\n';
  return suite;
}

}  // namespace procbus
