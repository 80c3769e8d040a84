#include "procbus/relay.hpp"

#include <cmath>

namespace procbus {

const char* to_string(RelayEventKind kind) {
  switch (kind) {
    case RelayEventKind::Trip: return "TRIP";
    case RelayEventKind::Block: return "BLOCK";
    case RelayEventKind::Unblock: return "UNBLOCK";
    case RelayEventKind::Alarm: return "ALARM";
    case RelayEventKind::SyncLost: return "SYNC_LOST";
    case RelayEventKind::Normal: return "NORMAL";
  }
  return "?";
}

std::optional<RelayEventKind> relay_event_from_string(const std::string& text) {
  if (text == "TRIP") return RelayEventKind::Trip;
  if (text == "BLOCK") return RelayEventKind::Block;
  if (text == "UNBLOCK") return RelayEventKind::Unblock;
  if (text == "ALARM") return RelayEventKind::Alarm;
  if (text == "SYNC_LOST") return RelayEventKind::SyncLost;
  if (text == "NORMAL") return RelayEventKind::Normal;
  return std::nullopt;
}

FaultElement evaluate_elements(const std::array<double, 3>& i_rms,
                               const std::array<double, 3>& v_rms,
                               const RelaySettings& settings) {
  FaultElement el;
  for (int ph = 0; ph < 3; ++ph) {
    if (i_rms[ph] > settings.oc_pickup) el.overcurrent = true;
    if (i_rms[ph] > 0.5 * settings.oc_pickup &&
        v_rms[ph] / i_rms[ph] < settings.zone_reach)
      el.under_impedance = true;
  }
  el.picked_up = el.overcurrent || el.under_impedance;
  return el;
}

Relay::Relay(Fabric& fabric, PortId port, RelaySettings settings, std::string name,
             EventLog* log)
    : fabric_(fabric), port_(port), settings_(std::move(settings)),
      name_(std::move(name)), log_(log) {
  emit(RelayEventKind::Normal, fabric_.now(), "protection in service");
}

void Relay::emit(RelayEventKind kind, uint64_t t_us, std::string detail) {
  events_.push_back({t_us, kind, detail});
  if (log_)
    log_->record(t_us, name_, to_string(kind), {{"detail", std::move(detail)}});
}

std::optional<uint64_t> Relay::first_event_time(RelayEventKind kind) const {
  for (const auto& ev : events_)
    if (ev.kind == kind) return ev.t_us;
  return std::nullopt;
}

void Relay::block(uint64_t t_us, const std::string& reason) {
  clean_frames_ = 0;
  if (blocked_) return;
  blocked_ = true;
  emit(RelayEventKind::Block, t_us, reason);
}

void Relay::reset_measurements() {
  for (int ph = 0; ph < 3; ++ph) {
    i_win_[ph] = Window{};
    v_win_[ph] = Window{};
  }
  persist_count_ = 0;
  element_active_ = false;
}

void Relay::on_frame(const FrameEnvelope& env) {
  if (env.bytes.size() >= 14) {
    const uint16_t ethertype = be::get_u16(env.bytes.data() + 12);
    if (ethertype == kEthertypePtp && ptp_client_) {
      PtpMessage msg;
      if (decode_ptp(env.bytes, msg)) ptp_client_->on_message(msg, env.timestamp_us);
      return;
    }
    if (ethertype != kEthertypeSv) return;
  }

  SvFrame frame;
  const SvDecodeStatus status = decode_sv(env.bytes, frame);
  if (status != SvDecodeStatus::Ok) {
    ++undecodable_;
    return;
  }
  on_sv_frame(frame, env.timestamp_us);
}

void Relay::on_sv_frame(const SvFrame& frame, uint64_t t_us) {
  if (frame.asdu.sv_id != settings_.subscribed_sv_id) return;

  if (trace_enabled_) {
    TracePoint p;
    p.t_us = t_us;
    for (int ph = 0; ph < 3; ++ph) {
      p.i[ph] = dequantize(frame.asdu.channels[ph].value, settings_.scale.current_scale);
      p.v[ph] = dequantize(frame.asdu.channels[4 + ph].value, settings_.scale.voltage_scale);
    }
    trace_.push_back(p);
  }

  // Two frames with the same counter must carry the same payload; anything
  // else means a second publisher is using this stream's identity.
  bool conflict = false;
  for (const auto& seen : registry_) {
    if (seen.smp_cnt == frame.asdu.smp_cnt && seen.channels != frame.asdu.channels) {
      conflict = true;
      break;
    }
  }
  registry_.push_back({frame.asdu.smp_cnt, frame.asdu.channels});
  while (registry_.size() > size_t(settings_.consistency_window)) registry_.pop_front();

  if (conflict) {
    if (!blocked_)
      emit(RelayEventKind::Alarm, t_us,
           "conflicting stream: duplicate smpCnt " + std::to_string(frame.asdu.smp_cnt) +
               " with different values");
    block(t_us, "conflicting sv streams");
    decide(t_us);
    return;
  }

  if (frame.asdu.smp_synch != SmpSynch::Global) {
    if (!sync_lost_latched_) {
      sync_lost_latched_ = true;
      emit(RelayEventKind::SyncLost, t_us,
           std::string("smpSynch=") + to_string(frame.asdu.smp_synch));
    }
    block(t_us, "sv stream not globally synchronized");
    decide(t_us);
    return;
  }
  sync_lost_latched_ = false;

  if (blocked_) {
    ++clean_frames_;
    if (clean_frames_ >= settings_.consistency_window) {
      blocked_ = false;
      clean_frames_ = 0;
      reset_measurements();
      emit(RelayEventKind::Unblock, t_us, "stream consistent and synchronized");
    } else {
      decide(t_us);
      return;
    }
  }

  apply_measurement(frame);
  decide(t_us);
}

void Relay::apply_measurement(const SvFrame& frame) {
  const size_t cap = size_t(settings_.window);
  for (int ph = 0; ph < 3; ++ph) {
    const double i = dequantize(frame.asdu.channels[ph].value, settings_.scale.current_scale);
    const double v = dequantize(frame.asdu.channels[4 + ph].value, settings_.scale.voltage_scale);
    auto push = [cap](Window& w, double x) {
      w.samples.push_back(x);
      w.sum_sq += x * x;
      if (w.samples.size() > cap) {
        const double old = w.samples.front();
        w.samples.pop_front();
        w.sum_sq -= old * old;
      }
    };
    push(i_win_[ph], i);
    push(v_win_[ph], v);
  }

  if (i_win_[0].samples.size() < cap) return;  // window not yet full

  std::array<double, 3> i_rms{}, v_rms{};
  for (int ph = 0; ph < 3; ++ph) {
    i_rms[ph] = std::sqrt(std::max(i_win_[ph].sum_sq, 0.0) / double(cap));
    v_rms[ph] = std::sqrt(std::max(v_win_[ph].sum_sq, 0.0) / double(cap));
  }
  element_active_ = evaluate_elements(i_rms, v_rms, settings_).picked_up;
  persist_count_ = element_active_ ? persist_count_ + 1 : 0;
}

void Relay::send_permissive_if_due(uint64_t t_us) {
  if (!settings_.teleprotection.enabled || !permissive_sender_) return;
  const bool asserting = persist_count_ >= settings_.persist_samples && !blocked_;
  if (!asserting) {
    permissive_sending_ = false;
    return;
  }
  // Refresh at half the hold time so the far-end latch never gaps.
  if (!permissive_sending_ ||
      t_us >= last_permissive_sent_us_ + settings_.teleprotection.hold_us / 2) {
    permissive_sending_ = true;
    last_permissive_sent_us_ = t_us;
    if (log_) log_->record(t_us, name_, "teleprotection_send", {});
    permissive_sender_(t_us);
  }
}

void Relay::set_permissive_sender(std::function<void(uint64_t)> sender) {
  permissive_sender_ = std::move(sender);
}

void Relay::on_mu_binary(bool flag, uint64_t t_us) {
  if (flag == mu_binary_) return;
  mu_binary_ = flag;
  if (log_) log_->record(t_us, name_, "mu_binary", {{"flag", flag}});
  decide(t_us);
}

void Relay::on_teleprotection_permissive(uint64_t t_us) {
  permissive_until_ = t_us + settings_.teleprotection.hold_us;
  if (log_)
    log_->record(t_us, name_, "teleprotection_receive",
                 {{"hold_until_us", permissive_until_}});
  decide(t_us);
}

void Relay::decide(uint64_t t_us) {
  send_permissive_if_due(t_us);
  if (tripped_) return;

  const bool sv_fault = persist_count_ >= settings_.persist_samples && !blocked_;

  bool trip = false;
  std::string path;
  if (!settings_.resilience_mode) {
    trip = sv_fault;
    path = "sv";
  } else {
    // Dual validation: the trusted MU contact must agree, and either the
    // local SV measurement or the remote end must confirm the fault.
    if (mu_binary_) {
      if (sv_fault) {
        trip = true;
        path = "mu_binary+sv";
      } else if (permissive_active(t_us)) {
        trip = true;
        path = "mu_binary+teleprotection";
      }
    }
  }

  if (!trip) return;
  tripped_ = true;
  emit(RelayEventKind::Trip, t_us, "via " + path);
  if (log_)
    log_->record(t_us, name_, "trip_state",
                 {{"mu_binary", mu_binary_}, {"blocked", blocked_}, {"path", path}});
  if (trip_cb_) trip_cb_(t_us);
}

}  // namespace procbus
