#include "procbus/ptp.hpp"

#include <cmath>
#include <cstdio>

namespace procbus {

std::vector<uint8_t> encode_ptp(const PtpMessage& msg, const Mac& src) {
  std::vector<uint8_t> out;
  out.reserve(kPtpFrameSize);
  out.insert(out.end(), kPtpMulticast.begin(), kPtpMulticast.end());
  out.insert(out.end(), src.begin(), src.end());
  be::put_u16(out, kEthertypePtp);
  out.push_back(uint8_t(msg.msg_type));
  out.push_back(msg.priority);
  out.insert(out.end(), msg.grandmaster_id.begin(), msg.grandmaster_id.end());
  be::put_u16(out, msg.seq);
  be::put_u64(out, msg.origin_timestamp_us);
  return out;
}

bool decode_ptp(std::span<const uint8_t> bytes, PtpMessage& out) {
  if (bytes.size() != kPtpFrameSize) return false;
  const uint8_t* p = bytes.data();
  if (be::get_u16(p + 12) != kEthertypePtp) return false;
  if (p[14] > uint8_t(PtpMsgType::Sync)) return false;
  out.msg_type = PtpMsgType(p[14]);
  out.priority = p[15];
  std::copy(p + 16, p + 24, out.grandmaster_id.begin());
  out.seq = be::get_u16(p + 24);
  out.origin_timestamp_us = be::get_u64(p + 26);
  return true;
}

std::optional<GmId> parse_gm_id(const std::string& text) {
  GmId id{};
  unsigned v[8];
  if (std::sscanf(text.c_str(), "%x:%x:%x:%x:%x:%x:%x:%x",
                  &v[0], &v[1], &v[2], &v[3], &v[4], &v[5], &v[6], &v[7]) != 8)
    return std::nullopt;
  for (int i = 0; i < 8; ++i) {
    if (v[i] > 0xFF) return std::nullopt;
    id[i] = uint8_t(v[i]);
  }
  return id;
}

std::string gm_id_to_string(const GmId& id) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%02x:%02x:%02x:%02x:%02x:%02x:%02x:%02x",
                id[0], id[1], id[2], id[3], id[4], id[5], id[6], id[7]);
  return buf;
}

// ---------------------------------------------------------------------------

namespace {
uint64_t to_us(double seconds) { return uint64_t(std::llround(seconds * 1e6)); }
}  // namespace

Grandmaster::Grandmaster(Fabric& fabric, PortId port, GmConfig config, EventLog* log)
    : fabric_(fabric), port_(port), config_(config), log_(log) {}

void Grandmaster::start(uint64_t t0_us) {
  last_sync_emit_us_ = t0_us;
  last_announce_emit_us_ = t0_us;
  schedule_sync(t0_us + to_us(config_.sync_interval_s));
  schedule_announce(t0_us + to_us(config_.announce_interval_s));
}

void Grandmaster::schedule_sync(uint64_t at_us) {
  const uint64_t gen = sync_generation_;
  fabric_.schedule(at_us, [this, gen, at_us]() {
    if (gen != sync_generation_) return;  // interval was reconfigured
    emit_sync(at_us);
    schedule_sync(at_us + to_us(config_.sync_interval_s));
  });
}

void Grandmaster::schedule_announce(uint64_t at_us) {
  const uint64_t gen = announce_generation_;
  fabric_.schedule(at_us, [this, gen, at_us]() {
    if (gen != announce_generation_) return;
    emit_announce(at_us);
    schedule_announce(at_us + to_us(config_.announce_interval_s));
  });
}

void Grandmaster::set_sync_interval(double seconds) {
  config_.sync_interval_s = seconds;
  ++sync_generation_;
  uint64_t next = last_sync_emit_us_ + to_us(seconds);
  if (next < fabric_.now()) next = fabric_.now();
  schedule_sync(next);
  if (log_)
    log_->record(fabric_.now(), "gm", "sync_interval_set", {{"interval_s", seconds}});
}

void Grandmaster::set_announce_interval(double seconds) {
  config_.announce_interval_s = seconds;
  ++announce_generation_;
  uint64_t next = last_announce_emit_us_ + to_us(seconds);
  if (next < fabric_.now()) next = fabric_.now();
  schedule_announce(next);
}

PtpMessage Grandmaster::emit_sync(uint64_t t_us) {
  PtpMessage msg{PtpMsgType::Sync, config_.gm_id, config_.priority, sync_seq_++, t_us};
  last_sync_emit_us_ = t_us;
  Mac src = {0x02, 0x00, 0x00, 0x00, 0x00, 0xC1};
  fabric_.send(encode_ptp(msg, src), port_, t_us);
  return msg;
}

PtpMessage Grandmaster::emit_announce(uint64_t t_us) {
  PtpMessage msg{PtpMsgType::Announce, config_.gm_id, config_.priority, announce_seq_++, t_us};
  last_announce_emit_us_ = t_us;
  Mac src = {0x02, 0x00, 0x00, 0x00, 0x00, 0xC1};
  fabric_.send(encode_ptp(msg, src), port_, t_us);
  return msg;
}

// ---------------------------------------------------------------------------

namespace {
uint64_t timeout_window_us(const PtpClientConfig& config) {
  return to_us(config.expected_sync_interval_s) * uint64_t(config.timeout_multiplier);
}
}  // namespace

PtpClientState client_on_message(PtpClientState state, const PtpClientConfig& config,
                                 const PtpMessage& msg, uint64_t t_us) {
  if (msg.msg_type == PtpMsgType::Announce) {
    if (!state.selected_master) {
      state.selected_master = msg.grandmaster_id;
      state.selected_priority = msg.priority;
    } else if (*state.selected_master == msg.grandmaster_id) {
      state.selected_priority = msg.priority;
    } else if (msg.priority <= state.selected_priority) {
      // Conflicting equal-or-better master: fail safe, do not switch.
      state.conflict_flag = true;
      state.last_conflict_us = t_us;
      state.status = SyncStatus::Unsynced;
    }
    // Announces from worse masters are ignored.
    return state;
  }

  // Sync
  if (!state.selected_master || !(*state.selected_master == msg.grandmaster_id))
    return state;
  state.has_sync = true;
  state.last_sync_us = t_us;
  if (state.conflict_flag) {
    // The conflict must have been quiet for a full timeout window before a
    // sync is trusted again.
    if (t_us - state.last_conflict_us > timeout_window_us(config))
      state.conflict_flag = false;
  }
  if (!state.conflict_flag) state.status = SyncStatus::Synced;
  return state;
}

PtpClientState client_check_timeout(PtpClientState state, const PtpClientConfig& config,
                                    uint64_t t_us) {
  if (!state.has_sync) {
    state.status = SyncStatus::Unsynced;
    return state;
  }
  if (t_us > state.last_sync_us &&
      t_us - state.last_sync_us > timeout_window_us(config))
    state.status = SyncStatus::Unsynced;
  return state;
}

void PtpClient::on_message(const PtpMessage& msg, uint64_t t_us) {
  const SyncStatus before = state_.status;
  state_ = client_on_message(state_, config_, msg, t_us);
  log_transition(before, t_us, state_.conflict_flag ? "conflicting_master" : "sync");
}

SyncStatus PtpClient::status_at(uint64_t t_us) {
  const SyncStatus before = state_.status;
  state_ = client_check_timeout(state_, config_, t_us);
  log_transition(before, t_us, "sync_timeout");
  return state_.status;
}

void PtpClient::force_synced(uint64_t t_us, const GmId& master, uint8_t priority) {
  state_.selected_master = master;
  state_.selected_priority = priority;
  state_.has_sync = true;
  state_.last_sync_us = t_us;
  state_.conflict_flag = false;
  state_.status = SyncStatus::Synced;
}

void PtpClient::log_transition(SyncStatus before, uint64_t t_us, const char* cause) {
  if (!log_ || before == state_.status) return;
  log_->record(t_us, name_, "ptp_status",
               {{"status", state_.status == SyncStatus::Synced ? "SYNCED" : "UNSYNCED"},
                {"cause", cause}});
}

}  // namespace procbus
