#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "procbus/bytes.hpp"
#include "procbus/event_log.hpp"
#include "procbus/fabric.hpp"
#include "procbus/sv_codec.hpp"

namespace procbus {

// Reduced PTP model: announce/sync carrying grandmaster identity and
// priority. Clients track sync freshness and conflicting masters; no clock
// offset is applied, only the sync status propagates.

using GmId = std::array<uint8_t, 8>;

constexpr Mac kPtpMulticast = {0x01, 0x1B, 0x19, 0x00, 0x00, 0x00};

enum class PtpMsgType : uint8_t { Announce = 0, Sync = 1 };

struct PtpMessage {
  PtpMsgType msg_type = PtpMsgType::Sync;
  GmId grandmaster_id{};
  uint8_t priority = 128;  // lower wins
  uint16_t seq = 0;
  uint64_t origin_timestamp_us = 0;
  bool operator==(const PtpMessage&) const = default;
};

constexpr size_t kPtpFrameSize = 34;

std::vector<uint8_t> encode_ptp(const PtpMessage& msg, const Mac& src);
bool decode_ptp(std::span<const uint8_t> bytes, PtpMessage& out);

std::optional<GmId> parse_gm_id(const std::string& text);
std::string gm_id_to_string(const GmId& id);

// ---------------------------------------------------------------------------
// Grandmaster

struct GmConfig {
  double sync_interval_s = 1.0;
  double announce_interval_s = 2.0;
  GmId gm_id = {0x00, 0x1B, 0x19, 0xFF, 0xFE, 0x00, 0x00, 0x01};
  uint8_t priority = 128;
};

class Grandmaster {
 public:
  Grandmaster(Fabric& fabric, PortId port, GmConfig config, EventLog* log = nullptr);

  // Schedules the first emissions one interval from t0 (a client that was
  // synced at t0 sees an uninterrupted cadence).
  void start(uint64_t t0_us);

  // Reconfiguring reschedules the next emission from the last one; a
  // throttled interval starves clients until restored.
  void set_sync_interval(double seconds);
  void set_announce_interval(double seconds);

  PtpMessage emit_sync(uint64_t t_us);
  PtpMessage emit_announce(uint64_t t_us);

  const GmConfig& config() const { return config_; }

 private:
  void schedule_sync(uint64_t at_us);
  void schedule_announce(uint64_t at_us);

  Fabric& fabric_;
  PortId port_;
  GmConfig config_;
  EventLog* log_;
  uint16_t sync_seq_ = 0;
  uint16_t announce_seq_ = 0;
  uint64_t last_sync_emit_us_ = 0;
  uint64_t last_announce_emit_us_ = 0;
  uint64_t sync_generation_ = 0;      // invalidates pending emissions
  uint64_t announce_generation_ = 0;
};

// ---------------------------------------------------------------------------
// Client state machine

enum class SyncStatus { Synced, Unsynced };

struct PtpClientConfig {
  double expected_sync_interval_s = 1.0;
  int timeout_multiplier = 3;
};

struct PtpClientState {
  SyncStatus status = SyncStatus::Unsynced;
  std::optional<GmId> selected_master;
  uint8_t selected_priority = 255;
  bool has_sync = false;
  uint64_t last_sync_us = 0;
  bool conflict_flag = false;
  uint64_t last_conflict_us = 0;
};

// Pure transition functions; the PtpClient wrapper below adds logging.
PtpClientState client_on_message(PtpClientState state, const PtpClientConfig& config,
                                 const PtpMessage& msg, uint64_t t_us);
PtpClientState client_check_timeout(PtpClientState state, const PtpClientConfig& config,
                                    uint64_t t_us);

class PtpClient {
 public:
  PtpClient(PtpClientConfig config, std::string name, EventLog* log = nullptr)
      : config_(config), name_(std::move(name)), log_(log) {}

  void on_message(const PtpMessage& msg, uint64_t t_us);

  // Applies the timeout rule before reporting.
  SyncStatus status_at(uint64_t t_us);

  // Steady-state initialization: already locked to a master at t_us.
  void force_synced(uint64_t t_us, const GmId& master, uint8_t priority);

  const PtpClientState& state() const { return state_; }
  const PtpClientConfig& config() const { return config_; }

 private:
  void log_transition(SyncStatus before, uint64_t t_us, const char* cause);

  PtpClientConfig config_;
  std::string name_;
  EventLog* log_;
  PtpClientState state_;
};

}  // namespace procbus
