#pragma once

#include <array>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "procbus/event_log.hpp"
#include "procbus/fabric.hpp"
#include "procbus/ptp.hpp"
#include "procbus/sv_codec.hpp"

namespace procbus {

enum class RelayEventKind { Trip, Block, Unblock, Alarm, SyncLost, Normal };

const char* to_string(RelayEventKind kind);
std::optional<RelayEventKind> relay_event_from_string(const std::string& text);

struct RelayEvent {
  uint64_t t_us = 0;
  RelayEventKind kind = RelayEventKind::Normal;
  std::string detail;
};

struct TeleprotectionConfig {
  bool enabled = false;
  uint64_t channel_delay_us = 5000;  // pilot channel, milliseconds range
  uint64_t hold_us = 100000;         // permissive latch at the receiver
};

struct RelaySettings {
  std::string subscribed_sv_id = "MU01";
  double oc_pickup = 2.0;      // A secondary RMS
  double uv_threshold = 30.0;  // V secondary RMS
  double zone_reach = 10.0;    // ohms secondary
  int window = 80;             // samples per measurement window
  int persist_samples = 80;    // element must hold one cycle before tripping
  int consistency_window = 8;  // frames kept for duplicate-count comparison
  bool resilience_mode = false;
  ScaleConvention scale;
  TeleprotectionConfig teleprotection;
};

struct FaultElement {
  bool picked_up = false;
  bool overcurrent = false;
  bool under_impedance = false;
};

// Overcurrent / under-impedance evaluation on per-phase RMS values. The
// impedance element is gated on half the overcurrent pickup so a dead
// window cannot look like a close-in fault.
FaultElement evaluate_elements(const std::array<double, 3>& i_rms,
                               const std::array<double, 3>& v_rms,
                               const RelaySettings& settings);

class Relay {
 public:
  Relay(Fabric& fabric, PortId port, RelaySettings settings, std::string name,
        EventLog* log = nullptr);

  // Fabric receive callback; dispatches SV and PTP ethertypes.
  void on_frame(const FrameEnvelope& env);
  void on_sv_frame(const SvFrame& frame, uint64_t t_us);

  // Trusted inputs (resilience mode).
  void on_mu_binary(bool flag, uint64_t t_us);
  void on_teleprotection_permissive(uint64_t t_us);

  // Outgoing permissive signalling; the runner wires this to the peer with
  // the channel delay applied.
  void set_permissive_sender(std::function<void(uint64_t)> sender);

  void set_trip_callback(std::function<void(uint64_t)> cb) { trip_cb_ = std::move(cb); }
  void attach_ptp_client(PtpClient* client) { ptp_client_ = client; }

  bool blocked() const { return blocked_; }
  bool tripped() const { return tripped_; }
  bool mu_binary() const { return mu_binary_; }
  uint64_t undecodable_frames() const { return undecodable_; }
  const std::vector<RelayEvent>& events() const { return events_; }
  std::optional<uint64_t> first_event_time(RelayEventKind kind) const;

  // Dequantized phase measurements as received, for waveform export.
  struct TracePoint {
    uint64_t t_us;
    std::array<double, 3> i;
    std::array<double, 3> v;
  };
  void enable_trace() { trace_enabled_ = true; }
  const std::vector<TracePoint>& trace() const { return trace_; }

  const RelaySettings& settings() const { return settings_; }

 private:
  struct SeenFrame {
    uint16_t smp_cnt;
    std::array<ChannelSample, kSvChannelCount> channels;
  };

  void emit(RelayEventKind kind, uint64_t t_us, std::string detail);
  void block(uint64_t t_us, const std::string& reason);
  void apply_measurement(const SvFrame& frame);
  void reset_measurements();
  void decide(uint64_t t_us);
  void send_permissive_if_due(uint64_t t_us);
  bool permissive_active(uint64_t t_us) const {
    return permissive_until_ > 0 && t_us < permissive_until_;
  }

  Fabric& fabric_;
  PortId port_;
  RelaySettings settings_;
  std::string name_;
  EventLog* log_;
  PtpClient* ptp_client_ = nullptr;

  // Stream registry: the last consistency_window frames of the subscribed
  // stream, for same-count/different-values detection.
  std::deque<SeenFrame> registry_;

  // Measurement windows with running sums of squares.
  struct Window {
    std::deque<double> samples;
    double sum_sq = 0.0;
  };
  Window i_win_[3];
  Window v_win_[3];

  bool blocked_ = false;
  int clean_frames_ = 0;
  int persist_count_ = 0;
  bool element_active_ = false;
  bool tripped_ = false;
  bool mu_binary_ = false;
  uint64_t permissive_until_ = 0;
  bool sync_lost_latched_ = false;
  uint64_t undecodable_ = 0;

  std::function<void(uint64_t)> permissive_sender_;
  bool permissive_sending_ = false;
  uint64_t last_permissive_sent_us_ = 0;
  std::function<void(uint64_t)> trip_cb_;

  std::vector<RelayEvent> events_;
  bool trace_enabled_ = false;
  std::vector<TracePoint> trace_;
};

}  // namespace procbus
