#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <string>

#include "procbus/event_log.hpp"
#include "procbus/fabric.hpp"
#include "procbus/ptp.hpp"
#include "procbus/sv_codec.hpp"

namespace procbus {

// Traffic selector shared by all attack behaviors.
struct TargetMatch {
  std::string sv_id;
  uint16_t appid = 0;
};

// ---------------------------------------------------------------------------
// Inline (MitM) handlers. Both preserve frame count, lengths, headers,
// counter progression and timing; only channel values change.

struct ForceParams {
  std::array<double, kSvChannelCount> scale = {1, 1, 1, 1, 1, 1, 1, 1};
  int ramp = 0;  // frames over which the modification blends in
  int32_t limit_min = std::numeric_limits<int32_t>::min();
  int32_t limit_max = std::numeric_limits<int32_t>::max();
  TargetMatch target;
  uint64_t active_from_us = 0;
  uint64_t active_until_us = std::numeric_limits<uint64_t>::max();
};

TapHandler make_mitm_force(ForceParams params, EventLog* log = nullptr);

struct MasqueradeParams {
  double i_max = 1.0;   // A secondary, trailing-cycle peak
  double v_min = 40.0;  // V secondary, trailing-cycle peak
  int baseline_capacity = 80;  // frames recorded before substitution is armed
  int envelope_window = 80;    // samples for the peak estimate
  TargetMatch target;
  uint64_t active_from_us = 0;
  uint64_t active_until_us = std::numeric_limits<uint64_t>::max();
};

TapHandler make_mitm_masquerade(MasqueradeParams params, EventLog* log = nullptr);

// ---------------------------------------------------------------------------
// Parallel replay from an ordinary switch port. Pure addition: the
// legitimate stream is never touched. Re-emitted frames keep the captured
// headers and smpCnt; the measurement field is scaled so the duplicate
// counters carry inconsistent values.

struct ReplayParams {
  double replay_rate_s = 0.02;  // trigger cadence
  int replay_len = 8;           // frames per burst
  double value_scale = 1.25;    // applied to stored channel values
  uint64_t frame_spacing_us = 250;
  int capture_capacity = 64;
  TargetMatch target;
  uint64_t active_from_us = 0;
  uint64_t active_until_us = std::numeric_limits<uint64_t>::max();
};

class ReplayAttacker {
 public:
  ReplayAttacker(Fabric& fabric, PortId port, ReplayParams params,
                 EventLog* log = nullptr);

  void start();
  void on_frame(const FrameEnvelope& env);  // passive capture

  size_t captured() const { return buffer_.size(); }
  uint64_t bursts_emitted() const { return bursts_; }

 private:
  void schedule_trigger(uint64_t at_us);
  void burst(uint64_t t_us);

  Fabric& fabric_;
  PortId port_;
  ReplayParams params_;
  EventLog* log_;
  std::deque<SvFrame> buffer_;
  uint64_t bursts_ = 0;
};

// ---------------------------------------------------------------------------
// Time-synchronization attack: starve the grandmaster rate and/or inject a
// conflicting master.

struct PtpAttackParams {
  enum class Mode { Throttle, Inject, Both };
  Mode mode = Mode::Throttle;
  double throttle_interval_s = 10.0;  // applied to the grandmaster
  double inject_rate_s = 0.5;         // burst cadence
  int inject_len = 2;                 // messages per burst
  GmId forged_master_id = {0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x99};
  uint8_t forged_priority = 0;  // lower wins
  uint64_t active_from_us = 0;
  uint64_t active_until_us = std::numeric_limits<uint64_t>::max();
};

class PtpAttacker {
 public:
  // gm may be null when the mode never throttles.
  PtpAttacker(Fabric& fabric, PortId port, PtpAttackParams params, Grandmaster* gm,
              EventLog* log = nullptr);

  void start();

 private:
  void schedule_inject(uint64_t at_us);
  void inject_burst(uint64_t t_us);

  Fabric& fabric_;
  PortId port_;
  PtpAttackParams params_;
  Grandmaster* gm_;
  EventLog* log_;
  uint16_t announce_seq_ = 0;
  uint16_t sync_seq_ = 0;
  double saved_sync_interval_ = 0;
  double saved_announce_interval_ = 0;
};

const char* to_string(PtpAttackParams::Mode mode);

}  // namespace procbus
