#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "procbus/event_log.hpp"
#include "procbus/fabric.hpp"
#include "procbus/ptp.hpp"
#include "procbus/sv_codec.hpp"
#include "procbus/waveform.hpp"

namespace procbus {

// Fault detector thresholds for the hardwired binary output. Operates on
// the raw waveform, upstream of quantization and of anything an attacker
// can reach on the process bus.
struct BinaryChannelConfig {
  double overcurrent_rms = 1.0;    // A secondary
  double undervoltage_rms = 30.0;  // V secondary
  int window = 80;                 // samples (one cycle at 50 Hz / 4 kHz)
  uint64_t channel_delay_us = 500; // hardwired I/O latency
};

struct MuConfig {
  std::string sv_id = "MU01";
  uint16_t appid = 0x4000;
  Mac dst_mac = {0x01, 0x0C, 0xCD, 0x04, 0x00, 0x01};
  Mac src_mac = {0x02, 0x00, 0x00, 0x00, 0x00, 0xA1};
  uint32_t conf_rev = 1;
  int sample_rate = 4000;
  ScaleConvention scale;
  BinaryChannelConfig binary;
  // Optional publisher reaction to sync loss; by default only smpSynch
  // changes and the counter keeps running.
  bool reset_smp_cnt_on_sync_loss = false;
};

class MergingUnit {
 public:
  MergingUnit(Fabric& fabric, PortId port, const WaveformSource& source,
              MuConfig config, EventLog* log = nullptr);

  // Schedules the recurring sampling tick, first at t0_us.
  void start(uint64_t t0_us);

  // One sampling instant: read the waveform, update the binary channel,
  // publish one SV frame. Returns the published frame.
  SvFrame tick(uint64_t t_us);

  bool binary_flag() const { return binary_flag_; }
  void set_sync(SmpSynch status);
  SmpSynch sync() const { return sync_; }
  uint16_t smp_cnt() const { return smp_cnt_; }
  uint64_t frames_published() const { return frames_published_; }

  // Mirrors a PTP client into smpSynch on every tick.
  void attach_ptp_client(PtpClient* client) { ptp_client_ = client; }

  // Trusted binary channel: flag transitions are delivered to the listener
  // after the configured hardwired delay, bypassing the process bus.
  void set_binary_listener(std::function<void(bool, uint64_t)> listener);

  void enable_trace() { trace_enabled_ = true; }
  const std::vector<AnalogSample>& trace() const { return trace_; }

  const MuConfig& config() const { return config_; }

 private:
  void schedule_tick(uint64_t at_us);
  void update_binary(const AnalogSample& s, uint64_t t_us);

  Fabric& fabric_;
  PortId port_;
  const WaveformSource& source_;
  MuConfig config_;
  EventLog* log_;
  PtpClient* ptp_client_ = nullptr;

  uint64_t tick_index_ = 0;
  uint16_t smp_cnt_ = 0;
  SmpSynch sync_ = SmpSynch::Global;
  uint64_t frames_published_ = 0;

  // Per-channel sliding windows with running sums of squares.
  struct Window {
    std::deque<double> samples;
    double sum_sq = 0.0;
    void push(double x, size_t cap) {
      samples.push_back(x);
      sum_sq += x * x;
      if (samples.size() > cap) {
        const double old = samples.front();
        samples.pop_front();
        sum_sq -= old * old;
      }
    }
    bool full(size_t cap) const { return samples.size() >= cap; }
    double rms() const;
  };
  Window i_win_[3];
  Window v_win_[3];
  bool binary_flag_ = false;
  std::function<void(bool, uint64_t)> binary_listener_;

  bool trace_enabled_ = false;
  std::vector<AnalogSample> trace_;
};

}  // namespace procbus
