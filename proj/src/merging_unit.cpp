#include "procbus/merging_unit.hpp"

#include <cmath>

namespace procbus {

double MergingUnit::Window::rms() const {
  if (samples.empty()) return 0.0;
  // Guard against tiny negative residue from the running subtraction.
  const double mean = std::max(sum_sq, 0.0) / double(samples.size());
  return std::sqrt(mean);
}

MergingUnit::MergingUnit(Fabric& fabric, PortId port, const WaveformSource& source,
                         MuConfig config, EventLog* log)
    : fabric_(fabric), port_(port), source_(source), config_(std::move(config)), log_(log) {}

void MergingUnit::start(uint64_t t0_us) { schedule_tick(t0_us); }

void MergingUnit::schedule_tick(uint64_t at_us) {
  fabric_.schedule(at_us, [this, at_us]() {
    tick(at_us);
    schedule_tick(at_us + 1000000ull / uint64_t(config_.sample_rate));
  });
}

void MergingUnit::set_sync(SmpSynch status) {
  if (status == sync_) return;
  if (config_.reset_smp_cnt_on_sync_loss && status == SmpSynch::None) smp_cnt_ = 0;
  sync_ = status;
  if (log_)
    log_->record(fabric_.now(), "mu/" + config_.sv_id, "smp_synch",
                 {{"status", to_string(status)}});
}

void MergingUnit::set_binary_listener(std::function<void(bool, uint64_t)> listener) {
  binary_listener_ = std::move(listener);
}

void MergingUnit::update_binary(const AnalogSample& s, uint64_t t_us) {
  const size_t cap = size_t(config_.binary.window);
  for (int ph = 0; ph < 3; ++ph) {
    i_win_[ph].push(s.i[ph], cap);
    v_win_[ph].push(s.v[ph], cap);
  }
  if (!i_win_[0].full(cap)) return;  // settle before judging

  bool flag = false;
  for (int ph = 0; ph < 3 && !flag; ++ph) {
    if (i_win_[ph].rms() > config_.binary.overcurrent_rms) flag = true;
    if (v_win_[ph].rms() < config_.binary.undervoltage_rms) flag = true;
  }
  if (flag == binary_flag_) return;

  binary_flag_ = flag;
  if (log_)
    log_->record(t_us, "mu/" + config_.sv_id, "binary_channel", {{"flag", flag}});
  if (binary_listener_) {
    const uint64_t deliver_at = t_us + config_.binary.channel_delay_us;
    const bool value = flag;
    fabric_.schedule(deliver_at,
                     [cb = binary_listener_, value, deliver_at]() { cb(value, deliver_at); });
  }
}

SvFrame MergingUnit::tick(uint64_t t_us) {
  if (ptp_client_)
    set_sync(ptp_client_->status_at(t_us) == SyncStatus::Synced ? SmpSynch::Global
                                                                : SmpSynch::None);

  const double t_s = double(tick_index_) / double(config_.sample_rate);
  const AnalogSample s = source_.at(t_s);
  if (trace_enabled_) trace_.push_back(s);
  update_binary(s, t_us);

  SvFrame frame;
  frame.dst = config_.dst_mac;
  frame.src = config_.src_mac;
  frame.appid = config_.appid;
  frame.asdu.sv_id = config_.sv_id;
  frame.asdu.smp_cnt = smp_cnt_;
  frame.asdu.conf_rev = config_.conf_rev;
  frame.asdu.smp_synch = sync_;

  const double in = s.i[0] + s.i[1] + s.i[2];  // residual
  const double vn = s.v[0] + s.v[1] + s.v[2];
  const double phys[kSvChannelCount] = {s.i[0], s.i[1], s.i[2], in,
                                        s.v[0], s.v[1], s.v[2], vn};
  for (int ch = 0; ch < kSvChannelCount; ++ch) {
    const double scale =
        ch < 4 ? config_.scale.current_scale : config_.scale.voltage_scale;
    quantize(phys[ch], scale, frame.asdu.channels[ch].value);  // saturates silently
    frame.asdu.channels[ch].quality = 0;
  }

  std::vector<uint8_t> bytes;
  encode_sv(frame, bytes);
  fabric_.send(std::move(bytes), port_, t_us);
  ++frames_published_;

  smp_cnt_ = uint16_t((smp_cnt_ + 1) % kSmpCntModulus);
  ++tick_index_;
  return frame;
}

}  // namespace procbus
