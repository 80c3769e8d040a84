#pragma once

#include <array>
#include <limits>
#include <span>

namespace procbus {

// Secondary-side three-phase source with parametric fault injection.
// Feeds both the SV publishing path and the MU's raw binary channel.

struct SystemParams {
  double frequency = 50.0;             // Hz
  double nominal_voltage_peak = 83.0;  // V secondary, phase-to-ground
  double nominal_current_peak = 0.370; // A secondary
  double ct_ratio = 600.0;             // primary:secondary
  double vt_ratio = 100.0;
  int sample_rate = 4000;              // Hz
};

enum class FaultKind { None, ThreePhase, SingleLineGround };

enum class Phase : int { A = 0, B = 1, C = 2 };

struct FaultSpec {
  FaultKind kind = FaultKind::None;
  double onset_s = 0.0;
  double clear_s = std::numeric_limits<double>::infinity();  // never
  double fault_resistance = 0.1;    // ohms
  double fault_current_peak = 22.0; // A secondary
  double fault_voltage_peak = 5.0;  // V secondary
  Phase faulted_phase = Phase::A;   // SLG only
  // Optional decaying DC offset on the fault current; off by default.
  bool dc_offset = false;
  double dc_time_constant = 0.05;   // seconds
};

struct AnalogSample {
  double t = 0.0;
  std::array<double, 3> i{};  // A secondary, phases A/B/C
  std::array<double, 3> v{};  // V secondary
};

// Instantaneous sample at time t. Phase X uses angle 2*pi*f*t - X*120deg
// (sine convention); inside [onset, clear) affected phases switch to the
// fault amplitudes while the angle keeps running.
AnalogSample sample(const SystemParams& params, const FaultSpec& fault, double t);

// Square root of the mean of squares. Throws std::invalid_argument on an
// empty window.
double rms(std::span<const double> window);

// Shared view of one bay's electrical state. The scenario runner may clear
// the fault early when the trip loop-back is configured.
class WaveformSource {
 public:
  WaveformSource(SystemParams params, FaultSpec fault)
      : params_(params), fault_(fault) {}

  AnalogSample at(double t) const { return sample(params_, fault_, t); }

  const SystemParams& params() const { return params_; }
  const FaultSpec& fault() const { return fault_; }

  void clear_fault_at(double t) {
    if (t < fault_.clear_s) fault_.clear_s = t;
  }

 private:
  SystemParams params_;
  FaultSpec fault_;
};

}  // namespace procbus
