#include "procbus/waveform.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace procbus {

namespace {
constexpr double kPhaseShift = 2.0 * std::numbers::pi / 3.0;  // 120 degrees
}

AnalogSample sample(const SystemParams& params, const FaultSpec& fault, double t) {
  const bool in_fault =
      fault.kind != FaultKind::None && t >= fault.onset_s && t < fault.clear_s;

  AnalogSample out;
  out.t = t;
  const double omega_t = 2.0 * std::numbers::pi * params.frequency * t;

  for (int ph = 0; ph < 3; ++ph) {
    const double s = std::sin(omega_t - ph * kPhaseShift);

    bool faulted = false;
    if (in_fault) {
      faulted = fault.kind == FaultKind::ThreePhase ||
                (fault.kind == FaultKind::SingleLineGround &&
                 ph == int(fault.faulted_phase));
    }

    const double i_peak =
        faulted ? fault.fault_current_peak : params.nominal_current_peak;
    const double v_peak =
        faulted ? fault.fault_voltage_peak : params.nominal_voltage_peak;

    out.i[ph] = i_peak * s;
    out.v[ph] = v_peak * s;

    if (faulted && fault.dc_offset) {
      out.i[ph] += fault.fault_current_peak *
                   std::exp(-(t - fault.onset_s) / fault.dc_time_constant);
    }
  }
  return out;
}

double rms(std::span<const double> window) {
  if (window.empty()) throw std::invalid_argument("rms: empty window");
  double acc = 0.0;
  for (double x : window) acc += x * x;
  return std::sqrt(acc / double(window.size()));
}

}  // namespace procbus
