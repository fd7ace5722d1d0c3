// Load Monitoring Module: an RC differentiator whose output tracks the
// supply capacitor's -dv/dt, followed by a comparator that raises an
// interrupt while the output exceeds a reference.
//
// Sign convention: v_diff is positive while the supply capacitor discharges
// (falling v_store), so discharge current reconstructs as C * v_diff / gain.
//
// The differentiator's amplitude gain (R_F * C_1) and its settling time
// constants are independent knobs: the settled output needs the full RC
// product to hit millivolt sensitivity, while the measured response delays
// imply a much faster internal time constant, with the fall (input capacitor
// discharge) faster than the rise. The comparator reference is calibrated
// per storage capacitor because the measured detection thresholds are not
// proportional to C_STORE.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "infiniteen/quantity.hpp"
#include "infiniteen/trace.hpp"

namespace infiniteen {

struct LmmConfig {
  Resistance r_f{kiloohms(100)};
  Capacitance c_1{microfarads(1)};
  Seconds tau_rise{milliseconds(5)};
  Seconds tau_fall{milliseconds(3.5)};
  Voltage v_ref_default{millivolts(20)};
  std::vector<std::pair<std::string, Voltage>> v_ref_per_cap;
  Voltage hysteresis{};       // comparator releases at v_ref - hysteresis
  Voltage rail{volts(3.3)};   // op-amp saturation

  Seconds gain() const { return r_f * c_1; }

  Voltage v_ref_for(std::string_view cap_id) const {
    for (const auto& [id, v] : v_ref_per_cap)
      if (id == cap_id) return v;
    return v_ref_default;
  }

  void validate(std::vector<std::string>& diagnostics) const {
    if (r_f.value <= 0 || c_1.value <= 0)
      diagnostics.push_back("lmm: r_f and c_1 must be > 0");
    if (tau_rise.value <= 0 || tau_fall.value <= 0)
      diagnostics.push_back("lmm: settling time constants must be > 0");
    if (v_ref_default.value <= 0)
      diagnostics.push_back("lmm: v_ref must be > 0");
    for (const auto& [id, v] : v_ref_per_cap)
      if (v.value <= 0) diagnostics.push_back("lmm: v_ref for '" + id + "' must be > 0");
    if (hysteresis.value < 0) diagnostics.push_back("lmm: hysteresis must be >= 0");
  }
};

struct LmmState {
  Voltage v_diff{};
  bool comparator_out{false};
  TimeNs last_rise_ns{-1};
  TimeNs last_fall_ns{-1};
};

// exp() factors cached for a fixed integration step.
struct LmmStepFactors {
  double alpha_rise{0.0};
  double alpha_fall{0.0};
};

inline LmmStepFactors make_lmm_step_factors(const LmmConfig& cfg, Seconds dt) {
  return {std::exp(-dt.value / cfg.tau_rise.value), std::exp(-dt.value / cfg.tau_fall.value)};
}

// One integration step. `blank` suppresses the input difference for steps
// where the supply rail was reconfigured, so multiplexer jumps between
// capacitors do not register as load activity.
inline std::vector<TraceEvent> step_lmm(LmmState& state, const LmmConfig& cfg,
                                        const LmmStepFactors& factors, Voltage v_ref,
                                        Voltage v_store_prev, Voltage v_store_now, Seconds dt,
                                        TimeNs now, bool blank = false) {
  Voltage dv = blank ? Voltage{} : v_store_now - v_store_prev;
  // discharge (falling v_store) drives the output positive
  Voltage target = -1.0 * ((cfg.gain() * (dv / dt)));

  double alpha = std::fabs(target.value) > std::fabs(state.v_diff.value) ? factors.alpha_rise
                                                                         : factors.alpha_fall;
  double v = target.value + (state.v_diff.value - target.value) * alpha;
  if (v > cfg.rail.value) v = cfg.rail.value;
  if (v < -cfg.rail.value) v = -cfg.rail.value;
  state.v_diff = Voltage{v};

  std::vector<TraceEvent> events;
  bool out = state.comparator_out;
  if (!out && state.v_diff >= v_ref) {
    out = true;
    state.last_rise_ns = now;
    TraceEvent ev;
    ev.t_ns = now;
    ev.source = ModuleId::lmm;
    ev.kind = EventKind::lmm_interrupt_rise;
    ev.payload.push_back({"v_diff", state.v_diff.value, "V"});
    events.push_back(std::move(ev));
  } else if (out && state.v_diff.value < v_ref.value - cfg.hysteresis.value) {
    out = false;
    state.last_fall_ns = now;
    TraceEvent ev;
    ev.t_ns = now;
    ev.source = ModuleId::lmm;
    ev.kind = EventKind::lmm_interrupt_fall;
    ev.payload.push_back({"v_diff", state.v_diff.value, "V"});
    events.push_back(std::move(ev));
  }
  state.comparator_out = out;
  return events;
}

// Inverts the differentiator output back to a discharge current estimate.
inline Current discharge_current_from_vdiff(Voltage v_diff, Capacitance c_store, Seconds gain) {
  if (gain.value <= 0) throw std::invalid_argument("lmm: gain must be > 0");
  return (c_store * v_diff) / gain;
}

// Steady-state detection floor: discharge currents below this never push the
// settled output across the comparator reference.
inline Current min_detectable_current(Capacitance c_store, const LmmConfig& cfg, Voltage v_ref) {
  return (c_store * v_ref) / cfg.gain();
}

inline Current min_detectable_current(Capacitance c_store, const LmmConfig& cfg) {
  return min_detectable_current(c_store, cfg, cfg.v_ref_default);
}

}  // namespace infiniteen
