// Capacitor-to-capacitor energy combiner.
//
// Each source owns a pair of temporary buffers. The buffer wired to the
// source charges from V_L toward V_H; on reaching V_H it queues for the
// shared regulator but stays on the source (and keeps charging, clamped at
// V_overshoot) until the regulator takes it. Discharge runs at the
// regulator's input current limit down to V_L, at which point one pulse is
// emitted and the pair swaps roles. Sustained combined input above the
// current limit therefore drives every discharge to start from the overshoot
// voltage, which is why the per-pulse energy credit has two regimes.
//
// Charging that would push a buffer past V_overshoot is throttled at the
// source (a constant-current supply into a full capacitor stops delivering),
// so throttled charge is never counted as consumed energy.

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "infiniteen/quantity.hpp"
#include "infiniteen/source.hpp"
#include "infiniteen/trace.hpp"

namespace infiniteen {

enum class BufferPhase { charging, waiting_full, discharging, idle };

struct TempBuffer {
  Voltage voltage{};
  BufferPhase phase{BufferPhase::idle};
  std::int64_t fill_tick{-1};
  Voltage fill_voltage{};  // voltage at the step that crossed V_H
};

struct RegulatorModel {
  Scalar efficiency{Scalar{0.93}};
  Current input_current_limit{milliamps(5)};
  // Optional piecewise-linear efficiency over discharge current; empty means
  // the constant value above.
  std::vector<std::pair<Current, Scalar>> efficiency_curve;

  Scalar efficiency_at(Current i) const {
    if (efficiency_curve.empty()) return efficiency;
    const auto& pts = efficiency_curve;
    if (i <= pts.front().first) return pts.front().second;
    if (i >= pts.back().first) return pts.back().second;
    for (size_t k = 1; k < pts.size(); ++k) {
      if (i <= pts[k].first) {
        double t = (i.value - pts[k - 1].first.value) /
                   (pts[k].first.value - pts[k - 1].first.value);
        return Scalar{pts[k - 1].second.value +
                      t * (pts[k].second.value - pts[k - 1].second.value)};
      }
    }
    return pts.back().second;
  }
};

struct CombinerConfig {
  Voltage v_h{volts(3.2)};
  Voltage v_l{volts(2.5)};
  Voltage v_overshoot{volts(3.28)};
  Capacitance c_temp{microfarads(500)};
  Energy e_cap_nominal{microjoules(930)};  // per-pulse credit, normal regime
  Energy e_cap_over{microjoules(1030)};    // per-pulse credit, overshoot regime
  bool correction_enabled{true};
  RegulatorModel regulator;

  Voltage band() const { return v_h - v_l; }
  Voltage over_band() const { return v_overshoot - v_l; }

  void validate(std::vector<std::string>& diagnostics) const {
    if (!(v_l.value > 0) || !(v_l < v_h) || !(v_h <= v_overshoot))
      diagnostics.push_back("combiner: require 0 < v_l < v_h <= v_overshoot");
    if (c_temp.value <= 0) diagnostics.push_back("combiner: c_temp must be > 0");
    if (e_cap_nominal.value < 0 || e_cap_over < e_cap_nominal)
      diagnostics.push_back("combiner: require 0 <= e_cap_nominal <= e_cap_over");
    double eta = regulator.efficiency.value;
    if (!(eta > 0.0) || eta > 1.0)
      diagnostics.push_back("combiner: regulator efficiency must be in (0, 1]");
    if (regulator.input_current_limit.value <= 0)
      diagnostics.push_back("combiner: regulator input current limit must be > 0");
  }
};

// Per-pulse summary, also serialized as the pulse-emitted trace payload.
struct PulseRecord {
  TimeNs t_ns{0};
  int source_index{0};
  Voltage v_start{};      // buffer voltage at regulator handoff
  Energy energy_true{};   // post-efficiency energy delivered by this pulse
  bool over_regime_true{false};      // combined source current > limit at emission
  bool over_regime_observed{false};  // handoff voltage exceeded v_h
};

struct CombinerCounters {
  std::int64_t n_pulses{0};
  std::int64_t n_over_true{0};
  std::int64_t n_over_observed{0};
  Energy e_store_true{};  // accumulated regulator output

  // pulse counts for the current estimation window
  TimeNs window_start_ns{0};
  std::int64_t window_n_low{0};
  std::int64_t window_n_over{0};

  void reset_window(TimeNs now) {
    window_start_ns = now;
    window_n_low = 0;
    window_n_over = 0;
  }
};

struct CombinerStepEffects {
  Energy delivered{};   // absorbed from sources this step
  Energy reg_input{};   // drained from the discharging buffer
  Energy reg_output{};  // efficiency-scaled, handed to storage
  Energy reg_loss{};
  Energy discarded{};   // regulator output with no storage connected
  Charge throttled{};   // offered by sources but refused (buffer clamped)
  std::vector<TraceEvent> events;
  std::vector<PulseRecord> pulses;
};

class Combiner {
 public:
  Combiner() = default;
  Combiner(CombinerConfig cfg, size_t n_sources) : cfg_(cfg) {
    units_.resize(n_sources);
    for (auto& u : units_) {
      u.buffers[0] = {cfg_.v_l, BufferPhase::charging, -1};
      u.buffers[1] = {cfg_.v_l, BufferPhase::idle, -1};
      u.connected = 0;
    }
  }

  const CombinerConfig& config() const { return cfg_; }
  const CombinerCounters& counters() const { return counters_; }
  CombinerCounters& counters() { return counters_; }
  size_t source_count() const { return units_.size(); }
  bool regulator_busy() const { return active_.has_value(); }

  Energy buffers_energy() const {
    Energy e{};
    for (const auto& u : units_)
      for (const auto& b : u.buffers) e += energy_in_capacitor(cfg_.c_temp, b.voltage);
    return e;
  }

  const TempBuffer& buffer(size_t source, size_t idx) const { return units_[source].buffers[idx]; }

  // Advances one integration step. `currents[i]` is source i's output and
  // `storage_connected` says whether the combiner rail has a sink.
  CombinerStepEffects step(TimeNs now, std::int64_t tick, Seconds dt,
                           const std::vector<Current>& currents, bool storage_connected) {
    CombinerStepEffects fx;

    // 1. regulator service: drain the active buffer toward V_L
    if (active_) {
      service_active(now, dt, currents, storage_connected, fx);
    }

    // 2. source side: each connected buffer absorbs charge, clamped at
    //    V_overshoot; crossing V_H queues the buffer for the regulator
    for (size_t s = 0; s < units_.size(); ++s) {
      SourceUnit& u = units_[s];
      TempBuffer& b = u.buffers[u.connected];
      Current i_src = s < currents.size() ? currents[s] : Current{};
      if (i_src.value <= 0) continue;
      if (b.phase != BufferPhase::charging && b.phase != BufferPhase::waiting_full) continue;

      Charge offered = i_src * dt;
      Charge headroom = cfg_.c_temp * (cfg_.v_overshoot - b.voltage);
      if (headroom.value < 0) headroom = Charge{};
      Charge absorbed = offered.value <= headroom.value ? offered : headroom;
      if (absorbed.value > 0) {
        Voltage v0 = b.voltage;
        Voltage v1 = v0 + absorbed / cfg_.c_temp;
        b.voltage = v1;
        fx.delivered += 0.5 * ((v0 + v1) * absorbed);
        if (b.phase == BufferPhase::charging && v1 >= cfg_.v_h) {
          b.phase = BufferPhase::waiting_full;
          b.fill_tick = tick;
          b.fill_voltage = v1;
          queue_.push_back({static_cast<int>(s), u.connected});
        }
      }
      if (absorbed.value < offered.value) {
        fx.throttled += offered - absorbed;
        if (!u.throttling) {
          u.throttling = true;
          TraceEvent ev;
          ev.t_ns = now;
          ev.source = ModuleId::combiner;
          ev.kind = EventKind::warning;
          ev.label = "buffer-clamped";
          ev.payload.push_back({"source", static_cast<double>(s), ""});
          ev.payload.push_back({"voltage", b.voltage.value, "V"});
          fx.events.push_back(std::move(ev));
        }
      } else {
        u.throttling = false;
      }
    }

    // 3. hand the next queued buffer to the regulator; its pair takes the
    //    source from the following step (FIFO by fill order)
    if (!active_ && !queue_.empty()) {
      Slot next = queue_.front();
      queue_.pop_front();
      SourceUnit& u = units_[next.source];
      TempBuffer& b = u.buffers[next.buffer];
      b.phase = BufferPhase::discharging;
      active_ = next;
      pulse_v_start_ = b.voltage;
      pulse_v_fill_ = b.fill_voltage;
      pulse_energy_in_ = Energy{};
      if (!storage_connected) {
        TraceEvent ev;
        ev.t_ns = now;
        ev.source = ModuleId::combiner;
        ev.kind = EventKind::warning;
        ev.label = "no-storage-connected";
        fx.events.push_back(std::move(ev));
      }
      TempBuffer& pair = u.buffers[1 - next.buffer];
      pair.phase = BufferPhase::charging;
      u.connected = 1 - next.buffer;
    }

    return fx;
  }

  // Eq-style estimate from pulse counts: per-pulse credit e_cap_nominal, or
  // e_cap_over for overshoot-regime pulses when the correction is enabled.
  // `observed_regime` selects the deployable voltage-proxy classification
  // instead of the simulator-side current comparison.
  Energy stored_energy_estimate(bool observed_regime = true) const {
    std::int64_t over = observed_regime ? counters_.n_over_observed : counters_.n_over_true;
    if (!cfg_.correction_enabled) over = 0;
    std::int64_t low = counters_.n_pulses - over;
    return static_cast<double>(low) * cfg_.e_cap_nominal +
           static_cast<double>(over) * cfg_.e_cap_over;
  }

  struct CurrentEstimate {
    Current value{};
    bool low_confidence{false};
  };

  // Average harvested current over the active window: C * N * dV / T, with
  // the overshoot band substituted for pulses that left from above V_H (same
  // conditional correction as the energy estimate).
  CurrentEstimate harvester_current_estimate(Seconds window) const {
    if (window.value <= 0) throw std::invalid_argument("combiner: window must be > 0");
    std::int64_t n = counters_.window_n_low + counters_.window_n_over;
    if (n == 0) return {Current{}, true};
    Charge q = cfg_.c_temp * (static_cast<double>(counters_.window_n_low) * cfg_.band() +
                              static_cast<double>(counters_.window_n_over) * cfg_.over_band());
    return {q / window, false};
  }

  void reset_window(TimeNs now) { counters_.reset_window(now); }

 private:
  struct Slot {
    int source;
    int buffer;
  };

  struct SourceUnit {
    std::array<TempBuffer, 2> buffers;
    int connected{0};  // index wired to the source
    bool throttling{false};
  };

  void service_active(TimeNs now, Seconds dt, const std::vector<Current>& currents,
                      bool storage_connected, CombinerStepEffects& fx) {
    SourceUnit& u = units_[active_->source];
    TempBuffer& b = u.buffers[active_->buffer];
    Current i_limit = cfg_.regulator.input_current_limit;
    Charge step_q = i_limit * dt;
    Charge to_floor = cfg_.c_temp * (b.voltage - cfg_.v_l);
    bool completes = to_floor.value <= step_q.value;
    Charge q = completes ? to_floor : step_q;

    Voltage v0 = b.voltage;
    Voltage v1 = completes ? cfg_.v_l : v0 - q / cfg_.c_temp;
    b.voltage = v1;

    Energy drained = 0.5 * ((v0 + v1) * q);
    Scalar eta = cfg_.regulator.efficiency_at(i_limit);
    Energy out = eta.value * drained;
    fx.reg_input += drained;
    fx.reg_output += out;
    fx.reg_loss += drained - out;
    if (!storage_connected) fx.discarded += out;
    pulse_energy_in_ += out;

    if (completes) {
      b.phase = BufferPhase::idle;
      b.fill_tick = -1;

      Current combined{};
      for (const auto& c : currents) combined += c;

      PulseRecord rec;
      rec.t_ns = now;
      rec.source_index = active_->source;
      rec.v_start = pulse_v_start_;
      rec.energy_true = pulse_energy_in_;
      rec.over_regime_true = combined > i_limit;
      // "exceeded V_H at handoff": the buffer kept charging past its fill
      // instant while waiting for the regulator (quantization-safe proxy)
      rec.over_regime_observed = pulse_v_start_.value > pulse_v_fill_.value + 1e-9;
      fx.pulses.push_back(rec);

      counters_.n_pulses++;
      if (rec.over_regime_true) counters_.n_over_true++;
      if (rec.over_regime_observed) counters_.n_over_observed++;
      counters_.e_store_true += pulse_energy_in_;
      if (rec.over_regime_observed)
        counters_.window_n_over++;
      else
        counters_.window_n_low++;

      TraceEvent ev;
      ev.t_ns = now;
      ev.source = ModuleId::combiner;
      ev.kind = EventKind::pulse_emitted;
      ev.label = "pulse";
      ev.payload.push_back({"source", static_cast<double>(rec.source_index), ""});
      ev.payload.push_back({"n", static_cast<double>(counters_.n_pulses), ""});
      ev.payload.push_back({"v_start", rec.v_start.value, "V"});
      ev.payload.push_back({"energy", rec.energy_true.value, "J"});
      ev.payload.push_back({"over_true", rec.over_regime_true ? 1.0 : 0.0, ""});
      ev.payload.push_back({"over_observed", rec.over_regime_observed ? 1.0 : 0.0, ""});
      fx.events.push_back(std::move(ev));

      active_.reset();
    }
  }

  CombinerConfig cfg_;
  std::vector<SourceUnit> units_;
  std::deque<Slot> queue_;
  std::optional<Slot> active_;
  Voltage pulse_v_start_{};
  Voltage pulse_v_fill_{};
  Energy pulse_energy_in_{};
  CombinerCounters counters_;
};

// Buffer capacity recovered from accumulated transferred energy: C = 2E/V^2.
inline Capacitance calibrate_capacitance(Energy e_store_estimate, Voltage v) {
  if (v.value <= 0) throw std::invalid_argument("calibrate_capacitance: voltage must be > 0");
  if (e_store_estimate.value <= 0) return Capacitance{};
  return 2.0 * (e_store_estimate / (v * v));
}

}  // namespace infiniteen
