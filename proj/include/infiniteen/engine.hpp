// Fixed-step orchestration. Each step advances sources -> combiner ->
// storage -> LMM -> ICU in that order; events and control actions produced
// in step k take effect at the start of step k+1. Time is integer
// nanoseconds, module evaluation order is fixed and nothing reads the wall
// clock, so a scenario always produces a bit-identical trace.
//
// The engine keeps a running energy ledger (source energy in = buffer +
// storage deltas + every loss term) and records the worst per-step residual;
// tests pin it to <= 1e-9 relative.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "infiniteen/combiner.hpp"
#include "infiniteen/icu.hpp"
#include "infiniteen/lmm.hpp"
#include "infiniteen/load.hpp"
#include "infiniteen/quantity.hpp"
#include "infiniteen/source.hpp"
#include "infiniteen/storage.hpp"
#include "infiniteen/trace.hpp"

namespace infiniteen {

struct LoadSection {
  bool present{false};
  LoadProfile profile;
  int cycles{1};
  TimeNs start_delay_ns{500'000'000};
};

struct Scenario {
  std::string name{"scenario"};
  std::string description;
  std::vector<SourceModel> sources;
  CombinerConfig combiner;
  StorageArray storage;
  LmmConfig lmm;
  IcuConfig icu;  // icu.enabled == false when the section is absent
  LoadSection load;
  TimeNs duration_ns{0};
  TimeNs step_ns{100'000};
  TimeNs report_period_ns{10'000'000};
  std::uint64_t seed{0};  // reserved for optional noise injection

  std::vector<std::string> validate() const {
    std::vector<std::string> d;
    if (duration_ns < 0) d.push_back("run: duration must be >= 0");
    if (step_ns <= 0) d.push_back("run: step must be > 0");
    if (step_ns > 0 && duration_ns % step_ns != 0)
      d.push_back("run: duration must be a multiple of the step");
    if (step_ns > 0 && report_period_ns % step_ns != 0)
      d.push_back("run: report period must be a multiple of the step");
    if (report_period_ns <= 0) d.push_back("run: report period must be > 0");
    for (const auto& s : sources) {
      s.validate(d);
      for (const auto& seg : s.segments)
        if (step_ns > 0 && seg.start_ns % step_ns != 0)
          d.push_back("source '" + s.id + "': segment starts must be multiples of the step");
    }
    combiner.validate(d);
    storage.validate(d);
    lmm.validate(d);
    if (lmm.gain().value <= to_seconds(step_ns).value)
      d.push_back("lmm: gain (r_f * c_1) must exceed the integration step");
    icu.validate(d);
    if (icu.enabled && storage.index_of(icu.initial_cstore) < 0)
      d.push_back("icu: initial cstore '" + icu.initial_cstore + "' is not a storage capacitor");
    if (icu.enabled)
      for (const auto& rule : icu.table.rules)
        if (storage.index_of(rule.cap_id) < 0)
          d.push_back("icu: lookup target '" + rule.cap_id + "' is not a storage capacitor");
    if (load.present) {
      load.profile.validate(d);
      if (load.cycles < 1) d.push_back("load: cycles must be >= 1");
      if (load.start_delay_ns < 0) d.push_back("load: start delay must be >= 0");
      if (step_ns > 0) {
        for (const auto& t : load.profile.tasks)
          if (t.duration_ns % step_ns != 0)
            d.push_back("load '" + t.name + "': duration must be a multiple of the step");
        if (load.profile.inter_task_gap_ns % step_ns != 0)
          d.push_back("load: inter-task gap must be a multiple of the step");
        if (load.start_delay_ns % step_ns != 0)
          d.push_back("load: start delay must be a multiple of the step");
      }
    }
    return d;
  }
};

struct LedgerTotals {
  double delivered{0};            // J drawn from the sources
  double reg_input{0};            // J into the regulator
  double reg_loss{0};             // J burned in the regulator
  double stored_from_combiner{0}; // J landed in storage capacitors
  double combiner_discard{0};     // J pushed with no storage connected
  double storage_clamp_discard{0};
  double load_energy{0};          // J drawn from storage by the load
  double equalization_loss{0};
  double leakage_loss{0};
  double throttled_charge{0};     // C refused at clamped buffers (never drawn)
  double buffers_initial{0};
  double buffers_final{0};
  double storage_initial{0};
  double storage_final{0};
  double max_step_residual_rel{0};
  std::int64_t exclusivity_violations{0};
};

struct SegmentStats {
  TimeNs start_ns{0};
  TimeNs end_ns{0};
  double i_true{0};        // combined source current (A)
  std::int64_t n_pulses{0};
  std::int64_t n_over{0};
  double pulse_rate{0};    // Hz
  double i_estimate{0};    // A, regime-corrected pulse count estimate
  double delivered{0};     // J drawn from sources in the window
  double stored{0};        // J into storage in the window
  double buffers_delta{0}; // J change of temp-buffer bank over the window
  double efficiency{0};    // stored / (delivered - buffers_delta)
  double efficiency_raw{0};
};

struct TaskStats {
  std::string name;
  int cycle{0};
  int index_in_cycle{0};
  TimeNs start_ns{0};
  TimeNs end_ns{0};
  double current{0};        // A
  bool detected{false};     // an interrupt rose during the burst
  double t1{-1};            // s, rise latency from burst start
  double t2{-1};            // s, fall latency from burst end (if high at end)
  double recon_error{-1};   // worst |measured-true|/true over usable readings
};

struct Metrics {
  std::map<std::string, ParsedQuantity> values;
  std::vector<SegmentStats> segments;
  std::vector<TaskStats> tasks;
};

struct RunResult {
  Trace trace;
  std::vector<TimeseriesRow> timeseries;
  LedgerTotals ledger;
  Metrics metrics;
};

Metrics compute_metrics(const Scenario& scenario, const Trace& trace,
                        const std::vector<TimeseriesRow>& timeseries);

namespace detail {

class EngineRun {
 public:
  explicit EngineRun(const Scenario& sc)
      : sc_(sc),
        combiner_(sc.combiner, sc.sources.size()),
        storage_(sc.storage),
        icu_(sc.icu),
        lmm_factors_(make_lmm_step_factors(sc.lmm, to_seconds(sc.step_ns))) {
    if (sc.load.present) timeline_ = build_timeline(sc.load.profile, sc.load.cycles, sc.load.start_delay_ns);
    for (const auto& c : storage_.caps)
      if (c.mode == CapMode::to_supply || c.mode == CapMode::both) {
        active_supply_cap_ = c.id;
        break;
      }
  }

  RunResult run() {
    RunResult result;
    if (sc_.duration_ns == 0) return result;

    const TimeNs step = sc_.step_ns;
    const Seconds dt = to_seconds(step);
    const std::int64_t n_steps = sc_.duration_ns / step;

    ledger_.buffers_initial = combiner_.buffers_energy().value;
    ledger_.storage_initial = storage_.total_energy().value;

    sample_timeseries(result, 0);

    std::vector<Current> currents(sc_.sources.size());
    for (std::int64_t k = 0; k < n_steps; ++k) {
      const TimeNs now = k * step;
      StorageEffects fx_storage;
      bool reconfigured = false;

      // 1. control actions decided last step take effect now
      for (const auto& action : pending_actions_) {
        if (action.type == IcuAction::Type::select_cstore) {
          std::string old_cap = active_supply_cap_;
          storage_.set_mode(action.cap_id, CapMode::to_supply, now, fx_storage);
          if (!old_cap.empty() && old_cap != action.cap_id)
            storage_.set_mode(old_cap, CapMode::to_combiner, now, fx_storage);
          active_supply_cap_ = action.cap_id;
          combiner_node_stable_ = false;
          reconfigured = true;
        } else {
          disconnect_load(now, result, "abnormality");
        }
      }
      pending_actions_.clear();

      // 2. LMM edges observed last step reach the controller now
      if (sc_.icu.enabled)
        for (const auto& edge : pending_edges_) icu_.notify_edge(edge, now);
      pending_edges_.clear();

      // 3. harvest
      for (size_t s = 0; s < sc_.sources.size(); ++s) currents[s] = sc_.sources[s].current_at(now);

      std::vector<int> combiner_node = storage_.combiner_node();
      bool storage_connected = !combiner_node.empty();
      Energy e_sys_before = system_energy();

      CombinerStepEffects fx = combiner_.step(now, k, dt, currents, storage_connected);
      Energy stored_now{};
      if (fx.reg_output.value > 0 && storage_connected)
        stored_now = storage_.charge_node(combiner_node, fx.reg_output, now, fx_storage);

      // 4. leakage, then the load draws from the supply rail
      storage_.apply_leakage(dt, fx_storage);

      Voltage v_supply_before = storage_.node_voltage(storage_.supply_node());
      Current i_load{};
      if (timeline_) {
        update_task_events(now, result);
        i_load = timeline_->current_at(now, load_disconnected_);
      }
      StorageArray::DischargeResult dr = storage_.apply_discharge(i_load, dt);
      if (dr.no_supply && !no_supply_flagged_) {
        no_supply_flagged_ = true;
        TraceEvent ev;
        ev.t_ns = now;
        ev.source = ModuleId::storage;
        ev.kind = EventKind::warning;
        ev.label = "no-supply";
        result.trace.push(ev);
      }
      if (dr.undervoltage && !load_disconnected_) disconnect_load(now, result, "undervoltage");

      // 5. differentiator + comparator watch the supply rail
      Voltage v_supply_now = storage_.node_voltage(storage_.supply_node());
      Voltage v_ref = sc_.lmm.v_ref_for(active_lmm_cap());
      auto lmm_events = step_lmm(lmm_state_, sc_.lmm, lmm_factors_, v_ref, v_supply_before,
                                 v_supply_now, dt, now, reconfigured);
      for (auto& ev : lmm_events) {
        pending_edges_.push_back(ev.kind == EventKind::lmm_interrupt_rise ? LmmEdge::rise
                                                                          : LmmEdge::fall);
        result.trace.push(std::move(ev));
      }

      // 6. controller
      if (sc_.icu.enabled) {
        Current measured = measured_current();
        IcuStepResult ir = icu_.step(now, measured);
        for (auto& ev : ir.events) result.trace.push(std::move(ev));
        for (auto& a : ir.actions) pending_actions_.push_back(a);
      }

      // 7. bookkeeping: ledger, invariants, reporting
      for (auto& ev : fx.events) result.trace.push(std::move(ev));
      for (auto& ev : fx_storage.events) result.trace.push(std::move(ev));

      accumulate_ledger(fx, fx_storage, stored_now, dr.removed, e_sys_before);
      check_exclusivity();

      const TimeNs t_end = now + step;
      if (t_end % sc_.report_period_ns == 0) sample_timeseries(result, t_end);
    }

    finish(result);
    return result;
  }

 private:
  Energy system_energy() const { return combiner_.buffers_energy() + storage_.total_energy(); }

  std::string active_lmm_cap() const {
    if (sc_.icu.enabled) return icu_.active_cstore();
    std::vector<int> node = storage_.supply_node();
    return node.size() == 1 ? storage_.caps[node.front()].id : std::string{};
  }

  Current measured_current() const {
    int idx = storage_.index_of(icu_.active_cstore());
    Capacitance c = idx >= 0 ? storage_.caps[idx].capacitance : Capacitance{};
    return discharge_current_from_vdiff(lmm_state_.v_diff, c, sc_.lmm.gain());
  }

  void disconnect_load(TimeNs now, RunResult& result, const char* reason) {
    if (load_disconnected_) return;
    load_disconnected_ = true;
    TraceEvent ev;
    ev.t_ns = now;
    ev.source = ModuleId::icu;
    ev.kind = EventKind::load_disconnected;
    ev.label = reason;
    result.trace.push(ev);
  }

  void update_task_events(TimeNs now, RunResult& result) {
    const LoadBurst* burst = load_disconnected_ ? nullptr : timeline_->burst_at(now);
    if (burst == current_burst_) return;
    if (current_burst_) {
      TraceEvent ev;
      ev.t_ns = now;
      ev.source = ModuleId::load;
      ev.kind = EventKind::task_end;
      ev.label = current_burst_->name;
      ev.payload.push_back({"cycle", static_cast<double>(current_burst_->cycle), ""});
      ev.payload.push_back({"index", static_cast<double>(current_burst_->index_in_cycle), ""});
      result.trace.push(std::move(ev));
    }
    if (burst) {
      TraceEvent ev;
      ev.t_ns = now;
      ev.source = ModuleId::load;
      ev.kind = EventKind::task_start;
      ev.label = burst->name;
      ev.payload.push_back({"cycle", static_cast<double>(burst->cycle), ""});
      ev.payload.push_back({"index", static_cast<double>(burst->index_in_cycle), ""});
      ev.payload.push_back({"current", burst->current.value, "A"});
      result.trace.push(std::move(ev));
    }
    current_burst_ = burst;
  }

  void accumulate_ledger(const CombinerStepEffects& fx, const StorageEffects& fx_storage,
                         Energy stored_now, Energy load_removed, Energy e_sys_before) {
    ledger_.delivered += fx.delivered.value;
    ledger_.reg_input += fx.reg_input.value;
    ledger_.reg_loss += fx.reg_loss.value;
    ledger_.stored_from_combiner += stored_now.value;
    ledger_.combiner_discard += fx.discarded.value;
    ledger_.storage_clamp_discard += fx_storage.clamp_discard.value;
    ledger_.load_energy += load_removed.value;
    ledger_.equalization_loss += fx_storage.equalization_loss.value;
    ledger_.leakage_loss += fx_storage.leakage_loss.value;
    ledger_.throttled_charge += fx.throttled.value;

    // conservation: in = storage delta + every loss sink, each step
    double e_sys_after = system_energy().value;
    double residual = fx.delivered.value -
                      ((e_sys_after - e_sys_before.value) + fx.reg_loss.value +
                       fx.discarded.value + fx_storage.clamp_discard.value + load_removed.value +
                       fx_storage.equalization_loss.value + fx_storage.leakage_loss.value);
    double scale = std::max(e_sys_after + ledger_.delivered, 1e-9);
    double rel = std::fabs(residual) / scale;
    if (rel > ledger_.max_step_residual_rel) ledger_.max_step_residual_rel = rel;
  }

  void check_exclusivity() {
    int discharging = 0;
    for (size_t s = 0; s < combiner_.source_count(); ++s)
      for (size_t b = 0; b < 2; ++b)
        if (combiner_.buffer(s, b).phase == BufferPhase::discharging) discharging++;
    if (discharging > 1) ledger_.exclusivity_violations++;
  }

  void sample_timeseries(RunResult& result, TimeNs t) {
    auto row = [&](std::string signal, double value, const char* unit) {
      result.timeseries.push_back({t, std::move(signal), value, unit});
    };
    for (const auto& c : storage_.caps) row("v_" + c.id, c.voltage.value, "V");
    row("v_supply", storage_.node_voltage(storage_.supply_node()).value, "V");
    row("v_diff", lmm_state_.v_diff.value, "V");
    row("comparator", lmm_state_.comparator_out ? 1.0 : 0.0, "");
    double i_load = 0;
    if (timeline_) i_load = timeline_->current_at(t, load_disconnected_).value;
    row("i_load", i_load, "A");
    for (size_t s = 0; s < combiner_.source_count(); ++s) {
      row("v_buf" + std::to_string(s) + "a", combiner_.buffer(s, 0).voltage.value, "V");
      row("v_buf" + std::to_string(s) + "b", combiner_.buffer(s, 1).voltage.value, "V");
    }
    row("n_pulses", static_cast<double>(combiner_.counters().n_pulses), "");
    row("delivered", ledger_.delivered, "J");
    row("stored", ledger_.stored_from_combiner, "J");
    row("buffers_energy", combiner_.buffers_energy().value, "J");
    row("load_energy", ledger_.load_energy, "J");
  }

  void finish(RunResult& result) {
    ledger_.buffers_final = combiner_.buffers_energy().value;
    ledger_.storage_final = storage_.total_energy().value;

    TraceEvent ev;
    ev.t_ns = sc_.duration_ns;
    ev.source = ModuleId::engine;
    ev.kind = EventKind::run_end;
    auto put = [&](const char* key, double v, const char* unit) {
      ev.payload.push_back({key, v, unit});
    };
    put("delivered", ledger_.delivered, "J");
    put("reg_input", ledger_.reg_input, "J");
    put("reg_loss", ledger_.reg_loss, "J");
    put("stored_from_combiner", ledger_.stored_from_combiner, "J");
    put("combiner_discard", ledger_.combiner_discard, "J");
    put("storage_clamp_discard", ledger_.storage_clamp_discard, "J");
    put("load_energy", ledger_.load_energy, "J");
    put("equalization_loss", ledger_.equalization_loss, "J");
    put("leakage_loss", ledger_.leakage_loss, "J");
    put("throttled_charge", ledger_.throttled_charge, "C");
    put("buffers_initial", ledger_.buffers_initial, "J");
    put("buffers_final", ledger_.buffers_final, "J");
    put("storage_initial", ledger_.storage_initial, "J");
    put("storage_final", ledger_.storage_final, "J");
    put("max_step_residual_rel", ledger_.max_step_residual_rel, "");
    put("exclusivity_violations", static_cast<double>(ledger_.exclusivity_violations), "");
    put("n_pulses", static_cast<double>(combiner_.counters().n_pulses), "");
    put("n_over_true", static_cast<double>(combiner_.counters().n_over_true), "");
    put("n_over_observed", static_cast<double>(combiner_.counters().n_over_observed), "");
    put("e_store_true", combiner_.counters().e_store_true.value, "J");
    std::vector<int> node = storage_.combiner_node();
    if (combiner_node_stable_ && !node.empty()) {
      put("v_combiner_final", storage_.node_voltage(node).value, "V");
      put("c_combiner_node", storage_.node_capacitance(node).value, "F");
    }
    result.trace.push(std::move(ev));

    result.ledger = ledger_;
    result.metrics = compute_metrics(sc_, result.trace, result.timeseries);
  }

  const Scenario& sc_;
  Combiner combiner_;
  StorageArray storage_;
  Icu icu_;
  LmmState lmm_state_;
  LmmStepFactors lmm_factors_;
  std::optional<LoadTimeline> timeline_;

  LedgerTotals ledger_;
  std::vector<IcuAction> pending_actions_;
  std::vector<LmmEdge> pending_edges_;
  const LoadBurst* current_burst_{nullptr};
  std::string active_supply_cap_;
  bool load_disconnected_{false};
  bool no_supply_flagged_{false};
  bool combiner_node_stable_{true};
};

}  // namespace detail

// Derives every reported number from the trace and sampled signals alone, so
// anything in the metrics map can be recomputed from a written bundle.
inline Metrics compute_metrics(const Scenario& sc, const Trace& trace,
                               const std::vector<TimeseriesRow>& timeseries) {
  Metrics m;
  if (trace.empty()) return m;

  const TraceEvent* end_ev = nullptr;
  for (const auto& e : trace.events())
    if (e.kind == EventKind::run_end) end_ev = &e;
  if (!end_ev) return m;

  auto put = [&](const std::string& name, double v, UnitKind kind) {
    m.values[name] = {v, kind};
  };

  // ledger-level metrics
  double delivered = end_ev->value_or("delivered", 0);
  double stored = end_ev->value_or("stored_from_combiner", 0);
  double buffers_delta = end_ev->value_or("buffers_final", 0) - end_ev->value_or("buffers_initial", 0);
  double conv_denom = delivered - buffers_delta;
  put("efficiency", conv_denom > 1e-15 ? stored / conv_denom : 0.0, UnitKind::dimensionless);
  put("efficiency_raw", delivered > 1e-15 ? stored / delivered : 0.0, UnitKind::dimensionless);
  put("delivered", delivered, UnitKind::energy);
  put("stored_from_combiner", stored, UnitKind::energy);
  put("load_energy", end_ev->value_or("load_energy", 0), UnitKind::energy);
  put("ledger_max_step_residual_rel", end_ev->value_or("max_step_residual_rel", 0),
      UnitKind::dimensionless);
  put("exclusivity_violations", end_ev->value_or("exclusivity_violations", 0),
      UnitKind::dimensionless);

  // pulse-count energy estimates and their error against the true transfer
  double n_pulses = end_ev->value_or("n_pulses", 0);
  double n_over_obs = end_ev->value_or("n_over_observed", 0);
  double e_true = end_ev->value_or("e_store_true", 0);
  double e_nom = sc.combiner.e_cap_nominal.value;
  double e_over = sc.combiner.e_cap_over.value;
  double est_corrected = (n_pulses - n_over_obs) * e_nom + n_over_obs * e_over;
  double est_uncorrected = n_pulses * e_nom;
  put("pulses_total", n_pulses, UnitKind::dimensionless);
  put("e_store_true", e_true, UnitKind::energy);
  put("e_store_estimate_corrected", est_corrected, UnitKind::energy);
  put("e_store_estimate_uncorrected", est_uncorrected, UnitKind::energy);
  if (e_true > 0) {
    put("estimate_error_corrected", std::fabs(est_corrected - e_true) / e_true,
        UnitKind::dimensionless);
    put("estimate_error_uncorrected", std::fabs(est_uncorrected - e_true) / e_true,
        UnitKind::dimensionless);
  }

  // buffer calibration from accumulated energy (only meaningful when the
  // combiner target kept its composition; the engine omits the voltage
  // payload otherwise)
  if (const PayloadEntry* v_end = end_ev->find("v_combiner_final");
      v_end && v_end->value > 0 && est_corrected > 0) {
    double c_est = 2.0 * est_corrected / (v_end->value * v_end->value);
    double c_actual = end_ev->value_or("c_combiner_node", 0);
    put("calibrated_capacitance", c_est, UnitKind::capacitance);
    if (c_actual > 0)
      put("calibration_error", std::fabs(c_est - c_actual) / c_actual, UnitKind::dimensionless);
  }

  // per-signal time series lookup for windowed ledger deltas
  std::map<std::string, std::vector<std::pair<TimeNs, double>>> signals;
  for (const auto& row : timeseries) signals[row.signal].push_back({row.t_ns, row.value});
  auto signal_at = [&](const std::string& name, TimeNs t) -> double {
    auto it = signals.find(name);
    if (it == signals.end() || it->second.empty()) return 0.0;
    const auto& rows = it->second;
    auto pos = std::upper_bound(rows.begin(), rows.end(), t,
                                [](TimeNs lhs, const auto& r) { return lhs < r.first; });
    if (pos == rows.begin()) return rows.front().second;
    return std::prev(pos)->second;
  };

  // source-schedule windows (one per staircase point)
  std::vector<TimeNs> bounds = schedule_boundaries(sc.sources);
  bounds.push_back(sc.duration_ns);
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  const auto& events = trace.events();
  for (size_t w = 0; w + 1 < bounds.size(); ++w) {
    SegmentStats seg;
    seg.start_ns = bounds[w];
    seg.end_ns = bounds[w + 1];
    if (seg.end_ns <= seg.start_ns) continue;
    for (const auto& s : sc.sources) seg.i_true += s.current_at(seg.start_ns).value;
    for (const auto& e : events) {
      if (e.kind != EventKind::pulse_emitted) continue;
      if (e.t_ns < seg.start_ns || e.t_ns >= seg.end_ns) continue;
      seg.n_pulses++;
      if (e.value_or("over_observed", 0) > 0.5) seg.n_over++;
    }
    double window_s = static_cast<double>(seg.end_ns - seg.start_ns) * 1e-9;
    seg.pulse_rate = seg.n_pulses / window_s;
    double c = sc.combiner.c_temp.value;
    double q = c * (static_cast<double>(seg.n_pulses - seg.n_over) * sc.combiner.band().value +
                    static_cast<double>(seg.n_over) * sc.combiner.over_band().value);
    seg.i_estimate = q / window_s;
    seg.delivered = signal_at("delivered", seg.end_ns) - signal_at("delivered", seg.start_ns);
    seg.stored = signal_at("stored", seg.end_ns) - signal_at("stored", seg.start_ns);
    seg.buffers_delta =
        signal_at("buffers_energy", seg.end_ns) - signal_at("buffers_energy", seg.start_ns);
    double denom = seg.delivered - seg.buffers_delta;
    seg.efficiency = denom > 1e-15 ? seg.stored / denom : 0.0;
    seg.efficiency_raw = seg.delivered > 1e-15 ? seg.stored / seg.delivered : 0.0;
    m.segments.push_back(seg);
  }

  // task bursts vs interrupt edges and controller readings
  struct Edge {
    TimeNs t;
    bool rise;
  };
  std::vector<Edge> edges;
  for (const auto& e : events) {
    if (e.kind == EventKind::lmm_interrupt_rise) edges.push_back({e.t_ns, true});
    if (e.kind == EventKind::lmm_interrupt_fall) edges.push_back({e.t_ns, false});
  }

  const TraceEvent* open_start = nullptr;
  for (const auto& e : events) {
    if (e.kind == EventKind::task_start) {
      open_start = &e;
      continue;
    }
    if (e.kind != EventKind::task_end || !open_start) continue;

    TaskStats task;
    task.name = open_start->label;
    task.cycle = static_cast<int>(open_start->value_or("cycle", 0));
    task.index_in_cycle = static_cast<int>(open_start->value_or("index", 0));
    task.start_ns = open_start->t_ns;
    task.end_ns = e.t_ns;
    task.current = open_start->value_or("current", 0);
    open_start = nullptr;

    bool high_at_end = false;
    for (const auto& edge : edges) {
      if (edge.t <= task.end_ns) high_at_end = edge.rise;
      if (edge.rise && edge.t >= task.start_ns && edge.t < task.end_ns && !task.detected) {
        task.detected = true;
        task.t1 = static_cast<double>(edge.t - task.start_ns) * 1e-9;
      }
      if (!edge.rise && high_at_end && edge.t >= task.end_ns && task.t2 < 0)
        task.t2 = static_cast<double>(edge.t - task.end_ns) * 1e-9;
    }

    // worst relative reconstruction error over settled controller readings
    constexpr TimeNs kSettleFloorNs = 10'000'000;
    for (const auto& s : events) {
      if (s.kind != EventKind::sample_taken) continue;
      if (s.t_ns < task.start_ns + kSettleFloorNs || s.t_ns >= task.end_ns) continue;
      if (task.current <= 0) continue;
      double err = std::fabs(s.value_or("current", 0) - task.current) / task.current;
      if (err > task.recon_error) task.recon_error = err;
    }
    m.tasks.push_back(task);
  }

  double recon_max = -1;
  for (const auto& t : m.tasks)
    if (t.current >= 0.003 - 1e-12 && t.recon_error >= 0) recon_max = std::max(recon_max, t.recon_error);
  if (recon_max >= 0) put("recon_error_max", recon_max, UnitKind::dimensionless);

  // load disconnection
  double disconnects = 0;
  for (const auto& e : events) {
    if (e.kind != EventKind::load_disconnected) continue;
    disconnects += 1;
    if (disconnects == 1) {
      put("disconnect_time", static_cast<double>(e.t_ns) * 1e-9, UnitKind::duration);
      TimeNs last_start = -1;
      for (const auto& s : events)
        if (s.kind == EventKind::task_start && s.t_ns <= e.t_ns) last_start = s.t_ns;
      if (last_start >= 0)
        put("disconnect_after_task_start", static_cast<double>(e.t_ns - last_start) * 1e-9,
            UnitKind::duration);
    }
  }
  put("disconnect_count", disconnects, UnitKind::dimensionless);

  return m;
}

// Executes a validated scenario. Throws std::invalid_argument carrying the
// first validation diagnostic when the scenario is malformed.
inline RunResult run(const Scenario& scenario) {
  std::vector<std::string> diagnostics = scenario.validate();
  if (!diagnostics.empty()) {
    std::string msg = "scenario invalid:";
    for (const auto& d : diagnostics) msg += "\n  " + d;
    throw std::invalid_argument(msg);
  }
  detail::EngineRun engine(scenario);
  return engine.run();
}

}  // namespace infiniteen
