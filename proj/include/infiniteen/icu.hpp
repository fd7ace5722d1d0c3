// Control-unit state machine. Wakes on LMM interrupts, measures the
// discharge current once the differentiator has settled, selects the storage
// capacitor from the lookup table, then keeps sampling every 50 ms. Task
// durations are learned from the first completed execution of each burst
// index; a burst still running one margin past its baseline at a sampling
// instant is declared abnormal and the load is cut.

#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "infiniteen/quantity.hpp"
#include "infiniteen/trace.hpp"

namespace infiniteen {

struct LookupRule {
  Current upper_bound{};  // inclusive; the last rule is open-ended
  std::string cap_id;
};

struct LookupTable {
  std::vector<LookupRule> rules;

  const std::string& select(Current i) const {
    for (size_t k = 0; k + 1 < rules.size(); ++k)
      if (i <= rules[k].upper_bound) return rules[k].cap_id;
    return rules.back().cap_id;
  }

  void validate(std::vector<std::string>& diagnostics) const {
    if (rules.empty()) {
      diagnostics.push_back("icu: lookup table is empty");
      return;
    }
    for (size_t k = 0; k + 1 < rules.size(); ++k) {
      if (rules[k].upper_bound.value < 0)
        diagnostics.push_back("icu: lookup bounds must be >= 0");
      if (k > 0 && rules[k].upper_bound <= rules[k - 1].upper_bound)
        diagnostics.push_back("icu: lookup bounds must be strictly increasing");
    }
  }
};

// Table I defaults: c1 up to 1 mA, c2 to 10 mA, c3 to 20 mA, c4 beyond.
inline LookupTable default_lookup_table() {
  return {{
      {milliamps(1), "c1"},
      {milliamps(10), "c2"},
      {milliamps(20), "c3"},
      {Current{std::numeric_limits<double>::infinity()}, "c4"},
  }};
}

struct IcuConfig {
  bool enabled{true};
  TimeNs sample_period_ns{50'000'000};
  TimeNs settle_delay_ns{10'000'000};      // wait after an edge before reading v_diff
  TimeNs abnormality_margin_ns{50'000'000};
  Current idle_threshold{microamps(200)};  // below this a reading counts as sleep
  int tasks_per_cycle{0};                  // 0 = every burst gets its own baseline slot
  std::string initial_cstore{"c1"};
  LookupTable table{default_lookup_table()};

  void validate(std::vector<std::string>& diagnostics) const {
    if (!enabled) return;
    if (sample_period_ns <= 0) diagnostics.push_back("icu: sample period must be > 0");
    if (settle_delay_ns < 0) diagnostics.push_back("icu: settle delay must be >= 0");
    if (abnormality_margin_ns < 0) diagnostics.push_back("icu: abnormality margin must be >= 0");
    if (idle_threshold.value < 0) diagnostics.push_back("icu: idle threshold must be >= 0");
    if (tasks_per_cycle < 0) diagnostics.push_back("icu: tasks per cycle must be >= 0");
    if (initial_cstore.empty()) diagnostics.push_back("icu: initial cstore required");
    table.validate(diagnostics);
  }
};

enum class IcuMode { dormant, monitoring };
enum class LmmEdge { rise, fall };

struct IcuAction {
  enum class Type { select_cstore, disconnect_load };
  Type type{Type::select_cstore};
  std::string cap_id;
};

struct IcuStepResult {
  std::vector<IcuAction> actions;
  std::vector<TraceEvent> events;
};

class Icu {
 public:
  Icu() = default;
  explicit Icu(IcuConfig cfg) : cfg_(std::move(cfg)) { active_cstore_ = cfg_.initial_cstore; }

  const IcuConfig& config() const { return cfg_; }
  IcuMode mode() const { return mode_; }
  const std::string& active_cstore() const { return active_cstore_; }
  bool abnormality_flag() const { return abnormality_flag_; }
  const std::map<int, TimeNs>& task_baselines() const { return baselines_; }

  // Called by the engine for LMM edges (delivered one step after emission).
  // The actual measurement happens settle_delay later via step().
  void notify_edge(LmmEdge edge, TimeNs now) {
    pending_.push_back({now + cfg_.settle_delay_ns, edge});
  }

  // Runs due measurements with the current settled reading.
  IcuStepResult step(TimeNs now, Current measured) {
    IcuStepResult r;
    while (!pending_.empty() && pending_.front().due_ns <= now) {
      PendingRead p = pending_.front();
      pending_.pop_front();
      if (p.edge == LmmEdge::rise)
        on_lmm_interrupt(LmmEdge::rise, measured, now, r);
      else
        on_lmm_interrupt(LmmEdge::fall, measured, now, r);
    }
    if (mode_ == IcuMode::monitoring && next_sample_ns_ >= 0 && now >= next_sample_ns_) {
      on_sample_timer(measured, now, r);
      next_sample_ns_ += cfg_.sample_period_ns;
    }
    return r;
  }

  // Interrupt service. On a rise: classify the current, switch the storage
  // capacitor when the table disagrees with the present selection, and arm
  // the periodic sampling timer. On a fall: record the reading and close the
  // burst if the load has gone idle.
  void on_lmm_interrupt(LmmEdge edge, Current measured, TimeNs now, IcuStepResult& r) {
    emit_sample(now, measured, edge == LmmEdge::rise ? "rise-read" : "fall-read", r);
    if (edge == LmmEdge::rise) {
      mode_ = IcuMode::monitoring;
      maybe_switch(measured, now, r);
      next_sample_ns_ = now + cfg_.sample_period_ns;
      if (!burst_active_ && measured >= cfg_.idle_threshold) begin_burst(now);
    } else {
      if (burst_active_ && measured < cfg_.idle_threshold) end_burst(now);
    }
  }

  // Periodic measurement: re-selects the capacitor, tracks burst lifetimes
  // and checks the active burst against its learned baseline.
  void on_sample_timer(Current measured, TimeNs now, IcuStepResult& r) {
    emit_sample(now, measured, "timer", r);
    maybe_switch(measured, now, r);
    bool active = measured >= cfg_.idle_threshold;
    if (active && !burst_active_) begin_burst(now);
    if (active && burst_active_) {
      TimeNs elapsed = now - burst_start_ns_;
      auto it = baselines_.find(burst_index_);
      if (it != baselines_.end() && elapsed > it->second + cfg_.abnormality_margin_ns &&
          !abnormality_flag_) {
        abnormality_flag_ = true;
        r.actions.push_back({IcuAction::Type::disconnect_load, {}});
        TraceEvent ev;
        ev.t_ns = now;
        ev.source = ModuleId::icu;
        ev.kind = EventKind::warning;
        ev.label = "abnormal-task";
        ev.payload.push_back({"task_index", static_cast<double>(burst_index_), ""});
        ev.payload.push_back({"elapsed", static_cast<double>(elapsed) * 1e-9, "s"});
        ev.payload.push_back({"baseline", static_cast<double>(it->second) * 1e-9, "s"});
        r.events.push_back(std::move(ev));
      }
    }
    if (!active && burst_active_) end_burst(now);
  }

 private:
  struct PendingRead {
    TimeNs due_ns;
    LmmEdge edge;
  };

  void emit_sample(TimeNs now, Current measured, const char* why, IcuStepResult& r) {
    TraceEvent ev;
    ev.t_ns = now;
    ev.source = ModuleId::icu;
    ev.kind = EventKind::sample_taken;
    ev.label = why;
    ev.payload.push_back({"current", measured.value, "A"});
    ev.payload.push_back({"cap", static_cast<double>(cap_ordinal(active_cstore_)), ""});
    if (burst_active_)
      ev.payload.push_back({"elapsed", static_cast<double>(now - burst_start_ns_) * 1e-9, "s"});
    r.events.push_back(std::move(ev));
  }

  void maybe_switch(Current measured, TimeNs, IcuStepResult& r) {
    const std::string& want = cfg_.table.select(measured);
    if (want != active_cstore_) {
      r.actions.push_back({IcuAction::Type::select_cstore, want});
      active_cstore_ = want;
    }
  }

  void begin_burst(TimeNs now) {
    burst_active_ = true;
    burst_start_ns_ = now;
    burst_index_ = cfg_.tasks_per_cycle > 0 ? burst_count_ % cfg_.tasks_per_cycle : burst_count_;
  }

  void end_burst(TimeNs now) {
    TimeNs duration = now - burst_start_ns_;
    baselines_.emplace(burst_index_, duration);  // first completion wins
    burst_active_ = false;
    burst_count_++;
  }

  static int cap_ordinal(const std::string& id) {
    if (id.size() == 2 && id[0] == 'c' && id[1] >= '0' && id[1] <= '9') return id[1] - '0';
    return -1;
  }

  IcuConfig cfg_;
  IcuMode mode_{IcuMode::dormant};
  std::string active_cstore_;
  std::map<int, TimeNs> baselines_;
  bool abnormality_flag_{false};
  bool burst_active_{false};
  TimeNs burst_start_ns_{0};
  int burst_index_{0};
  int burst_count_{0};
  TimeNs next_sample_ns_{-1};
  std::deque<PendingRead> pending_;
};

}  // namespace infiniteen
