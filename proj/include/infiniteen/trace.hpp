// Event and time-series vocabulary shared by all modules. A run produces one
// Trace (discrete events, non-decreasing timestamps) plus sampled signal rows.

#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "infiniteen/sim_time.hpp"

namespace infiniteen {

enum class ModuleId { core, source, combiner, storage, lmm, load, icu, engine };

inline std::string_view module_name(ModuleId m) {
  switch (m) {
    case ModuleId::core: return "core";
    case ModuleId::source: return "source";
    case ModuleId::combiner: return "combiner";
    case ModuleId::storage: return "storage";
    case ModuleId::lmm: return "lmm";
    case ModuleId::load: return "load";
    case ModuleId::icu: return "icu";
    case ModuleId::engine: return "engine";
  }
  return "?";
}

enum class EventKind {
  pulse_emitted,
  lmm_interrupt_rise,
  lmm_interrupt_fall,
  cstore_switch,
  load_disconnected,
  task_start,
  task_end,
  sample_taken,
  equalized,
  warning,
  run_end,
};

inline std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::pulse_emitted: return "pulse-emitted";
    case EventKind::lmm_interrupt_rise: return "lmm-interrupt-rise";
    case EventKind::lmm_interrupt_fall: return "lmm-interrupt-fall";
    case EventKind::cstore_switch: return "cstore-switch";
    case EventKind::load_disconnected: return "load-disconnected";
    case EventKind::task_start: return "task-start";
    case EventKind::task_end: return "task-end";
    case EventKind::sample_taken: return "sample-taken";
    case EventKind::equalized: return "equalized";
    case EventKind::warning: return "warning";
    case EventKind::run_end: return "run-end";
  }
  return "?";
}

struct PayloadEntry {
  std::string key;
  double value{0.0};
  std::string unit;  // empty for dimensionless / counters
};

struct TraceEvent {
  TimeNs t_ns{0};
  ModuleId source{ModuleId::engine};
  EventKind kind{EventKind::warning};
  std::string label;  // free-form discriminator (warning name, task name, cap id)
  std::vector<PayloadEntry> payload;

  const PayloadEntry* find(std::string_view key) const {
    for (const auto& e : payload)
      if (e.key == key) return &e;
    return nullptr;
  }
  double value_or(std::string_view key, double fallback) const {
    const PayloadEntry* e = find(key);
    return e ? e->value : fallback;
  }
};

class Trace {
 public:
  void push(TraceEvent ev) {
    if (!events_.empty() && ev.t_ns < events_.back().t_ns)
      throw std::logic_error("Trace: timestamps must be non-decreasing");
    events_.push_back(std::move(ev));
  }

  const std::vector<TraceEvent>& events() const { return events_; }
  bool empty() const { return events_.empty(); }
  size_t size() const { return events_.size(); }

 private:
  std::vector<TraceEvent> events_;
};

struct TimeseriesRow {
  TimeNs t_ns{0};
  std::string signal;
  double value{0.0};
  std::string unit;
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string format_timestamp(TimeNs t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%lld.%09lld", static_cast<long long>(t / kNsPerSecond),
                static_cast<long long>(t % kNsPerSecond));
  return buf;
}

// Flat JSON object {"label":"...","key":value,...}; keys keep insertion order
// so serialized traces are byte-stable.
inline std::string payload_json(const TraceEvent& ev) {
  std::string out = "{";
  bool first = true;
  auto append = [&](std::string_view key, const std::string& rendered) {
    if (!first) out += ',';
    first = false;
    out += '"';
    out += key;
    out += "\":";
    out += rendered;
  };
  if (!ev.label.empty()) append("label", '"' + ev.label + '"');
  for (const auto& e : ev.payload) {
    std::string key = e.key;
    if (!e.unit.empty()) key += "_" + e.unit;
    append(key, format_double(e.value));
  }
  out += '}';
  return out;
}

}  // namespace infiniteen
