// Harvest sources modeled as piecewise-constant current schedules, the
// simulation stand-in for a bench supply in constant-current mode.

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "infiniteen/quantity.hpp"
#include "infiniteen/sim_time.hpp"

namespace infiniteen {

struct SourceSegment {
  TimeNs start_ns{0};
  Current current{};
};

struct SourceModel {
  std::string id;
  std::vector<SourceSegment> segments;  // strictly increasing start times, first at 0

  // Right-continuous lookup: the segment containing t wins.
  Current current_at(TimeNs t_ns) const {
    Current result{};
    for (const auto& seg : segments) {
      if (seg.start_ns <= t_ns)
        result = seg.current;
      else
        break;
    }
    return result;
  }

  void validate(std::vector<std::string>& diagnostics) const {
    if (segments.empty()) {
      diagnostics.push_back("source '" + id + "': schedule is empty");
      return;
    }
    if (segments.front().start_ns != 0)
      diagnostics.push_back("source '" + id + "': first segment must start at 0 s");
    for (size_t i = 0; i < segments.size(); ++i) {
      if (segments[i].current.value < 0 || !segments[i].current.finite())
        diagnostics.push_back("source '" + id + "': segment currents must be finite and >= 0");
      if (i > 0 && segments[i].start_ns <= segments[i - 1].start_ns)
        diagnostics.push_back("source '" + id + "': segment start times must be strictly increasing");
    }
  }
};

// Combined schedule boundaries across several sources, used to window
// per-staircase-point metrics. Returns sorted unique start times.
inline std::vector<TimeNs> schedule_boundaries(const std::vector<SourceModel>& sources) {
  std::vector<TimeNs> ts;
  for (const auto& s : sources)
    for (const auto& seg : s.segments) ts.push_back(seg.start_ns);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

}  // namespace infiniteen
