// Simulation time as integer nanosecond ticks. All scheduling arithmetic is
// integral, so repeated stepping is drift-free and traces are reproducible.

#pragma once

#include <cstdint>
#include <stdexcept>

#include "infiniteen/quantity.hpp"

namespace infiniteen {

using TimeNs = std::int64_t;

constexpr TimeNs kNsPerSecond = 1'000'000'000;

constexpr Seconds to_seconds(TimeNs t) { return Seconds{static_cast<double>(t) * 1e-9}; }

// Rounds to the nearest nanosecond; scenario durations are exact multiples of
// common step sizes so this is lossless in practice.
constexpr TimeNs to_time_ns(Seconds s) {
  double ns = s.value * 1e9;
  return static_cast<TimeNs>(ns < 0 ? ns - 0.5 : ns + 0.5);
}

struct SimClock {
  TimeNs step_ns{100'000};  // 100 us default integration step
  std::int64_t ticks{0};

  constexpr TimeNs now_ns() const { return ticks * step_ns; }
  constexpr Seconds now() const { return to_seconds(now_ns()); }
  constexpr Seconds step() const { return to_seconds(step_ns); }

  void advance() {
    if (step_ns <= 0) throw std::invalid_argument("SimClock: step must be positive");
    ++ticks;
  }
};

}  // namespace infiniteen
