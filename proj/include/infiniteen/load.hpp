// Task-based load profiles: ordered constant-current bursts separated by
// sleep gaps. Profiles are expanded to an explicit burst timeline (repeats
// unrolled, optionally several cycles back to back) before a run.

#pragma once

#include <string>
#include <vector>

#include "infiniteen/quantity.hpp"
#include "infiniteen/sim_time.hpp"

namespace infiniteen {

struct TaskSpec {
  std::string name;
  Current current{};
  TimeNs duration_ns{0};
  int repeat{1};
};

struct LoadProfile {
  std::vector<TaskSpec> tasks;
  TimeNs inter_task_gap_ns{500'000'000};  // 500 ms
  Current sleep_current{};

  int bursts_per_cycle() const {
    int n = 0;
    for (const auto& t : tasks) n += t.repeat;
    return n;
  }

  void validate(std::vector<std::string>& diagnostics) const {
    if (tasks.empty()) diagnostics.push_back("load: profile has no tasks");
    for (const auto& t : tasks) {
      if (t.current.value < 0) diagnostics.push_back("load '" + t.name + "': current must be >= 0");
      if (t.duration_ns <= 0) diagnostics.push_back("load '" + t.name + "': duration must be > 0");
      if (t.repeat < 1) diagnostics.push_back("load '" + t.name + "': repeat must be >= 1");
    }
    if (inter_task_gap_ns < 0) diagnostics.push_back("load: inter-task gap must be >= 0");
    if (sleep_current.value < 0) diagnostics.push_back("load: sleep current must be >= 0");
  }
};

struct LoadBurst {
  std::string name;
  int index_in_cycle{0};
  int cycle{0};
  TimeNs start_ns{0};
  TimeNs end_ns{0};
  Current current{};
};

struct LoadTimeline {
  std::vector<LoadBurst> bursts;
  Current sleep_current{};
  int bursts_per_cycle{0};

  TimeNs end_ns() const { return bursts.empty() ? 0 : bursts.back().end_ns; }

  // Active burst current at t, sleep current between bursts, 0 when the
  // supply to the load has been cut.
  Current current_at(TimeNs t_ns, bool disconnected) const {
    if (disconnected) return Current{};
    for (const auto& b : bursts) {
      if (t_ns < b.start_ns) break;
      if (t_ns < b.end_ns) return b.current;
    }
    return sleep_current;
  }

  const LoadBurst* burst_at(TimeNs t_ns) const {
    for (const auto& b : bursts) {
      if (t_ns < b.start_ns) break;
      if (t_ns < b.end_ns) return &b;
    }
    return nullptr;
  }
};

inline LoadTimeline build_timeline(const LoadProfile& profile, int cycles, TimeNs start_delay_ns) {
  LoadTimeline tl;
  tl.sleep_current = profile.sleep_current;
  tl.bursts_per_cycle = profile.bursts_per_cycle();
  TimeNs t = start_delay_ns;
  for (int cycle = 0; cycle < cycles; ++cycle) {
    int index = 0;
    for (const auto& task : profile.tasks) {
      for (int r = 0; r < task.repeat; ++r) {
        tl.bursts.push_back({task.name, index, cycle, t, t + task.duration_ns, task.current});
        t += task.duration_ns + profile.inter_task_gap_ns;
        ++index;
      }
    }
  }
  return tl;
}

// The four-task reference profile: 5 mA/50 ms, 1 mA/50 ms twice,
// 12 mA/100 ms, 25 mA/100 ms with 500 ms sleep gaps.
inline LoadProfile regular_profile() {
  LoadProfile p;
  p.tasks = {
      {"task1", milliamps(5), 50'000'000, 1},
      {"task2", milliamps(1), 50'000'000, 2},
      {"task3", milliamps(12), 100'000'000, 1},
      {"task4", milliamps(25), 100'000'000, 1},
  };
  return p;
}

// Same profile with task3 stretched to 300 ms, standing in for a stuck task.
inline LoadProfile defective_profile() {
  LoadProfile p = regular_profile();
  p.tasks[2].duration_ns = 300'000'000;
  return p;
}

}  // namespace infiniteen
