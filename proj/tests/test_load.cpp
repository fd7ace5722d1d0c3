#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "infiniteen/load.hpp"

using namespace infiniteen;

TEST_CASE("reference profile encodes the four tasks") {
  LoadProfile p = regular_profile();
  REQUIRE(p.tasks.size() == 4);
  CHECK(p.tasks[0].current.value == Catch::Approx(5e-3));
  CHECK(p.tasks[0].duration_ns == 50'000'000);
  CHECK(p.tasks[1].repeat == 2);
  CHECK(p.tasks[3].current.value == Catch::Approx(25e-3));
  CHECK(p.bursts_per_cycle() == 5);

  LoadProfile d = defective_profile();
  CHECK(d.tasks[2].duration_ns == 300'000'000);  // task3 stretched
  CHECK(d.tasks[2].current.value == Catch::Approx(12e-3));
}

TEST_CASE("timeline lookup returns task current, sleep between tasks, zero when cut") {
  LoadTimeline tl = build_timeline(regular_profile(), 1, 500'000'000);

  // inside task4 (25 mA for 100 ms)
  const LoadBurst& task4 = tl.bursts.back();
  CHECK(task4.name == "task4");
  CHECK(tl.current_at(task4.start_ns + 50'000'000, false).value == Catch::Approx(25e-3));
  CHECK(task4.end_ns - task4.start_ns == 100'000'000);

  // past the final task: sleep current
  CHECK(tl.current_at(task4.end_ns + 1, false).value == 0.0);
  // before the first task
  CHECK(tl.current_at(0, false).value == 0.0);
  // disconnected beats everything
  CHECK(tl.current_at(task4.start_ns + 1, true).value == 0.0);
}

TEST_CASE("burst indices repeat across cycles") {
  LoadTimeline tl = build_timeline(regular_profile(), 2, 0);
  REQUIRE(tl.bursts.size() == 10);
  CHECK(tl.bursts[0].index_in_cycle == 0);
  CHECK(tl.bursts[1].index_in_cycle == 1);
  CHECK(tl.bursts[2].index_in_cycle == 2);  // task2 repeat unrolls
  CHECK(tl.bursts[2].name == "task2");
  CHECK(tl.bursts[5].index_in_cycle == 0);
  CHECK(tl.bursts[5].cycle == 1);
  CHECK(tl.bursts_per_cycle == 5);
}

TEST_CASE("profile charge equals the per-step integration oracle") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> ui(0.0, 30e-3);
  std::uniform_int_distribution<int> udur(1, 20);
  const TimeNs step = 100'000;

  for (int trial = 0; trial < 10; ++trial) {
    LoadProfile p;
    int n_tasks = 1 + static_cast<int>(rng() % 5);
    for (int k = 0; k < n_tasks; ++k)
      p.tasks.push_back({"t" + std::to_string(k), amps(ui(rng)),
                         static_cast<TimeNs>(udur(rng)) * 10'000'000, 1 + static_cast<int>(rng() % 3)});
    p.inter_task_gap_ns = static_cast<TimeNs>(udur(rng)) * 10'000'000;
    p.sleep_current = microamps(50);
    std::vector<std::string> d;
    p.validate(d);
    REQUIRE(d.empty());

    LoadTimeline tl = build_timeline(p, 2, 100'000'000);
    TimeNs horizon = tl.end_ns() + 200'000'000;

    double q_oracle = 0;
    for (TimeNs t = 0; t < horizon; t += step) q_oracle += tl.current_at(t, false).value * 1e-4;

    double q_closed = 0;
    for (const auto& b : tl.bursts)
      q_closed += b.current.value * static_cast<double>(b.end_ns - b.start_ns) * 1e-9;
    // sleep fills every non-burst instant
    double burst_time = 0;
    for (const auto& b : tl.bursts) burst_time += static_cast<double>(b.end_ns - b.start_ns) * 1e-9;
    q_closed += p.sleep_current.value * (static_cast<double>(horizon) * 1e-9 - burst_time);

    CHECK(q_oracle == Catch::Approx(q_closed).epsilon(1e-9));
  }
}

TEST_CASE("profile validation names the offending task") {
  LoadProfile p;
  p.tasks.push_back({"bad", amps(-1), 0, 0});
  std::vector<std::string> d;
  p.validate(d);
  CHECK(d.size() == 3);
  for (const auto& msg : d) CHECK(msg.find("bad") != std::string::npos);
}
