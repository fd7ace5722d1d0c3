#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "infiniteen/source.hpp"

using namespace infiniteen;

namespace {

SourceModel staircase(double start_ma, double step_ma, double stop_ma, TimeNs dwell_ns) {
  SourceModel s;
  s.id = "stair";
  TimeNs t = 0;
  for (double i = start_ma; i <= stop_ma + 1e-9; i += step_ma) {
    s.segments.push_back({t, milliamps(i)});
    t += dwell_ns;
  }
  return s;
}

}  // namespace

TEST_CASE("constant source holds its current") {
  SourceModel s{"solar", {{0, milliamps(1)}}};
  CHECK(s.current_at(0).value == Catch::Approx(1e-3));
  CHECK(s.current_at(5 * kNsPerSecond).value == Catch::Approx(1e-3));
}

TEST_CASE("staircase schedule is right-continuous") {
  SourceModel s = staircase(0.5, 1.0, 20.0, 15 * kNsPerSecond);
  // t = 16 s falls in the second segment (1.5 mA)
  CHECK(s.current_at(16 * kNsPerSecond).value == Catch::Approx(1.5e-3));
  CHECK(s.current_at(15 * kNsPerSecond).value == Catch::Approx(1.5e-3));
  CHECK(s.current_at(15 * kNsPerSecond - 1).value == Catch::Approx(0.5e-3));
}

TEST_CASE("outage segment drops to zero") {
  SourceModel s{"teg", {{0, milliamps(1)}, {10 * kNsPerSecond, Current{}}}};
  CHECK(s.current_at(12 * kNsPerSecond).value == 0.0);
}

TEST_CASE("schedule integral matches per-step accumulation oracle") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> ui(0.0, 20e-3);
  std::uniform_int_distribution<int> useg(1, 8);
  const TimeNs step = 100'000;  // 100 us
  for (int trial = 0; trial < 20; ++trial) {
    SourceModel s;
    s.id = "rand";
    TimeNs t = 0;
    int n = useg(rng);
    for (int k = 0; k < n; ++k) {
      s.segments.push_back({t, amps(ui(rng))});
      t += (1 + (rng() % 50)) * 10 * step;
    }
    std::vector<std::string> d;
    s.validate(d);
    REQUIRE(d.empty());

    TimeNs horizon = t + 10 * step;
    // oracle: brute-force step accumulation
    double q_oracle = 0;
    for (TimeNs tt = 0; tt < horizon; tt += step) q_oracle += s.current_at(tt).value * 1e-4;
    // closed form over segments
    double q_closed = 0;
    for (size_t k = 0; k < s.segments.size(); ++k) {
      TimeNs a = s.segments[k].start_ns;
      TimeNs b = k + 1 < s.segments.size() ? s.segments[k + 1].start_ns : horizon;
      q_closed += s.segments[k].current.value * static_cast<double>(b - a) * 1e-9;
    }
    CHECK(q_oracle == Catch::Approx(q_closed).epsilon(1e-9));
  }
}

TEST_CASE("schedule validation rejects bad shapes") {
  std::vector<std::string> d;
  SourceModel empty{"x", {}};
  empty.validate(d);
  CHECK_FALSE(d.empty());

  d.clear();
  SourceModel late{"x", {{5, milliamps(1)}}};
  late.validate(d);
  CHECK_FALSE(d.empty());

  d.clear();
  SourceModel negative{"x", {{0, amps(-1)}}};
  negative.validate(d);
  CHECK_FALSE(d.empty());

  d.clear();
  SourceModel unsorted{"x", {{0, milliamps(1)}, {10, milliamps(2)}, {10, milliamps(3)}}};
  unsorted.validate(d);
  CHECK_FALSE(d.empty());
}
