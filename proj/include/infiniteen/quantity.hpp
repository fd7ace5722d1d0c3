// Dimension-checked physical quantities on a (volt, ampere, second) basis.
//
// Every scalar the simulator touches carries its dimension in the type, so
// mixing a current into a voltage is a compile error while the legal
// combinations (C*V -> charge, 1/2*C*V^2 -> energy, V/R -> current, ...)
// fall out of the exponent arithmetic. Runtime values parsed from scenario
// files use UnitKind and are converted to typed quantities at config build
// time.

#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace infiniteen {

template <int VoltExp, int AmpExp, int SecExp>
struct Quantity {
  double value{0.0};

  constexpr Quantity() = default;
  constexpr explicit Quantity(double v) : value(v) {}

  constexpr Quantity operator+(Quantity rhs) const { return Quantity{value + rhs.value}; }
  constexpr Quantity operator-(Quantity rhs) const { return Quantity{value - rhs.value}; }
  constexpr Quantity operator-() const { return Quantity{-value}; }
  constexpr Quantity& operator+=(Quantity rhs) { value += rhs.value; return *this; }
  constexpr Quantity& operator-=(Quantity rhs) { value -= rhs.value; return *this; }

  constexpr Quantity operator*(double s) const { return Quantity{value * s}; }
  constexpr Quantity operator/(double s) const { return Quantity{value / s}; }

  constexpr auto operator<=>(const Quantity&) const = default;

  constexpr bool finite() const { return std::isfinite(value); }
};

template <int V, int A, int S>
constexpr Quantity<V, A, S> operator*(double s, Quantity<V, A, S> q) {
  return Quantity<V, A, S>{s * q.value};
}

template <int V1, int A1, int S1, int V2, int A2, int S2>
constexpr Quantity<V1 + V2, A1 + A2, S1 + S2> operator*(Quantity<V1, A1, S1> a,
                                                        Quantity<V2, A2, S2> b) {
  return Quantity<V1 + V2, A1 + A2, S1 + S2>{a.value * b.value};
}

template <int V1, int A1, int S1, int V2, int A2, int S2>
constexpr Quantity<V1 - V2, A1 - A2, S1 - S2> operator/(Quantity<V1, A1, S1> a,
                                                        Quantity<V2, A2, S2> b) {
  return Quantity<V1 - V2, A1 - A2, S1 - S2>{a.value / b.value};
}

template <int V, int A, int S>
  requires(V % 2 == 0 && A % 2 == 0 && S % 2 == 0)
constexpr Quantity<V / 2, A / 2, S / 2> sqrt(Quantity<V, A, S> q) {
  return Quantity<V / 2, A / 2, S / 2>{std::sqrt(q.value)};
}

template <int V, int A, int S>
constexpr Quantity<V, A, S> abs(Quantity<V, A, S> q) {
  return Quantity<V, A, S>{std::fabs(q.value)};
}

using Scalar      = Quantity<0, 0, 0>;
using Voltage     = Quantity<1, 0, 0>;
using Current     = Quantity<0, 1, 0>;
using Seconds     = Quantity<0, 0, 1>;
using Charge      = Quantity<0, 1, 1>;   // A*s
using Capacitance = Quantity<-1, 1, 1>;  // A*s/V
using Energy      = Quantity<1, 1, 1>;   // V*A*s
using Power       = Quantity<1, 1, 0>;
using Resistance  = Quantity<1, -1, 0>;

constexpr Voltage volts(double v) { return Voltage{v}; }
constexpr Voltage millivolts(double v) { return Voltage{v * 1e-3}; }
constexpr Current amps(double v) { return Current{v}; }
constexpr Current milliamps(double v) { return Current{v * 1e-3}; }
constexpr Current microamps(double v) { return Current{v * 1e-6}; }
constexpr Capacitance farads(double v) { return Capacitance{v}; }
constexpr Capacitance millifarads(double v) { return Capacitance{v * 1e-3}; }
constexpr Capacitance microfarads(double v) { return Capacitance{v * 1e-6}; }
constexpr Energy joules(double v) { return Energy{v}; }
constexpr Energy millijoules(double v) { return Energy{v * 1e-3}; }
constexpr Energy microjoules(double v) { return Energy{v * 1e-6}; }
constexpr Seconds seconds(double v) { return Seconds{v}; }
constexpr Seconds milliseconds(double v) { return Seconds{v * 1e-3}; }
constexpr Seconds microseconds(double v) { return Seconds{v * 1e-6}; }
constexpr Resistance ohms(double v) { return Resistance{v}; }
constexpr Resistance kiloohms(double v) { return Resistance{v * 1e3}; }

// Energy held by a capacitance charged to a voltage: 1/2*C*V^2.
constexpr Energy energy_in_capacitor(Capacitance c, Voltage v) {
  return 0.5 * (c * v * v);
}

// --- runtime units (scenario file surface) ---------------------------------

enum class UnitKind {
  voltage,
  current,
  capacitance,
  energy,
  duration,
  resistance,
  dimensionless,
};

std::string_view unit_kind_name(UnitKind k);

struct ParsedQuantity {
  double si_value{0.0};
  UnitKind kind{UnitKind::dimensionless};
};

// Parses "3.2 V", "500 uF", "0.93" (dimensionless), "100 kohm". The space
// between number and unit is optional. Returns nullopt with a message on
// malformed input; a bare number parses as dimensionless.
std::optional<ParsedQuantity> parse_quantity(std::string_view text, std::string* error = nullptr);

// Canonical serialization, SI value with the base unit symbol ("0.0032 V").
std::string format_quantity(const ParsedQuantity& q);

// ---------------------------------------------------------------------------

inline std::string_view unit_kind_name(UnitKind k) {
  switch (k) {
    case UnitKind::voltage: return "V";
    case UnitKind::current: return "A";
    case UnitKind::capacitance: return "F";
    case UnitKind::energy: return "J";
    case UnitKind::duration: return "s";
    case UnitKind::resistance: return "ohm";
    case UnitKind::dimensionless: return "";
  }
  return "";
}

namespace detail {

struct UnitEntry {
  std::string_view symbol;
  double scale;
  UnitKind kind;
};

// Longest-match table; "u" and the UTF-8 micro sign are both accepted.
inline constexpr UnitEntry kUnitTable[] = {
    {"mV", 1e-3, UnitKind::voltage},
    {"uV", 1e-6, UnitKind::voltage},
    {"\xc2\xb5" "V", 1e-6, UnitKind::voltage},
    {"V", 1.0, UnitKind::voltage},
    {"mA", 1e-3, UnitKind::current},
    {"uA", 1e-6, UnitKind::current},
    {"\xc2\xb5" "A", 1e-6, UnitKind::current},
    {"nA", 1e-9, UnitKind::current},
    {"A", 1.0, UnitKind::current},
    {"mF", 1e-3, UnitKind::capacitance},
    {"uF", 1e-6, UnitKind::capacitance},
    {"\xc2\xb5" "F", 1e-6, UnitKind::capacitance},
    {"nF", 1e-9, UnitKind::capacitance},
    {"F", 1.0, UnitKind::capacitance},
    {"mJ", 1e-3, UnitKind::energy},
    {"uJ", 1e-6, UnitKind::energy},
    {"\xc2\xb5" "J", 1e-6, UnitKind::energy},
    {"J", 1.0, UnitKind::energy},
    {"ms", 1e-3, UnitKind::duration},
    {"us", 1e-6, UnitKind::duration},
    {"\xc2\xb5" "s", 1e-6, UnitKind::duration},
    {"ns", 1e-9, UnitKind::duration},
    {"s", 1.0, UnitKind::duration},
    {"kohm", 1e3, UnitKind::resistance},
    {"Mohm", 1e6, UnitKind::resistance},
    {"ohm", 1.0, UnitKind::resistance},
};

}  // namespace detail

inline std::optional<ParsedQuantity> parse_quantity(std::string_view text, std::string* error) {
  auto fail = [&](std::string msg) -> std::optional<ParsedQuantity> {
    if (error) *error = std::move(msg);
    return std::nullopt;
  };

  size_t begin = text.find_first_not_of(" \t");
  size_t end = text.find_last_not_of(" \t");
  if (begin == std::string_view::npos) return fail("empty quantity");
  text = text.substr(begin, end - begin + 1);

  // split numeric prefix
  size_t pos = 0;
  if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) pos++;
  size_t digits = pos;
  bool seen_dot = false;
  while (pos < text.size() &&
         (std::isdigit(static_cast<unsigned char>(text[pos])) || (!seen_dot && text[pos] == '.'))) {
    if (text[pos] == '.') seen_dot = true;
    pos++;
  }
  if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
    size_t epos = pos + 1;
    if (epos < text.size() && (text[epos] == '+' || text[epos] == '-')) epos++;
    size_t edigits = epos;
    while (epos < text.size() && std::isdigit(static_cast<unsigned char>(text[epos]))) epos++;
    if (epos > edigits) pos = epos;
  }
  if (pos == digits) return fail("no numeric value in '" + std::string(text) + "'");

  double number;
  try {
    number = std::stod(std::string(text.substr(0, pos)));
  } catch (const std::exception&) {
    return fail("bad number in '" + std::string(text) + "'");
  }

  std::string_view unit = text.substr(pos);
  if (size_t ws = unit.find_first_not_of(" \t"); ws != std::string_view::npos)
    unit = unit.substr(ws);
  else
    unit = {};

  if (unit.empty()) return ParsedQuantity{number, UnitKind::dimensionless};
  for (const auto& entry : detail::kUnitTable) {
    if (unit == entry.symbol) return ParsedQuantity{number * entry.scale, entry.kind};
  }
  return fail("unknown unit '" + std::string(unit) + "'");
}

inline std::string format_quantity(const ParsedQuantity& q) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", q.si_value);
  std::string out = buf;
  auto suffix = unit_kind_name(q.kind);
  if (!suffix.empty()) {
    out += ' ';
    out += suffix;
  }
  return out;
}

}  // namespace infiniteen
