// Scenario file surface: a strict line-based format with one section per
// subsystem. Every physical value carries a unit suffix; bare numbers are
// accepted only for genuinely dimensionless keys. Unknown sections or keys
// are errors, missing keys fall back to the documented defaults.
//
//   [sources]
//   solar = 0 s: 0.25 mA, 15 s: 0.5 mA
//   [combiner]
//   v_h = 3.2 V
//   ...
//   [load]
//   task = task1 5 mA 50 ms
//   task = task2 1 mA 50 ms x2
//
// The serializer emits a canonical form; parse(serialize(s)) is an identity.

#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "infiniteen/engine.hpp"

namespace infiniteen {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ":" + std::to_string(col) + ": " +
                           message),
        line_(line),
        col_(col) {}
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

namespace scenario_detail {

inline std::string trim(std::string_view s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  size_t b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(s.substr(start)));
      return out;
    }
    out.push_back(trim(s.substr(start, pos - start)));
    start = pos + 1;
  }
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream is{std::string(s)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

struct KeyContext {
  int line{0};
  [[noreturn]] void fail(const std::string& message) const { throw ParseError(line, 1, message); }
};

inline double require_kind(const std::string& value, UnitKind kind, const KeyContext& ctx) {
  std::string err;
  auto q = parse_quantity(value, &err);
  if (!q) ctx.fail(err);
  if (q->kind == UnitKind::dimensionless && kind != UnitKind::dimensionless)
    ctx.fail("'" + value + "' needs a unit (" + std::string(unit_kind_name(kind)) + ")");
  if (q->kind != kind)
    ctx.fail("'" + value + "' has the wrong unit, expected " +
             std::string(unit_kind_name(kind)));
  return q->si_value;
}

inline TimeNs require_duration(const std::string& value, const KeyContext& ctx) {
  return to_time_ns(Seconds{require_kind(value, UnitKind::duration, ctx)});
}

inline double require_bare(const std::string& value, const KeyContext& ctx) {
  std::string err;
  auto q = parse_quantity(value, &err);
  if (!q) ctx.fail(err);
  if (q->kind != UnitKind::dimensionless) ctx.fail("'" + value + "' must be a bare number");
  return q->si_value;
}

inline long long require_int(const std::string& value, const KeyContext& ctx) {
  double v = require_bare(value, ctx);
  auto i = static_cast<long long>(v);
  if (static_cast<double>(i) != v) ctx.fail("'" + value + "' must be an integer");
  return i;
}

inline bool require_flag(const std::string& value, const KeyContext& ctx) {
  if (value == "on" || value == "true") return true;
  if (value == "off" || value == "false") return false;
  ctx.fail("'" + value + "' must be on or off");
}

inline SourceModel parse_source_schedule(const std::string& id, const std::string& value,
                                         const KeyContext& ctx) {
  SourceModel s;
  s.id = id;
  for (const std::string& part : split(value, ',')) {
    size_t colon = part.find(':');
    if (colon == std::string::npos)
      ctx.fail("source segment '" + part + "' must look like '0 s: 1 mA'");
    TimeNs start = require_duration(trim(part.substr(0, colon)), ctx);
    double amps_v = require_kind(trim(part.substr(colon + 1)), UnitKind::current, ctx);
    s.segments.push_back({start, Current{amps_v}});
  }
  return s;
}

inline TaskSpec parse_task(const std::string& value, const KeyContext& ctx) {
  std::vector<std::string> tok = split_ws(value);
  // name CURRENT_VALUE CURRENT_UNIT DURATION_VALUE DURATION_UNIT [xN]
  if (tok.size() < 5) ctx.fail("task '" + value + "' must look like 'task1 5 mA 50 ms [x2]'");
  TaskSpec t;
  t.name = tok[0];
  t.current = Current{require_kind(tok[1] + " " + tok[2], UnitKind::current, ctx)};
  t.duration_ns = require_duration(tok[3] + " " + tok[4], ctx);
  if (tok.size() >= 6) {
    const std::string& rep = tok[5];
    if (rep.size() < 2 || rep[0] != 'x') ctx.fail("task repeat must look like 'x2'");
    t.repeat = static_cast<int>(require_int(rep.substr(1), ctx));
  }
  if (tok.size() > 6) ctx.fail("trailing tokens after task definition");
  return t;
}

inline LookupTable parse_lookup(const std::string& value, const KeyContext& ctx) {
  LookupTable table;
  for (const std::string& part : split(value, ',')) {
    std::vector<std::string> tok = split_ws(part);
    if (tok.size() == 2 && tok[1] == "else") {
      table.rules.push_back({Current{std::numeric_limits<double>::infinity()}, tok[0]});
    } else if (tok.size() == 3) {
      table.rules.push_back({Current{require_kind(tok[1] + " " + tok[2], UnitKind::current, ctx)},
                             tok[0]});
    } else {
      ctx.fail("lookup entry '" + part + "' must look like 'c1 1 mA' or 'c4 else'");
    }
  }
  if (table.rules.empty() || !std::isinf(table.rules.back().upper_bound.value))
    ctx.fail("lookup table must end with a '<cap> else' rule");
  return table;
}

// One key assignment inside a section. Shared by the parser and by sweep
// parameter overrides ("section.key" paths).
inline void set_key(Scenario& sc, const std::string& section, const std::string& key,
                    const std::string& value, const KeyContext& ctx) {
  auto storage_index = [&](const std::string& id) -> int {
    int idx = sc.storage.index_of(id);
    if (idx < 0) {
      sc.storage.caps.push_back({id, Capacitance{}, Voltage{}, CapMode::disconnected, Current{}});
      idx = static_cast<int>(sc.storage.caps.size()) - 1;
    }
    return idx;
  };

  if (section == "sources") {
    for (const auto& s : sc.sources)
      if (s.id == key) ctx.fail("duplicate source '" + key + "'");
    sc.sources.push_back(parse_source_schedule(key, value, ctx));
    return;
  }

  if (section == "combiner") {
    auto& c = sc.combiner;
    if (key == "v_h") c.v_h = Voltage{require_kind(value, UnitKind::voltage, ctx)};
    else if (key == "v_l") c.v_l = Voltage{require_kind(value, UnitKind::voltage, ctx)};
    else if (key == "v_overshoot") c.v_overshoot = Voltage{require_kind(value, UnitKind::voltage, ctx)};
    else if (key == "c_temp") c.c_temp = Capacitance{require_kind(value, UnitKind::capacitance, ctx)};
    else if (key == "e_cap_nominal") c.e_cap_nominal = Energy{require_kind(value, UnitKind::energy, ctx)};
    else if (key == "e_cap_over") c.e_cap_over = Energy{require_kind(value, UnitKind::energy, ctx)};
    else if (key == "efficiency") c.regulator.efficiency = Scalar{require_bare(value, ctx)};
    else if (key == "i_limit") c.regulator.input_current_limit = Current{require_kind(value, UnitKind::current, ctx)};
    else if (key == "correction") c.correction_enabled = require_flag(value, ctx);
    else ctx.fail("unknown key 'combiner." + key + "'");
    return;
  }

  if (section == "storage") {
    if (key == "v_max") {
      sc.storage.v_max = Voltage{require_kind(value, UnitKind::voltage, ctx)};
      return;
    }
    if (key == "v_min_supply") {
      sc.storage.v_min_supply = Voltage{require_kind(value, UnitKind::voltage, ctx)};
      return;
    }
    size_t dot = key.find('.');
    if (dot == std::string::npos) ctx.fail("unknown key 'storage." + key + "'");
    int idx = storage_index(key.substr(0, dot));
    std::string field = key.substr(dot + 1);
    StorageCap& cap = sc.storage.caps[static_cast<size_t>(idx)];
    if (field == "capacitance") cap.capacitance = Capacitance{require_kind(value, UnitKind::capacitance, ctx)};
    else if (field == "voltage") cap.voltage = Voltage{require_kind(value, UnitKind::voltage, ctx)};
    else if (field == "leakage") cap.leakage_current = Current{require_kind(value, UnitKind::current, ctx)};
    else if (field == "mode") {
      auto mode = cap_mode_from_name(value);
      if (!mode) ctx.fail("unknown capacitor mode '" + value + "'");
      cap.mode = *mode;
    } else ctx.fail("unknown key 'storage." + key + "'");
    return;
  }

  if (section == "lmm") {
    auto& l = sc.lmm;
    if (key == "r_f") l.r_f = Resistance{require_kind(value, UnitKind::resistance, ctx)};
    else if (key == "c_1") l.c_1 = Capacitance{require_kind(value, UnitKind::capacitance, ctx)};
    else if (key == "tau_rise") l.tau_rise = Seconds{require_kind(value, UnitKind::duration, ctx)};
    else if (key == "tau_fall") l.tau_fall = Seconds{require_kind(value, UnitKind::duration, ctx)};
    else if (key == "v_ref") l.v_ref_default = Voltage{require_kind(value, UnitKind::voltage, ctx)};
    else if (key == "hysteresis") l.hysteresis = Voltage{require_kind(value, UnitKind::voltage, ctx)};
    else if (key == "rail") l.rail = Voltage{require_kind(value, UnitKind::voltage, ctx)};
    else if (key.rfind("v_ref.", 0) == 0) {
      std::string cap = key.substr(6);
      Voltage v{require_kind(value, UnitKind::voltage, ctx)};
      for (auto& [id, ref] : l.v_ref_per_cap)
        if (id == cap) {
          ref = v;
          return;
        }
      l.v_ref_per_cap.push_back({cap, v});
    } else ctx.fail("unknown key 'lmm." + key + "'");
    return;
  }

  if (section == "icu") {
    auto& i = sc.icu;
    i.enabled = true;
    if (key == "sample_period") i.sample_period_ns = require_duration(value, ctx);
    else if (key == "settle_delay") i.settle_delay_ns = require_duration(value, ctx);
    else if (key == "margin") i.abnormality_margin_ns = require_duration(value, ctx);
    else if (key == "idle_threshold") i.idle_threshold = Current{require_kind(value, UnitKind::current, ctx)};
    else if (key == "tasks_per_cycle") i.tasks_per_cycle = static_cast<int>(require_int(value, ctx));
    else if (key == "initial_cstore") i.initial_cstore = value;
    else if (key == "lookup") i.table = parse_lookup(value, ctx);
    else ctx.fail("unknown key 'icu." + key + "'");
    return;
  }

  if (section == "load") {
    auto& l = sc.load;
    l.present = true;
    if (key == "task") l.profile.tasks.push_back(parse_task(value, ctx));
    else if (key == "gap") l.profile.inter_task_gap_ns = require_duration(value, ctx);
    else if (key == "sleep_current") l.profile.sleep_current = Current{require_kind(value, UnitKind::current, ctx)};
    else if (key == "cycles") l.cycles = static_cast<int>(require_int(value, ctx));
    else if (key == "start_delay") l.start_delay_ns = require_duration(value, ctx);
    else ctx.fail("unknown key 'load." + key + "'");
    return;
  }

  if (section == "run") {
    if (key == "name") sc.name = value;
    else if (key == "description") sc.description = value;
    else if (key == "duration") sc.duration_ns = require_duration(value, ctx);
    else if (key == "step") sc.step_ns = require_duration(value, ctx);
    else if (key == "report_period") sc.report_period_ns = require_duration(value, ctx);
    else if (key == "seed") sc.seed = static_cast<std::uint64_t>(require_int(value, ctx));
    else ctx.fail("unknown key 'run." + key + "'");
    return;
  }

  ctx.fail("unknown section '[" + section + "]'");
}

}  // namespace scenario_detail

inline Scenario parse_scenario_text(std::string_view text) {
  using namespace scenario_detail;
  Scenario sc;
  sc.icu.enabled = false;  // only an [icu] section turns the controller on

  std::string section;
  int line_no = 0;
  size_t pos = 0;
  bool saw_anything = false;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view raw =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    line_no++;

    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    saw_anything = true;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, static_cast<int>(line.size()), "expected ']'");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ParseError(line_no, 2, "empty section name");
      continue;
    }

    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(line_no, 1, "expected 'key = value' or a [section] header");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, 1, "empty key");
    if (value.empty()) throw ParseError(line_no, static_cast<int>(eq + 2), "empty value");
    if (section.empty()) throw ParseError(line_no, 1, "key outside of any section");

    KeyContext ctx{line_no};
    set_key(sc, section, key, value, ctx);
  }
  if (!saw_anything) throw ParseError(1, 1, "empty scenario file");
  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

// Sweep-style single-key override, path = "section.key" (capacitor and
// per-cap reference keys keep their inner dot, e.g. "storage.c1.voltage").
inline void apply_override(Scenario& sc, const std::string& path, const std::string& value) {
  size_t dot = path.find('.');
  if (dot == std::string::npos)
    throw std::invalid_argument("unknown parameter '" + path + "' (use section.key)");
  scenario_detail::KeyContext ctx{0};
  try {
    scenario_detail::set_key(sc, path.substr(0, dot), path.substr(dot + 1), value, ctx);
  } catch (const ParseError& e) {
    throw std::invalid_argument("parameter '" + path + "': " + e.what());
  }
}

inline std::string serialize_scenario(const Scenario& sc) {
  std::ostringstream out;
  auto quantity = [](double v, UnitKind k) { return format_quantity({v, k}); };
  auto duration = [&](TimeNs t) { return quantity(static_cast<double>(t) * 1e-9, UnitKind::duration); };

  out << "[run]\n";
  out << "name = " << sc.name << "\n";
  if (!sc.description.empty()) out << "description = " << sc.description << "\n";
  out << "duration = " << duration(sc.duration_ns) << "\n";
  out << "step = " << duration(sc.step_ns) << "\n";
  out << "report_period = " << duration(sc.report_period_ns) << "\n";
  if (sc.seed != 0) out << "seed = " << sc.seed << "\n";

  out << "\n[sources]\n";
  for (const auto& s : sc.sources) {
    out << s.id << " = ";
    for (size_t k = 0; k < s.segments.size(); ++k) {
      if (k) out << ", ";
      out << duration(s.segments[k].start_ns) << ": "
          << quantity(s.segments[k].current.value, UnitKind::current);
    }
    out << "\n";
  }

  const auto& c = sc.combiner;
  out << "\n[combiner]\n";
  out << "v_h = " << quantity(c.v_h.value, UnitKind::voltage) << "\n";
  out << "v_l = " << quantity(c.v_l.value, UnitKind::voltage) << "\n";
  out << "v_overshoot = " << quantity(c.v_overshoot.value, UnitKind::voltage) << "\n";
  out << "c_temp = " << quantity(c.c_temp.value, UnitKind::capacitance) << "\n";
  out << "e_cap_nominal = " << quantity(c.e_cap_nominal.value, UnitKind::energy) << "\n";
  out << "e_cap_over = " << quantity(c.e_cap_over.value, UnitKind::energy) << "\n";
  out << "efficiency = " << format_double(c.regulator.efficiency.value) << "\n";
  out << "i_limit = " << quantity(c.regulator.input_current_limit.value, UnitKind::current) << "\n";
  out << "correction = " << (c.correction_enabled ? "on" : "off") << "\n";

  out << "\n[storage]\n";
  out << "v_max = " << quantity(sc.storage.v_max.value, UnitKind::voltage) << "\n";
  out << "v_min_supply = " << quantity(sc.storage.v_min_supply.value, UnitKind::voltage) << "\n";
  for (const auto& cap : sc.storage.caps) {
    out << cap.id << ".capacitance = " << quantity(cap.capacitance.value, UnitKind::capacitance)
        << "\n";
    out << cap.id << ".voltage = " << quantity(cap.voltage.value, UnitKind::voltage) << "\n";
    out << cap.id << ".mode = " << cap_mode_name(cap.mode) << "\n";
    if (cap.leakage_current.value != 0)
      out << cap.id << ".leakage = " << quantity(cap.leakage_current.value, UnitKind::current)
          << "\n";
  }

  const auto& l = sc.lmm;
  out << "\n[lmm]\n";
  out << "r_f = " << quantity(l.r_f.value, UnitKind::resistance) << "\n";
  out << "c_1 = " << quantity(l.c_1.value, UnitKind::capacitance) << "\n";
  out << "tau_rise = " << quantity(l.tau_rise.value, UnitKind::duration) << "\n";
  out << "tau_fall = " << quantity(l.tau_fall.value, UnitKind::duration) << "\n";
  out << "v_ref = " << quantity(l.v_ref_default.value, UnitKind::voltage) << "\n";
  for (const auto& [id, v] : l.v_ref_per_cap)
    out << "v_ref." << id << " = " << quantity(v.value, UnitKind::voltage) << "\n";
  if (l.hysteresis.value != 0)
    out << "hysteresis = " << quantity(l.hysteresis.value, UnitKind::voltage) << "\n";
  out << "rail = " << quantity(l.rail.value, UnitKind::voltage) << "\n";

  if (sc.icu.enabled) {
    const auto& i = sc.icu;
    out << "\n[icu]\n";
    out << "sample_period = " << duration(i.sample_period_ns) << "\n";
    out << "settle_delay = " << duration(i.settle_delay_ns) << "\n";
    out << "margin = " << duration(i.abnormality_margin_ns) << "\n";
    out << "idle_threshold = " << quantity(i.idle_threshold.value, UnitKind::current) << "\n";
    out << "tasks_per_cycle = " << i.tasks_per_cycle << "\n";
    out << "initial_cstore = " << i.initial_cstore << "\n";
    out << "lookup = ";
    for (size_t k = 0; k < i.table.rules.size(); ++k) {
      if (k) out << ", ";
      const auto& rule = i.table.rules[k];
      if (std::isinf(rule.upper_bound.value))
        out << rule.cap_id << " else";
      else
        out << rule.cap_id << " " << quantity(rule.upper_bound.value, UnitKind::current);
    }
    out << "\n";
  }

  if (sc.load.present) {
    out << "\n[load]\n";
    out << "gap = " << duration(sc.load.profile.inter_task_gap_ns) << "\n";
    out << "sleep_current = " << quantity(sc.load.profile.sleep_current.value, UnitKind::current)
        << "\n";
    out << "cycles = " << sc.load.cycles << "\n";
    out << "start_delay = " << duration(sc.load.start_delay_ns) << "\n";
    for (const auto& t : sc.load.profile.tasks) {
      out << "task = " << t.name << " " << quantity(t.current.value, UnitKind::current) << " "
          << duration(t.duration_ns);
      if (t.repeat != 1) out << " x" << t.repeat;
      out << "\n";
    }
  }

  return out.str();
}

}  // namespace infiniteen
