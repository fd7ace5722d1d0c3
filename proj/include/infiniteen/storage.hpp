// Reconfigurable supercapacitor array. Each capacitor routes to the combiner
// output rail, the supply rail, both, or neither. Caps sharing a rail behave
// as one parallel node: equal voltage, charge split in proportion to
// capacitance. Connecting caps at unequal voltages equalizes instantly and
// the associated loss is reported to the energy ledger.

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "infiniteen/quantity.hpp"
#include "infiniteen/trace.hpp"

namespace infiniteen {

enum class CapMode { to_combiner, to_supply, both, disconnected };

inline std::string_view cap_mode_name(CapMode m) {
  switch (m) {
    case CapMode::to_combiner: return "to-combiner";
    case CapMode::to_supply: return "to-supply";
    case CapMode::both: return "both";
    case CapMode::disconnected: return "disconnected";
  }
  return "?";
}

inline std::optional<CapMode> cap_mode_from_name(std::string_view s) {
  if (s == "to-combiner") return CapMode::to_combiner;
  if (s == "to-supply") return CapMode::to_supply;
  if (s == "both") return CapMode::both;
  if (s == "disconnected") return CapMode::disconnected;
  return std::nullopt;
}

struct StorageCap {
  std::string id;  // "c1".."c4"
  Capacitance capacitance{};
  Voltage voltage{};
  CapMode mode{CapMode::disconnected};
  Current leakage_current{};
};

struct StorageEffects {
  Energy equalization_loss{};  // burned when mismatched caps are paralleled
  Energy clamp_discard{};      // charge refused at v_max
  Energy leakage_loss{};
  std::vector<TraceEvent> events;
};

class StorageArray {
 public:
  std::vector<StorageCap> caps;
  Voltage v_max{volts(3.3)};
  Voltage v_min_supply{volts(1.8)};

  void validate(std::vector<std::string>& diagnostics) const {
    for (const auto& c : caps) {
      if (c.capacitance.value <= 0 || !c.capacitance.finite())
        diagnostics.push_back("storage '" + c.id + "': capacitance must be finite and > 0");
      if (c.voltage.value < 0 || c.voltage > v_max)
        diagnostics.push_back("storage '" + c.id + "': voltage must lie in [0, v_max]");
      if (c.leakage_current.value < 0)
        diagnostics.push_back("storage '" + c.id + "': leakage must be >= 0");
    }
    for (size_t i = 0; i < caps.size(); ++i)
      for (size_t j = i + 1; j < caps.size(); ++j)
        if (caps[i].id == caps[j].id)
          diagnostics.push_back("storage: duplicate capacitor id '" + caps[i].id + "'");
  }

  int index_of(std::string_view id) const {
    for (size_t i = 0; i < caps.size(); ++i)
      if (caps[i].id == id) return static_cast<int>(i);
    return -1;
  }

  Energy total_energy() const {
    Energy e{};
    for (const auto& c : caps) e += energy_in_capacitor(c.capacitance, c.voltage);
    return e;
  }

  // Rail membership. A cap in mode `both` bridges the rails, collapsing them
  // into a single electrical node.
  bool rails_bridged() const {
    for (const auto& c : caps)
      if (c.mode == CapMode::both) return true;
    return false;
  }

  std::vector<int> supply_node() const {
    std::vector<int> out;
    bool bridged = rails_bridged();
    for (size_t i = 0; i < caps.size(); ++i) {
      CapMode m = caps[i].mode;
      if (m == CapMode::to_supply || m == CapMode::both ||
          (bridged && m == CapMode::to_combiner))
        out.push_back(static_cast<int>(i));
    }
    return out;
  }

  std::vector<int> combiner_node() const {
    std::vector<int> out;
    bool bridged = rails_bridged();
    for (size_t i = 0; i < caps.size(); ++i) {
      CapMode m = caps[i].mode;
      if (m == CapMode::to_combiner || m == CapMode::both ||
          (bridged && m == CapMode::to_supply))
        out.push_back(static_cast<int>(i));
    }
    return out;
  }

  Capacitance node_capacitance(const std::vector<int>& node) const {
    Capacitance c{};
    for (int i : node) c += caps[i].capacitance;
    return c;
  }

  // Node voltage; caps on a node are always equalized so any member reports it.
  Voltage node_voltage(const std::vector<int>& node) const {
    return node.empty() ? Voltage{} : caps[node.front()].voltage;
  }

  // Reconfigures one capacitor. Setting the same mode again is a no-op and
  // emits nothing. New parallel groupings equalize immediately.
  void set_mode(std::string_view id, CapMode mode, TimeNs now, StorageEffects& fx) {
    int idx = index_of(id);
    if (idx < 0) throw std::invalid_argument("storage: unknown capacitor id '" + std::string(id) + "'");
    if (caps[idx].mode == mode) return;

    TraceEvent ev;
    ev.t_ns = now;
    ev.source = ModuleId::storage;
    ev.kind = EventKind::cstore_switch;
    ev.label = caps[idx].id;
    ev.payload.push_back({"old_mode", static_cast<double>(static_cast<int>(caps[idx].mode)), ""});
    ev.payload.push_back({"new_mode", static_cast<double>(static_cast<int>(mode)), ""});
    ev.payload.push_back({"voltage", caps[idx].voltage.value, "V"});
    fx.events.push_back(std::move(ev));

    caps[idx].mode = mode;
    equalize_nodes(now, fx);
  }

  // Charge-sharing equalization: V_eq = sum(C_i V_i)/sum(C_i), loss logged.
  void equalize_nodes(TimeNs now, StorageEffects& fx) {
    equalize_group(supply_node(), now, fx);
    if (!rails_bridged()) equalize_group(combiner_node(), now, fx);
    // when bridged both calls would touch the same merged group
  }

  // Adds energy from the regulator into the combiner node. Returns the energy
  // actually stored; any excess above v_max is discarded and flagged.
  Energy charge_node(const std::vector<int>& node, Energy de, TimeNs now, StorageEffects& fx) {
    if (node.empty() || de.value <= 0) return Energy{};
    Capacitance c_node = node_capacitance(node);
    Voltage v0 = node_voltage(node);
    Voltage v1 = sqrt(v0 * v0 + 2.0 * (de / c_node));
    Energy stored = de;
    if (v1 > v_max) {
      Energy absorbed = energy_in_capacitor(c_node, v_max) - energy_in_capacitor(c_node, v0);
      Energy discarded = de - absorbed;
      fx.clamp_discard += discarded;
      v1 = v_max;
      stored = absorbed;
      TraceEvent ev;
      ev.t_ns = now;
      ev.source = ModuleId::storage;
      ev.kind = EventKind::warning;
      ev.label = "storage-vmax-clamp";
      ev.payload.push_back({"discarded", discarded.value, "J"});
      fx.events.push_back(std::move(ev));
    }
    for (int i : node) caps[i].voltage = v1;
    return stored;
  }

  // Single-capacitor charge (combiner-rail contract used by unit tests and
  // by the engine when the node is a singleton).
  Energy apply_charge(std::string_view id, Energy de, TimeNs now, StorageEffects& fx) {
    int idx = index_of(id);
    if (idx < 0) throw std::invalid_argument("storage: unknown capacitor id '" + std::string(id) + "'");
    if (caps[idx].mode != CapMode::to_combiner && caps[idx].mode != CapMode::both)
      throw std::logic_error("storage: capacitor '" + std::string(id) + "' is not connected to the combiner");
    if (de.value < 0) throw std::invalid_argument("storage: charge energy must be >= 0");
    return charge_node({idx}, de, now, fx);
  }

  struct DischargeResult {
    Energy removed{};
    bool no_supply{false};
    bool undervoltage{false};
  };

  // Draws load_current from the supply node for dt. Charge splits across the
  // parallel caps in proportion to capacitance (identical dv). Reports
  // no-supply when the node is empty and undervoltage when the node falls
  // below v_min_supply.
  DischargeResult apply_discharge(Current load_current, Seconds dt) {
    DischargeResult r;
    std::vector<int> node = supply_node();
    if (node.empty()) {
      r.no_supply = load_current.value > 0;
      return r;
    }
    if (load_current.value > 0) {
      Capacitance c_node = node_capacitance(node);
      Voltage v0 = node_voltage(node);
      Charge q = load_current * dt;
      Voltage v1 = v0 - q / c_node;
      if (v1.value < 0) v1 = Voltage{};  // fully drained
      for (int i : node) caps[i].voltage = v1;
      r.removed = energy_in_capacitor(c_node, v0) - energy_in_capacitor(c_node, v1);
    }
    if (node_voltage(node) < v_min_supply) r.undervoltage = true;
    return r;
  }

  // Per-cap leakage, drained independently of rail membership.
  void apply_leakage(Seconds dt, StorageEffects& fx) {
    for (auto& c : caps) {
      if (c.leakage_current.value <= 0) continue;
      Voltage v0 = c.voltage;
      Voltage v1 = v0 - (c.leakage_current * dt) / c.capacitance;
      if (v1.value < 0) v1 = Voltage{};
      c.voltage = v1;
      fx.leakage_loss += energy_in_capacitor(c.capacitance, v0) - energy_in_capacitor(c.capacitance, v1);
    }
  }

 private:
  void equalize_group(const std::vector<int>& node, TimeNs now, StorageEffects& fx) {
    if (node.size() < 2) return;
    Voltage v_first = caps[node.front()].voltage;
    bool uniform = true;
    for (int i : node)
      if (std::fabs(caps[i].voltage.value - v_first.value) > 1e-12) uniform = false;
    if (uniform) return;

    Energy before{};
    Charge q_total{};
    Capacitance c_total{};
    for (int i : node) {
      before += energy_in_capacitor(caps[i].capacitance, caps[i].voltage);
      q_total += caps[i].capacitance * caps[i].voltage;
      c_total += caps[i].capacitance;
    }
    Voltage v_eq = q_total / c_total;
    for (int i : node) caps[i].voltage = v_eq;
    Energy loss = before - energy_in_capacitor(c_total, v_eq);
    fx.equalization_loss += loss;

    TraceEvent ev;
    ev.t_ns = now;
    ev.source = ModuleId::storage;
    ev.kind = EventKind::equalized;
    ev.payload.push_back({"v_eq", v_eq.value, "V"});
    ev.payload.push_back({"loss", loss.value, "J"});
    fx.events.push_back(std::move(ev));
  }
};

// Stock four-capacitor array (15/33/68/100 mF), everything disconnected.
inline StorageArray default_array() {
  StorageArray a;
  a.caps = {
      {"c1", millifarads(15), Voltage{}, CapMode::disconnected, Current{}},
      {"c2", millifarads(33), Voltage{}, CapMode::disconnected, Current{}},
      {"c3", millifarads(68), Voltage{}, CapMode::disconnected, Current{}},
      {"c4", millifarads(100), Voltage{}, CapMode::disconnected, Current{}},
  };
  return a;
}

}  // namespace infiniteen
