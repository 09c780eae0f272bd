#include "histchain/plant.hpp"

#include <algorithm>
#include <cmath>

namespace histchain {

std::string to_string(SensorId s) { return "S" + std::to_string(static_cast<int>(s)); }
std::string to_string(ValveId v) { return "A" + std::to_string(static_cast<int>(v)); }
std::string to_string(PlcId p) { return "plc" + std::to_string(static_cast<int>(p)); }
std::string sensor_name(SensorId s) { return "Sensor " + std::to_string(static_cast<int>(s)); }

void PlantConfig::validate() const {
  if (!(capacity > 0)) {
    throw ConfigError("capacity must be positive");
  }
  for (double r : flow_rate) {
    if (!(r > 0)) {
      throw ConfigError("flow rates must be positive");
    }
  }
  if (!(setpoint_low < setpoint_high)) {
    throw ConfigError("setpoint_low must be below setpoint_high");
  }
}

StepResult step_plant(const Tanks& tanks, const Valves& valves, Tick dt) {
  if (dt < 1) {
    throw std::invalid_argument("step_plant: dt must be >= 1");
  }
  const auto flow = [&](ValveId v) {
    const auto& valve = valves[static_cast<int>(v) - 1];
    return valve.open ? valve.flow_rate * static_cast<double>(dt) : 0.0;
  };

  StepResult out{tanks, false, 0.0, 0.0};
  auto& t1 = out.tanks[0];
  auto& t2 = out.tanks[1];

  out.inflow = flow(ValveId::A1);
  double avail1 = t1.level + out.inflow;
  const double want12 = flow(ValveId::A2);
  const double moved = std::min(want12, avail1);
  if (moved < want12) {
    out.clamped = true;
  }
  avail1 -= moved;
  if (avail1 > t1.capacity) {
    out.clamped = true;
    avail1 = t1.capacity;
  }
  t1.level = avail1;

  double avail2 = t2.level + moved;
  const double want3 = flow(ValveId::A3);
  out.outflow = std::min(want3, avail2);
  if (out.outflow < want3) {
    out.clamped = true;
  }
  avail2 -= out.outflow;
  if (avail2 > t2.capacity) {
    out.clamped = true;
    avail2 = t2.capacity;
  }
  t2.level = avail2;
  return out;
}

SensorReading read_sensor(const Tanks& tanks, SensorId sensor, Tick tick,
                          std::optional<std::uint64_t> noise_seed) {
  const int idx = static_cast<int>(sensor);
  if (idx < 1 || idx > 2) {
    throw ConfigError("unknown sensor id " + std::to_string(idx));
  }
  const auto& tank = tanks[idx - 1];
  auto value = static_cast<std::int64_t>(std::floor(tank.level));
  if (noise_seed) {
    std::uint64_t h = *noise_seed ^ (static_cast<std::uint64_t>(idx) << 56) ^
                      static_cast<std::uint64_t>(tick);
    h = (h ^ (h >> 33)) * 0xff51afd7ed558ccdULL;
    h = (h ^ (h >> 33)) * 0xc4ceb9fe1a85ec53ULL;
    h ^= h >> 33;
    value += static_cast<std::int64_t>(h % 3) - 1;
  }
  const auto cap = static_cast<std::int64_t>(std::floor(tank.capacity));
  value = std::clamp<std::int64_t>(value, 0, cap);
  return SensorReading{sensor, tick, static_cast<std::uint32_t>(value)};
}

SensorId PlcState::sensor() const {
  return plc_id == PlcId::PLC1 ? SensorId::S1 : SensorId::S2;
}

std::vector<ValveId> PlcState::controlled_valves() const {
  if (plc_id == PlcId::PLC1) {
    return {ValveId::A1};
  }
  return {ValveId::A2, ValveId::A3};
}

PlcDecision plc_control(const PlcState& plc, const SensorReading& reading) {
  PlcDecision d;
  d.next = plc;
  if (reading.sensor_id != plc.sensor()) {
    d.accepted = false;
    d.alarm = to_string(plc.plc_id) + " received reading from " + to_string(reading.sensor_id);
    return d;
  }
  const double v = reading.value;
  if (v < plc.setpoint_low) {
    d.next.fill_open = true;
  } else if (v > plc.setpoint_high) {
    d.next.fill_open = false;
  }
  if (plc.plc_id == PlcId::PLC1) {
    d.commands.push_back({ValveId::A1, d.next.fill_open});
    return d;
  }
  if (v > plc.setpoint_high) {
    d.next.drain_open = true;
  } else if (v < plc.setpoint_low) {
    d.next.drain_open = false;
  }
  d.commands.push_back({ValveId::A2, d.next.fill_open});
  d.commands.push_back({ValveId::A3, d.next.drain_open});
  return d;
}

Plant::Plant(PlantConfig config) : config_(config) {
  config_.validate();
  tanks_ = {TankState{1, 0.0, config_.capacity}, TankState{2, 0.0, config_.capacity}};
  valves_ = {ValveState{ValveId::A1, false, config_.flow_rate[0]},
             ValveState{ValveId::A2, false, config_.flow_rate[1]},
             ValveState{ValveId::A3, false, config_.flow_rate[2]}};
  plcs_ = {PlcState{PlcId::PLC1, config_.setpoint_low, config_.setpoint_high},
           PlcState{PlcId::PLC2, config_.setpoint_low, config_.setpoint_high}};
}

std::array<SensorReading, 2> Plant::tick(Tick tick) {
  const auto noise = config_.sensor_noise ? std::optional<std::uint64_t>(config_.seed)
                                          : std::nullopt;
  std::array<SensorReading, 2> readings{read_sensor(tanks_, SensorId::S1, tick, noise),
                                        read_sensor(tanks_, SensorId::S2, tick, noise)};
  for (std::size_t i = 0; i < plcs_.size(); ++i) {
    auto decision = plc_control(plcs_[i], readings[i]);
    plcs_[i] = decision.next;
    for (const auto& cmd : decision.commands) {
      valves_[static_cast<int>(cmd.valve) - 1].open = cmd.open;
    }
  }
  tanks_ = step_plant(tanks_, valves_, 1).tanks;
  return readings;
}

}  // namespace histchain
