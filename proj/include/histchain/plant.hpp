#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "histchain/events.hpp"

namespace histchain {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SensorId : int { S1 = 1, S2 = 2 };
enum class ValveId : int { A1 = 1, A2 = 2, A3 = 3 };
enum class PlcId : int { PLC1 = 1, PLC2 = 2 };

std::string to_string(SensorId s);
std::string to_string(ValveId v);
std::string to_string(PlcId p);
/// "Sensor 1" / "Sensor 2", the names recorded in the historians.
std::string sensor_name(SensorId s);

struct PlantConfig {
  double capacity = 10.0;
  std::array<double, 3> flow_rate{1.0, 1.0, 1.0};  // A1, A2, A3
  double setpoint_low = 3.0;
  double setpoint_high = 6.0;
  bool sensor_noise = false;
  std::uint64_t seed = 0;

  /// Throws ConfigError when a rate is non-positive or setpoints are unordered.
  void validate() const;
};

struct TankState {
  int tank_id = 1;
  double level = 0.0;
  double capacity = 10.0;
};

struct ValveState {
  ValveId valve_id = ValveId::A1;
  bool open = false;
  double flow_rate = 1.0;
};

using Tanks = std::array<TankState, 2>;
using Valves = std::array<ValveState, 3>;

struct SensorReading {
  SensorId sensor_id = SensorId::S1;
  Tick tick = 0;
  std::uint32_t value = 0;
};

struct StepResult {
  Tanks tanks;
  /// True when a level hit the capacity bound or an outflow was limited by an
  /// empty tank; conservation only holds exactly on steps where this is false.
  bool clamped = false;
  double inflow = 0.0;   // through A1
  double outflow = 0.0;  // through A3
};

/// Explicit step of the two-tank difference equations. A1 feeds tank 1, A2
/// moves water from tank 1 to tank 2, A3 drains tank 2.
StepResult step_plant(const Tanks& tanks, const Valves& valves, Tick dt);

/// Floor-quantized level. With `noise_seed` set, adds a deterministic ±1
/// perturbation keyed on (seed, sensor, tick).
SensorReading read_sensor(const Tanks& tanks, SensorId sensor, Tick tick,
                          std::optional<std::uint64_t> noise_seed = std::nullopt);

struct PlcState {
  PlcId plc_id = PlcId::PLC1;
  double setpoint_low = 3.0;
  double setpoint_high = 6.0;
  bool fill_open = false;   // A1 for PLC1, A2 for PLC2
  bool drain_open = false;  // A3, PLC2 only

  SensorId sensor() const;
  std::vector<ValveId> controlled_valves() const;
};

struct ValveCommand {
  ValveId valve = ValveId::A1;
  bool open = false;
};

struct PlcDecision {
  bool accepted = true;
  PlcState next;
  std::vector<ValveCommand> commands;
  std::string alarm;
};

/// Hysteresis law. Fill valves open below the low setpoint and close above the
/// high one; PLC2's drain valve A3 follows the mirrored law.
PlcDecision plc_control(const PlcState& plc, const SensorReading& reading);

/// The physical process plus both controllers, advanced one tick at a time.
class Plant {
 public:
  explicit Plant(PlantConfig config);

  /// Reads both sensors, runs both PLCs, applies their commands, then steps
  /// the tanks by one tick. Returns the readings taken at `tick`.
  std::array<SensorReading, 2> tick(Tick tick);

  const Tanks& tanks() const { return tanks_; }
  const Valves& valves() const { return valves_; }
  const PlcState& plc(PlcId id) const { return plcs_[static_cast<int>(id) - 1]; }
  const PlantConfig& config() const { return config_; }

 private:
  PlantConfig config_;
  Tanks tanks_;
  Valves valves_;
  std::array<PlcState, 2> plcs_;
};

}  // namespace histchain
