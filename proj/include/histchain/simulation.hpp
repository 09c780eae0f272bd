#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "histchain/chain_module.hpp"
#include "histchain/crypto.hpp"
#include "histchain/events.hpp"
#include "histchain/plant.hpp"
#include "histchain/storage_node.hpp"
#include "histchain/transport.hpp"

namespace histchain {

struct SimConfig {
  int n_storage_nodes = 6;
  int replication_factor = 3;
  Tick interval_ticks = 60;
  std::uint64_t seed = 0;
  int minutes = 10;
  MinuteStamp start = MinuteStamp::from_civil(2020, 12, 23, 17, 26);
  HashAlgorithm hash = HashAlgorithm::Sha256;
  PlantConfig plant;
  bool trace_wire = false;

  /// Throws ConfigError.
  void validate() const;
  /// Applies one `key=value` setting. Throws ConfigError for unknown keys or
  /// unparsable values.
  void set(std::string_view key, std::string_view value);
  /// Flat `key=value` text; blank lines and `#` comments ignored.
  static SimConfig parse(std::istream& in);
  static SimConfig load(const std::filesystem::path& path);
};

/// Scheduling phases within one tick, in execution order.
enum class Phase : int { Adversary = 0, ChainClose = 1, Delivery = 2, Plant = 3, Validator = 4 };

/// Deterministic event queue ordered by (tick, phase, insertion sequence).
class Scheduler {
 public:
  explicit Scheduler(EventLog& log) : log_(&log) {}

  void at(Tick tick, Phase phase, std::function<void()> action);
  /// Runs every event with tick < end. Events may schedule more events.
  void run_until(Tick end);
  Tick now() const { return now_; }
  std::size_t pending() const { return queue_.size(); }

 private:
  struct Entry {
    Tick tick;
    int phase;
    std::uint64_t seq;
    std::function<void()> action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.tick != b.tick) return a.tick > b.tick;
      if (a.phase != b.phase) return a.phase > b.phase;
      return a.seq > b.seq;
    }
  };
  EventLog* log_;
  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  std::uint64_t seq_ = 0;
  Tick now_ = 0;
};

struct ValidatorCycle {
  Tick tick = 0;
  NodeId node = 0;
  std::vector<ValidationFinding> findings;
};

/// The whole network on one timeline: plant and PLCs, storage nodes, the
/// chain module and the wire between them.
///
/// Per interval of `interval_ticks` ticks: PLCs sample every tick and seal
/// their vector on the last tick; storage nodes register it one tick later
/// and forward the index; the chain module closes its collection window on
/// each interval boundary and broadcasts the log; validators run at the
/// middle of every interval.
class Simulation {
 public:
  explicit Simulation(SimConfig config, std::optional<std::vector<NodeKeys>> keystore = {});
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  /// Runs the configured minutes plus the ticks needed to mint, replicate
  /// and validate the last interval.
  void run() { run_until(horizon()); }
  void run_until(Tick end) { scheduler_.run_until(end); }
  Tick horizon() const { return (config_.minutes + 2) * config_.interval_ticks; }
  Tick now() const { return scheduler_.now(); }
  MinuteStamp minute_at(Tick t) const { return config_.start + t / config_.interval_ticks; }
  /// First tick of the interval whose vectors carry `m` as capture minute.
  Tick tick_of(MinuteStamp m) const {
    return (m.minutes() - config_.start.minutes()) * config_.interval_ticks;
  }
  /// Tick of the first validator cycle at or after `t`.
  Tick next_validator_tick(Tick t) const;

  void at(Tick tick, Phase phase, std::function<void()> action) {
    scheduler_.at(tick, phase, std::move(action));
  }

  /// Stops the plant from producing vectors; fixtures inject their own.
  void set_plant_enabled(bool enabled) { plant_enabled_ = enabled; }
  /// Seals `vector` from the PLC to `target` (default: the PLC's node) and
  /// puts it on the wire now.
  void submit_vector(PlcId plc, const MeasurementVector& vector,
                     std::optional<NodeId> target = std::nullopt);
  /// Runs one validator cycle on `node` immediately and records it.
  std::vector<ValidationFinding> validate_now(NodeId node);

  ReplicaTransport transport_for(NodeId requester);

  const SimConfig& config() const { return config_; }
  StorageNode& node(NodeId id);
  const StorageNode& node(NodeId id) const;
  std::vector<NodeId> node_ids() const;
  ChainModule& chain_module() { return *chain_; }
  const Chain& chain() const { return chain_->chain(); }
  Network& network() { return network_; }
  EventLog& events() { return events_; }
  const EventLog& events() const { return events_; }
  const Plant& plant() const { return plant_; }
  const KeyDirectory& directory() const { return directory_; }
  const NodeKeys& keys(EndpointId id) const { return keys_.at(id); }
  std::vector<NodeKeys> all_keys() const;
  NodeId route(PlcId plc) const;
  const std::vector<ValidatorCycle>& validator_history() const { return history_; }

  std::string chain_dump() const;
  std::string historian_dump(NodeId id) const;
  std::string event_dump() const;
  std::string wire_trace() const { return wire_.str(); }
  /// events.tsv, chain.txt, historian_<id>.txt and, when tracing, wire.txt.
  void write_artifacts(const std::filesystem::path& dir) const;

 private:
  void send(const Frame& frame);
  void deliver(EndpointId from, EndpointId to);
  void plant_tick(Tick t);
  void close_interval(Tick t);
  void validator_tick(Tick t);

  SimConfig config_;
  EventLog events_;
  Scheduler scheduler_;
  Network network_;
  KeyDirectory directory_;
  std::map<EndpointId, NodeKeys> keys_;
  std::vector<std::unique_ptr<StorageNode>> nodes_;
  std::unique_ptr<ChainModule> chain_;
  Plant plant_;
  bool plant_enabled_ = true;
  std::array<std::vector<std::uint32_t>, 2> buffers_;
  std::map<PlcId, RngStream> plc_entropy_;
  std::vector<ValidatorCycle> history_;
  std::ostringstream wire_;
};

/// Writes `text` to `path`, throwing on failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace histchain
