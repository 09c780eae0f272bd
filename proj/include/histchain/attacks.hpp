#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "histchain/events.hpp"
#include "histchain/simulation.hpp"

namespace histchain {

struct ScenarioSetupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Dumped chain and historians at one instant.
struct ArtifactSnapshot {
  std::string chain_dump;
  std::map<NodeId, std::string> historians;

  static ArtifactSnapshot capture(const Simulation& sim);
  void write(const std::filesystem::path& dir) const;
};

struct ScenarioReport {
  std::string scenario_id;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> facts;
  std::vector<EventRecord> timeline;
  std::vector<Assertion> assertions;
  /// Scenario A: state right after tampering, before any validator ran.
  std::optional<ArtifactSnapshot> tampered_state;

  bool passed() const;
  void check(std::string name, bool ok, std::string detail = {});
  void fact(std::string key, std::string value) { facts.emplace_back(std::move(key), std::move(value)); }
  /// Tab-separated lines: scenario, seed, facts, timeline, assertions, result.
  std::string serialize() const;
};

// ---------------------------------------------------------------------------
// Scenario A: an authorised insider edits historian records directly.

/// The three rows of historian 1 used by the tampering reproduction.
std::vector<MeasurementVector> reference_vectors();

/// Replica lists used by the fixture, keyed by capture minute.
std::map<MinuteStamp, std::vector<NodeId>> reference_replicas();

/// Builds a simulation with the plant disabled, feeds the three reference vectors
/// through the full protocol and runs past the first clean validator cycle.
std::unique_ptr<Simulation> make_reference_fixture(SimConfig config);

struct TamperSpec {
  NodeId target = 1;
  RecordKey key{"Sensor 1", MinuteStamp::from_civil(2020, 12, 23, 17, 27)};
  std::vector<std::uint32_t> forged{2, 1};
  /// Further holders whose copy is overwritten with the same forgery.
  std::vector<NodeId> also_corrupt;
  bool delete_record = false;
  /// Plant a record that does not exist yet (for nodes the ledger does not
  /// list for it).
  bool insert_if_missing = false;
};

/// Applies the forgery, then runs the simulation through the target node's
/// next validator cycle and asserts detection and recovery.
ScenarioReport run_scenario_A(Simulation& sim, const TamperSpec& spec);

// ---------------------------------------------------------------------------
// Scenarios B and C: a man in the middle on one link.

struct MitmSpec {
  /// Zero-based interval whose vector is attacked.
  int attack_interval = 2;
  /// Eavesdrop and retransmit unchanged.
  bool passive = false;
  /// Scenario C only: also attack node2's link to the chain module.
  bool both_links = false;
};

/// Flips bytes in [body_from, body_to) of the envelope body and nowhere else.
/// Frames of other types pass untouched. Every frame seen is appended to
/// `transcript` when given.
Interceptor payload_flipper(MsgType target, std::size_t body_from, std::size_t body_to,
                            std::uint64_t seed, std::shared_ptr<std::vector<Frame>> transcript);
Interceptor passive_tap(std::shared_ptr<std::vector<Frame>> transcript);

/// MITM between PLC1 and storage node 1 on MEASUREMENT frames.
ScenarioReport run_scenario_B(Simulation& sim, const MitmSpec& spec);
/// MITM between storage node 1 and the chain module on INDEX frames.
ScenarioReport run_scenario_C(Simulation& sim, const MitmSpec& spec);

}  // namespace histchain
