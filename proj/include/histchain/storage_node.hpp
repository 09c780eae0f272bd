#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "histchain/crypto.hpp"
#include "histchain/events.hpp"
#include "histchain/ledger.hpp"

namespace histchain {

struct RecordKey {
  std::string name;
  MinuteStamp time;

  std::string describe() const { return name + "@" + time.iso(); }
  friend auto operator<=>(const RecordKey&, const RecordKey&) = default;
  friend bool operator==(const RecordKey&, const RecordKey&) = default;
};

/// One historian row (Name, Value, Time).
struct HistorianRecord {
  std::string name;
  std::vector<std::uint32_t> value;
  MinuteStamp time;

  RecordKey key() const { return {name, time}; }
  MeasurementVector as_vector() const { return {name, time, value}; }
  static HistorianRecord from_vector(const MeasurementVector& v) {
    return {v.sensor_name, v.values, v.captured_at};
  }
  friend bool operator==(const HistorianRecord&, const HistorianRecord&) = default;
};

/// Keyed record store. Enumerates in append order; rewriting a record keeps
/// its position.
class Historian {
 public:
  /// False (and no change) when the key already exists.
  bool insert(HistorianRecord record);
  /// Inserts or replaces in place.
  void overwrite(HistorianRecord record);
  bool erase(const RecordKey& key);

  const HistorianRecord* find(const RecordKey& key) const;
  std::vector<const HistorianRecord*> at_time(MinuteStamp time) const;
  const std::vector<HistorianRecord>& records() const { return records_; }
  std::vector<HistorianRecord> time_ordered() const;
  std::size_t size() const { return records_.size(); }

  /// `name|YYYY-MM-DDTHH:MM|v1,v2,...` per line, append order.
  void write_dump(std::ostream& out) const;
  static Historian read_dump(std::istream& in);

  friend bool operator==(const Historian&, const Historian&) = default;

 private:
  std::vector<HistorianRecord> records_;
  std::map<RecordKey, std::size_t> by_key_;
};

enum class Verdict { Intact, TamperedRecovered, TamperedUnrecoverable };
std::string_view to_string(Verdict v);

struct ValidationFinding {
  NodeId node = 0;
  std::optional<RecordKey> key;  // unknown only if the node never held the vector
  MinuteStamp time;
  Verdict verdict = Verdict::Intact;
  std::optional<NodeId> recovered_from;
  Digest expected_digest;
  std::optional<Digest> found_digest;  // nullopt when the record is missing
};

struct RecoverOutcome {
  bool recovered = false;
  NodeId from = 0;
  std::optional<MeasurementVector> restored;
};

struct ReplicaPull {
  LedgerIndex index;
  std::optional<NodeId> source;  // node that supplied the stored copy
  bool stored = false;
};

struct RegisterOutcome {
  bool stored = false;
  std::optional<SignedEnvelope> index_message;  // sealed to the chain module
  std::optional<AuthError> auth_error;
  std::string alarm_code;
};

/// Delivers a sealed replica request to its recipient and returns the sealed
/// response, or nullopt when nothing came back.
using ReplicaTransport = std::function<std::optional<SignedEnvelope>(const SignedEnvelope&)>;

/// A storage node: Register, Replication handler and Validator over one
/// Historian. Processes one message at a time.
class StorageNode {
 public:
  StorageNode(NodeKeys keys, const KeyDirectory& directory, EndpointId chain_id,
              HashAlgorithm algo, RngStream entropy, EventLog& log);

  NodeId id() const { return keys_.id; }
  const std::string& name() const { return name_; }

  /// Opens a PLC envelope, stores the vector and seals its index for the
  /// chain module. Rejected envelopes never touch the Historian.
  RegisterOutcome register_measurement(const SignedEnvelope& envelope);

  /// Opens the chain module's log, looks up the named block and pulls every
  /// vector this node must replicate from the nodes that already hold it.
  std::vector<ReplicaPull> handle_log(const SignedEnvelope& log, const Chain& chain,
                                      const ReplicaTransport& transport);

  /// Answers a replica request. nullopt when the request fails to open.
  std::optional<SignedEnvelope> serve_replica(const SignedEnvelope& request);

  /// Walks the whole chain and checks every vector listed for this node,
  /// recovering the ones whose digest no longer matches. `now` and `stale_after`
  /// drive the coverage-gap check: records older than `stale_after` with no
  /// ledger index are reported once.
  std::vector<ValidationFinding> validate_cycle(const Chain& chain,
                                                const ReplicaTransport& transport,
                                                std::optional<MinuteStamp> stale_before = {});

  /// Fetches the vector from the other listed holders in list order and
  /// overwrites the local copy with the first one whose digest matches.
  RecoverOutcome recover(const LedgerIndex& index, const ReplicaTransport& transport);

  Historian& historian() { return historian_; }
  const Historian& historian() const { return historian_; }
  /// Register journal: which key each stored vector digest was filed under.
  std::optional<RecordKey> key_for(const Digest& d) const;
  /// Records this node holds that no ledger index vouches for (as of the
  /// last validator cycle).
  const std::vector<RecordKey>& coverage_gaps() const { return coverage_gaps_; }

 private:
  std::optional<MeasurementVector> fetch(const LedgerIndex& index, NodeId source,
                                         const ReplicaTransport& transport);

  NodeKeys keys_;
  const KeyDirectory* directory_;
  EndpointId chain_id_;
  HashAlgorithm algo_;
  RngStream entropy_;
  EventLog* log_;
  std::string name_;
  Historian historian_;
  std::map<Digest, RecordKey> journal_;
  std::vector<RecordKey> coverage_gaps_;
  std::vector<RecordKey> reported_gaps_;
};

/// Index submission carried from a storage node to the chain module:
/// `digest_hex|YYYY-MM-DDTHH:MM|origin`.
struct IndexSubmission {
  Digest vector_digest;
  MinuteStamp captured_at;
  NodeId origin = 0;

  std::string serialize() const;
  static IndexSubmission parse(std::string_view text);
};

}  // namespace histchain
