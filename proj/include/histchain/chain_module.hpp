#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "histchain/crypto.hpp"
#include "histchain/events.hpp"
#include "histchain/ledger.hpp"
#include "histchain/rng.hpp"
#include "histchain/storage_node.hpp"

namespace histchain {

struct CollectOutcome {
  bool accepted = false;
  std::optional<IndexSubmission> submission;
  std::optional<AuthError> auth_error;
};

struct RejectedIndex {
  EndpointId sender = 0;
  AuthError error;
};

/// Chooses the ordered replica list (origin first) for one accepted index.
using ReplicaPicker = std::function<std::vector<NodeId>(const IndexSubmission&)>;

/// The only writer of the chain. Buffers authentic index submissions for the
/// current interval and mints one block per interval that has any.
class ChainModule {
 public:
  ChainModule(NodeKeys keys, const KeyDirectory& directory, std::vector<NodeId> storage_nodes,
              int replication_factor, HashAlgorithm algo, std::uint64_t seed, EventLog& log);

  CollectOutcome collect(const SignedEnvelope& envelope);

  /// Mints and appends a block from the buffered submissions, or returns
  /// nullopt (NoBlock) when the buffer is empty.
  std::optional<Block> close_interval(MinuteStamp minted_at);

  /// One log per storage node, each sealed to its addressee.
  std::vector<SignedEnvelope> broadcast_log(const Digest& block_hash);

  /// Origin followed by replication_factor-1 distinct nodes drawn uniformly
  /// without replacement from the others.
  std::vector<NodeId> draw_replicas(NodeId origin);
  void set_replica_picker(ReplicaPicker picker) { picker_ = std::move(picker); }

  const Chain& chain() const { return chain_; }
  std::size_t buffered() const { return buffer_.size(); }
  const std::vector<RejectedIndex>& rejected() const { return rejected_; }
  EndpointId id() const { return keys_.id; }

 private:
  NodeKeys keys_;
  const KeyDirectory* directory_;
  std::vector<NodeId> storage_nodes_;
  int replication_factor_;
  HashAlgorithm algo_;
  RngStream replica_rng_;
  RngStream entropy_;
  EventLog* log_;
  Chain chain_;
  std::vector<IndexSubmission> buffer_;
  std::vector<RejectedIndex> rejected_;
  ReplicaPicker picker_;
};

}  // namespace histchain
