#include "histchain/chain_module.hpp"

#include <algorithm>
#include <stdexcept>

#include "histchain/transport.hpp"

namespace histchain {

namespace {
constexpr std::string_view kActor = "chain";

std::string storage_label(EndpointId id) {
  return endpoint::is_storage(id) ? "STORAGE NODE " + std::to_string(id) : endpoint::name(id);
}
}  // namespace

ChainModule::ChainModule(NodeKeys keys, const KeyDirectory& directory,
                         std::vector<NodeId> storage_nodes, int replication_factor,
                         HashAlgorithm algo, std::uint64_t seed, EventLog& log)
    : keys_(keys),
      directory_(&directory),
      storage_nodes_(std::move(storage_nodes)),
      replication_factor_(replication_factor),
      algo_(algo),
      replica_rng_(seed, "replica-choice"),
      entropy_(seed, "entropy/chain"),
      log_(&log),
      chain_(algo) {
  std::sort(storage_nodes_.begin(), storage_nodes_.end());
  if (replication_factor_ < 1 ||
      static_cast<std::size_t>(replication_factor_) > storage_nodes_.size()) {
    throw std::invalid_argument("replication factor must be in [1, storage node count]");
  }
}

std::vector<NodeId> ChainModule::draw_replicas(NodeId origin) {
  std::vector<NodeId> pool;
  for (NodeId n : storage_nodes_) {
    if (n != origin) {
      pool.push_back(n);
    }
  }
  std::vector<NodeId> out{origin};
  for (int i = 1; i < replication_factor_; ++i) {
    const auto pick = replica_rng_.below(pool.size());
    out.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

CollectOutcome ChainModule::collect(const SignedEnvelope& envelope) {
  CollectOutcome out;
  const auto reject = [&](AuthError err) {
    log_->alarm(kActor, code::kIndexRejected,
                "ALARM!! THE DATA RECEIVED FROM " + storage_label(envelope.sender_id) +
                    " HAS BEEN CORRUPTED; THIS DATA WILL NOT BE STORED IN THE BLOCKCHAIN; " +
                    err.describe());
    rejected_.push_back({envelope.sender_id, err});
    out.auth_error = std::move(err);
    return out;
  };

  if (!endpoint::is_storage(envelope.sender_id) || !directory_->contains(envelope.sender_id)) {
    return reject(AuthError{AuthErrorKind::DecryptFailed, "", "", "sender is not a storage node"});
  }
  auto opened = open(envelope, keys_, directory_->at(envelope.sender_id), algo_);
  if (auto* err = std::get_if<AuthError>(&opened)) {
    return reject(*err);
  }
  IndexSubmission submission;
  try {
    submission = IndexSubmission::parse(to_string(std::get<Bytes>(opened)));
  } catch (const SerializationError& e) {
    return reject(AuthError{AuthErrorKind::DigestMismatch, "", "", e.what()});
  }
  if (submission.origin != envelope.sender_id) {
    return reject(AuthError{AuthErrorKind::BadSignature, "", "", "origin does not match sender"});
  }
  log_->info(kActor, code::kIndexAuthentic,
             storage_label(envelope.sender_id) + " MESSAGE IS AUTHENTIC; " +
                 submission.serialize());
  buffer_.push_back(submission);
  out.accepted = true;
  out.submission = std::move(submission);
  return out;
}

std::optional<Block> ChainModule::close_interval(MinuteStamp minted_at) {
  if (buffer_.empty()) {
    log_->info(kActor, code::kNoBlock, "no authentic index this interval");
    return std::nullopt;
  }
  std::vector<LedgerIndex> indexes;
  for (const auto& s : buffer_) {
    auto replicas = picker_ ? picker_(s) : draw_replicas(s.origin);
    indexes.push_back(LedgerIndex{s.vector_digest, s.captured_at, std::move(replicas)});
  }
  buffer_.clear();
  auto block = make_block(std::move(indexes), chain_.tip().block_hash, minted_at, algo_);
  chain_.append(block);
  std::string detail = "NEW BLOCK ID: " + block.block_hash.hex() +
                       " n_indexes=" + std::to_string(block.indexes.size());
  for (const auto& idx : block.indexes) {
    detail += " [" + idx.serialize() + "]";
  }
  log_->info(kActor, code::kBlockMinted, detail);
  return block;
}

std::vector<SignedEnvelope> ChainModule::broadcast_log(const Digest& block_hash) {
  std::vector<SignedEnvelope> logs;
  logs.reserve(storage_nodes_.size());
  const auto payload = to_bytes(block_hash.hex());
  for (NodeId n : storage_nodes_) {
    logs.push_back(seal(payload, keys_, directory_->at(n), entropy_, algo_));
  }
  return logs;
}

}  // namespace histchain
