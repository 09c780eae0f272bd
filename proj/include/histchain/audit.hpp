#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "histchain/ledger.hpp"
#include "histchain/storage_node.hpp"

namespace histchain {

enum class AuditStatus { Intact, Tampered, Missing };
std::string_view to_string(AuditStatus s);

struct AuditRecordVerdict {
  NodeId node = 0;
  MinuteStamp time;
  Digest expected_digest;
  AuditStatus status = AuditStatus::Intact;
  std::optional<RecordKey> key;  // the record held for this index, if any
};

struct AuditReport {
  ChainVerdict chain;
  std::vector<AuditRecordVerdict> records;
  /// Records no ledger index vouches for, per node.
  std::vector<std::pair<NodeId, RecordKey>> unindexed;

  bool all_intact() const;
  std::vector<AuditRecordVerdict> flagged() const;
  std::string render() const;
};

/// Offline re-verification from dumped state alone. Checks the chain, then
/// matches every index listing a node against that node's records with the
/// same capture minute purely by digest; an index left without a matching
/// record is paired with a leftover record of that minute (Tampered) or
/// reported Missing. Record verdicts are skipped when the chain is invalid.
AuditReport audit(const Chain& chain, const std::map<NodeId, Historian>& historians);

/// Reads `chain.txt` and every `historian_<id>.txt` in `dir`.
/// Throws std::runtime_error / SerializationError on unreadable input.
AuditReport audit_directory(const std::filesystem::path& dir,
                            HashAlgorithm algo = HashAlgorithm::Sha256);

}  // namespace histchain
