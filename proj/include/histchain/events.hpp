#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace histchain {

using Tick = std::int64_t;

enum class Severity { Info, Alarm };

std::string_view to_string(Severity s);

/// Event codes. The operator-facing alarms mirror the console messages of the
/// reference testbed; the rest are bookkeeping.
namespace code {
inline constexpr std::string_view kAuthenticMessage = "AUTHENTIC_MESSAGE";
inline constexpr std::string_view kDataDamaged = "DATA_DAMAGED";
inline constexpr std::string_view kDecryptFailed = "DECRYPT_FAILED";
inline constexpr std::string_view kBadSignature = "BAD_SIGNATURE";
inline constexpr std::string_view kDuplicateRecord = "DUPLICATE_RECORD";
inline constexpr std::string_view kIndexAuthentic = "INDEX_AUTHENTIC";
inline constexpr std::string_view kIndexRejected = "INDEX_REJECTED";
inline constexpr std::string_view kBlockMinted = "BLOCK_MINTED";
inline constexpr std::string_view kNoBlock = "NO_BLOCK";
inline constexpr std::string_view kLogRejected = "LOG_REJECTED";
inline constexpr std::string_view kReplicaStored = "REPLICA_STORED";
inline constexpr std::string_view kReplicaMismatch = "REPLICA_DIGEST_MISMATCH";
inline constexpr std::string_view kReplicaUnavailable = "REPLICA_UNAVAILABLE";
inline constexpr std::string_view kReplicaRequestRejected = "REPLICA_REQUEST_REJECTED";
inline constexpr std::string_view kCheckOk = "CHECK_OK";
inline constexpr std::string_view kFalseDataInjection = "FALSE_DATA_INJECTION";
inline constexpr std::string_view kRecovered = "RECOVERED";
inline constexpr std::string_view kUnrecoverable = "UNRECOVERABLE";
inline constexpr std::string_view kCoverageGap = "COVERAGE_GAP";
inline constexpr std::string_view kChainInvalid = "CHAIN_INVALID";
inline constexpr std::string_view kSensorMismatch = "SENSOR_MISMATCH";
inline constexpr std::string_view kInterceptorReplaced = "INTERCEPTOR_REPLACED";
inline constexpr std::string_view kAttack = "ATTACK";
}  // namespace code

struct EventRecord {
  Tick tick = 0;
  std::uint64_t sequence = 0;
  std::string actor;
  Severity severity = Severity::Info;
  std::string code;
  std::string detail;
};

/// Append-only, totally ordered by (tick, sequence). The owning scheduler
/// advances the clock; emitters only supply the content.
class EventLog {
 public:
  void set_tick(Tick t) { tick_ = t; }
  Tick tick() const { return tick_; }

  const EventRecord& emit(std::string_view actor, Severity severity, std::string_view code,
                          std::string detail);
  const EventRecord& info(std::string_view actor, std::string_view code, std::string detail) {
    return emit(actor, Severity::Info, code, std::move(detail));
  }
  const EventRecord& alarm(std::string_view actor, std::string_view code, std::string detail) {
    return emit(actor, Severity::Alarm, code, std::move(detail));
  }

  const std::vector<EventRecord>& records() const { return records_; }
  std::size_t count(std::string_view code) const;
  std::size_t count(std::string_view actor, std::string_view code) const;

  /// One record per line: tick, actor, severity, code, detail; tab separated.
  void write(std::ostream& out) const;

 private:
  Tick tick_ = 0;
  std::vector<EventRecord> records_;
};

}  // namespace histchain
