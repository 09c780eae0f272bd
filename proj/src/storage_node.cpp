#include "histchain/storage_node.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include "histchain/transport.hpp"

namespace histchain {

namespace {

std::string render(const std::vector<std::uint32_t>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += (i ? "," : "") + std::to_string(values[i]);
  }
  return out + "]";
}

std::string render(const std::vector<NodeId>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += (i ? " " : "") + std::to_string(ids[i]);
  }
  return out;
}

// Replica request body: `digest_hex|YYYY-MM-DDTHH:MM`.
std::string replica_request(const LedgerIndex& index) {
  return index.vector_digest.hex() + "|" + index.captured_at.iso();
}

}  // namespace

// ---------------------------------------------------------------------------

bool Historian::insert(HistorianRecord record) {
  if (record.value.empty()) {
    throw std::invalid_argument("historian record without values");
  }
  const auto key = record.key();
  if (by_key_.count(key)) {
    return false;
  }
  by_key_.emplace(key, records_.size());
  records_.push_back(std::move(record));
  return true;
}

void Historian::overwrite(HistorianRecord record) {
  if (record.value.empty()) {
    throw std::invalid_argument("historian record without values");
  }
  const auto it = by_key_.find(record.key());
  if (it == by_key_.end()) {
    insert(std::move(record));
    return;
  }
  records_[it->second] = std::move(record);
}

bool Historian::erase(const RecordKey& key) {
  const auto it = by_key_.find(key);
  if (it == by_key_.end()) {
    return false;
  }
  records_.erase(records_.begin() + static_cast<std::ptrdiff_t>(it->second));
  by_key_.clear();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    by_key_.emplace(records_[i].key(), i);
  }
  return true;
}

const HistorianRecord* Historian::find(const RecordKey& key) const {
  const auto it = by_key_.find(key);
  return it == by_key_.end() ? nullptr : &records_[it->second];
}

std::vector<const HistorianRecord*> Historian::at_time(MinuteStamp time) const {
  std::vector<const HistorianRecord*> out;
  for (const auto& r : records_) {
    if (r.time == time) {
      out.push_back(&r);
    }
  }
  return out;
}

std::vector<HistorianRecord> Historian::time_ordered() const {
  std::vector<HistorianRecord> out = records_;
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  return out;
}

void Historian::write_dump(std::ostream& out) const {
  for (const auto& r : records_) {
    out << canonical_serialize(r.as_vector()) << '\n';
  }
}

Historian Historian::read_dump(std::istream& in) {
  Historian h;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    if (!h.insert(HistorianRecord::from_vector(parse_canonical(line)))) {
      throw SerializationError("duplicate historian key: " + line);
    }
  }
  return h;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Intact:
      return "Intact";
    case Verdict::TamperedRecovered:
      return "TamperedRecovered";
    case Verdict::TamperedUnrecoverable:
      return "TamperedUnrecoverable";
  }
  return "?";
}

std::string IndexSubmission::serialize() const {
  return vector_digest.hex() + "|" + captured_at.iso() + "|" + std::to_string(origin);
}

IndexSubmission IndexSubmission::parse(std::string_view text) {
  // Same shape as a ledger index with a single-entry replica list.
  const auto idx = LedgerIndex::parse(text);
  if (idx.replica_ids.size() != 1) {
    throw SerializationError("malformed index submission: " + std::string(text));
  }
  return {idx.vector_digest, idx.captured_at, idx.replica_ids.front()};
}

// ---------------------------------------------------------------------------

StorageNode::StorageNode(NodeKeys keys, const KeyDirectory& directory, EndpointId chain_id,
                         HashAlgorithm algo, RngStream entropy, EventLog& log)
    : keys_(keys),
      directory_(&directory),
      chain_id_(chain_id),
      algo_(algo),
      entropy_(std::move(entropy)),
      log_(&log),
      name_(endpoint::name(keys.id)) {}

std::optional<RecordKey> StorageNode::key_for(const Digest& d) const {
  const auto it = journal_.find(d);
  if (it == journal_.end()) {
    return std::nullopt;
  }
  return it->second;
}

RegisterOutcome StorageNode::register_measurement(const SignedEnvelope& envelope) {
  RegisterOutcome out;
  const std::string from = endpoint::name(envelope.sender_id);
  if (!directory_->contains(envelope.sender_id)) {
    out.alarm_code = code::kDecryptFailed;
    log_->alarm(name_, out.alarm_code, "envelope from unknown sender " + from);
    return out;
  }
  auto opened = open(envelope, keys_, directory_->at(envelope.sender_id), algo_);
  if (auto* err = std::get_if<AuthError>(&opened)) {
    out.auth_error = *err;
    switch (err->kind) {
      case AuthErrorKind::DigestMismatch:
        out.alarm_code = code::kDataDamaged;
        log_->alarm(name_, out.alarm_code,
                    "ALARM!! THE DATA HAS BEEN DAMAGED; THEY WILL NOT STORED IN THE HISTORIAN; "
                    "from=" + from + " digest_received=" + err->received_digest +
                        " digest_rebuilt=" + err->rebuilt_digest);
        break;
      case AuthErrorKind::BadSignature:
        out.alarm_code = code::kBadSignature;
        log_->alarm(name_, out.alarm_code, "message from " + from + " not authentic");
        break;
      case AuthErrorKind::DecryptFailed:
        out.alarm_code = code::kDecryptFailed;
        log_->alarm(name_, out.alarm_code, "message from " + from + ": " + err->reason);
        break;
    }
    return out;
  }

  const auto& plaintext = std::get<Bytes>(opened);
  MeasurementVector vector;
  try {
    vector = parse_canonical(to_string(plaintext));
  } catch (const SerializationError& e) {
    out.alarm_code = code::kDataDamaged;
    log_->alarm(name_, out.alarm_code, "authentic message from " + from + " unparsable: " + e.what());
    return out;
  }
  auto record = HistorianRecord::from_vector(vector);
  const auto key = record.key();
  if (!historian_.insert(std::move(record))) {
    out.alarm_code = code::kDuplicateRecord;
    log_->alarm(name_, out.alarm_code, "record " + key.describe() + " already stored");
    return out;
  }

  const Digest index_digest = vector_digest(vector, algo_);
  journal_[index_digest] = key;
  out.stored = true;
  log_->info(name_, code::kAuthenticMessage,
             "AUTHENTIC MESSAGE from " + from + "; START OF STORAGE AND REPLICATION PROCESS; " +
                 key.describe() + " " + render(vector.values) + " digest=" + index_digest.hex());

  const IndexSubmission submission{index_digest, vector.captured_at, id()};
  out.index_message =
      seal(to_bytes(submission.serialize()), keys_, directory_->at(chain_id_), entropy_, algo_);
  return out;
}

std::optional<MeasurementVector> StorageNode::fetch(const LedgerIndex& index, NodeId source,
                                                    const ReplicaTransport& transport) {
  const std::string peer = endpoint::name(source);
  const auto request = seal(to_bytes(replica_request(index)), keys_, directory_->at(source),
                            entropy_, algo_);
  const auto response = transport(request);
  if (!response) {
    log_->alarm(name_, code::kReplicaUnavailable,
                "no replica response from " + peer + " for " + index.serialize());
    return std::nullopt;
  }
  auto opened = open(*response, keys_, directory_->at(source), algo_);
  if (auto* err = std::get_if<AuthError>(&opened)) {
    log_->alarm(name_, code::kReplicaMismatch,
                "replica response from " + peer + " failed authentication: " + err->describe());
    return std::nullopt;
  }
  const std::string body = to_string(std::get<Bytes>(opened));
  if (body.empty() || body[0] != '+') {
    log_->alarm(name_, code::kReplicaUnavailable,
                peer + " does not hold " + index.serialize());
    return std::nullopt;
  }
  MeasurementVector vector;
  try {
    vector = parse_canonical(std::string_view(body).substr(1));
  } catch (const SerializationError&) {
    log_->alarm(name_, code::kReplicaMismatch, "unparsable replica from " + peer);
    return std::nullopt;
  }
  const Digest got = vector_digest(vector, algo_);
  if (got != index.vector_digest || vector.captured_at != index.captured_at) {
    log_->alarm(name_, code::kReplicaMismatch,
                "replica from " + peer + " digest " + got.hex() + " expected " +
                    index.vector_digest.hex());
    return std::nullopt;
  }
  return vector;
}

std::vector<ReplicaPull> StorageNode::handle_log(const SignedEnvelope& log, const Chain& chain,
                                                 const ReplicaTransport& transport) {
  std::vector<ReplicaPull> pulls;
  auto opened = open(log, keys_, directory_->at(chain_id_), algo_);
  if (auto* err = std::get_if<AuthError>(&opened)) {
    log_->alarm(name_, code::kLogRejected, "log message rejected: " + err->describe());
    return pulls;
  }
  Digest block_hash;
  std::optional<std::size_t> pos;
  try {
    block_hash = Digest::from_hex(to_string(std::get<Bytes>(opened)));
    pos = chain.find(block_hash);
  } catch (const SerializationError&) {
  }
  if (!pos) {
    log_->alarm(name_, code::kLogRejected, "log names a block not in the chain");
    return pulls;
  }

  for (const auto& index : chain.blocks()[*pos].indexes) {
    const auto& ids = index.replica_ids;
    if (ids.size() < 2 || std::find(ids.begin() + 1, ids.end(), id()) == ids.end()) {
      continue;
    }
    ReplicaPull pull{index, std::nullopt, false};
    if (journal_.count(index.vector_digest)) {
      pulls.push_back(pull);
      continue;
    }
    // Ask the origin first, then any other holder.
    for (NodeId source : ids) {
      if (source == id()) {
        continue;
      }
      auto vector = fetch(index, source, transport);
      if (!vector) {
        continue;
      }
      auto record = HistorianRecord::from_vector(*vector);
      const auto key = record.key();
      if (!historian_.insert(std::move(record))) {
        log_->alarm(name_, code::kDuplicateRecord, "replica " + key.describe() + " collides");
        break;
      }
      journal_[index.vector_digest] = key;
      pull.source = source;
      pull.stored = true;
      log_->info(name_, code::kReplicaStored,
                 key.describe() + " from " + endpoint::name(source) + " replicas [" +
                     render(ids) + "]");
      break;
    }
    pulls.push_back(pull);
  }
  return pulls;
}

std::optional<SignedEnvelope> StorageNode::serve_replica(const SignedEnvelope& request) {
  const std::string from = endpoint::name(request.sender_id);
  if (!directory_->contains(request.sender_id)) {
    log_->alarm(name_, code::kReplicaRequestRejected, "request from unknown sender " + from);
    return std::nullopt;
  }
  auto opened = open(request, keys_, directory_->at(request.sender_id), algo_);
  if (auto* err = std::get_if<AuthError>(&opened)) {
    log_->alarm(name_, code::kReplicaRequestRejected,
                "replica request from " + from + " rejected: " + err->describe());
    return std::nullopt;
  }
  const std::string text = to_string(std::get<Bytes>(opened));
  std::string body = "-" + text;
  const auto bar = text.find('|');
  if (bar != std::string::npos) {
    try {
      const auto wanted = Digest::from_hex(std::string_view(text).substr(0, bar));
      const auto time = MinuteStamp::parse(std::string_view(text).substr(bar + 1));
      const auto key = key_for(wanted);
      if (key && key->time == time) {
        if (const auto* record = historian_.find(*key)) {
          body = "+" + canonical_serialize(record->as_vector());
        }
      }
    } catch (const std::exception&) {
      // malformed request: answered as not found
    }
  }
  return seal(to_bytes(body), keys_, directory_->at(request.sender_id), entropy_, algo_);
}

RecoverOutcome StorageNode::recover(const LedgerIndex& index, const ReplicaTransport& transport) {
  RecoverOutcome out;
  for (NodeId source : index.replica_ids) {
    if (source == id()) {
      continue;
    }
    auto vector = fetch(index, source, transport);
    if (!vector) {
      continue;
    }
    const auto key = RecordKey{vector->sensor_name, vector->captured_at};
    std::string previous = "missing";
    if (const auto* old = historian_.find(key)) {
      previous = render(old->value);
    }
    historian_.overwrite(HistorianRecord::from_vector(*vector));
    journal_[index.vector_digest] = key;
    log_->alarm(name_, code::kRecovered,
                key.describe() + " restored from " + endpoint::name(source) + " as " +
                    render(vector->values) + "; damaged value was " + previous);
    out.recovered = true;
    out.from = source;
    out.restored = std::move(vector);
    return out;
  }
  log_->alarm(name_, code::kUnrecoverable,
              "no intact copy of " + index.serialize() + " among replicas [" +
                  render(index.replica_ids) + "]");
  return out;
}

std::vector<ValidationFinding> StorageNode::validate_cycle(const Chain& chain,
                                                           const ReplicaTransport& transport,
                                                           std::optional<MinuteStamp> stale_before) {
  std::vector<ValidationFinding> findings;
  const auto verdict = chain.verify();
  if (!verdict.valid()) {
    log_->alarm(name_, code::kChainInvalid,
                "validator aborted: first bad block at " +
                    std::to_string(verdict.first_bad->position) + " (" +
                    std::string(to_string(verdict.first_bad->reason)) + ")");
    return findings;
  }

  std::set<RecordKey> covered;
  for (const auto& block : chain.walk_back()) {
    for (const auto& index : block.indexes) {
      if (!index.lists(id())) {
        continue;
      }
      ValidationFinding f;
      f.node = id();
      f.time = index.captured_at;
      f.expected_digest = index.vector_digest;
      f.key = key_for(index.vector_digest);
      if (f.key) {
        covered.insert(*f.key);
        if (const auto* record = historian_.find(*f.key)) {
          f.found_digest = vector_digest(record->as_vector(), algo_);
        }
      }
      if (f.found_digest == f.expected_digest) {
        findings.push_back(std::move(f));
        continue;
      }
      log_->alarm(name_, code::kFalseDataInjection,
                  "False Data Injection alarm: " +
                      (f.key ? f.key->describe() : "vector@" + f.time.iso()) + " expected " +
                      f.expected_digest.hex() + " found " +
                      (f.found_digest ? f.found_digest->hex() : std::string("missing")));
      const auto rec = recover(index, transport);
      if (rec.recovered) {
        f.verdict = Verdict::TamperedRecovered;
        f.recovered_from = rec.from;
        f.key = RecordKey{rec.restored->sensor_name, rec.restored->captured_at};
        covered.insert(*f.key);
      } else {
        f.verdict = Verdict::TamperedUnrecoverable;
      }
      findings.push_back(std::move(f));
    }
  }

  coverage_gaps_.clear();
  for (const auto& record : historian_.records()) {
    const auto key = record.key();
    if (covered.count(key) || !stale_before || !(record.time < *stale_before)) {
      continue;
    }
    coverage_gaps_.push_back(key);
    if (std::find(reported_gaps_.begin(), reported_gaps_.end(), key) == reported_gaps_.end()) {
      reported_gaps_.push_back(key);
      log_->alarm(name_, code::kCoverageGap,
                  key.describe() + " has no ledger index; integrity cannot be checked");
    }
  }

  const auto intact = static_cast<std::size_t>(std::count_if(
      findings.begin(), findings.end(), [](const auto& f) { return f.verdict == Verdict::Intact; }));
  if (intact == findings.size()) {
    log_->info(name_, code::kCheckOk, "check ok: " + std::to_string(findings.size()) +
                                          " records intact across " +
                                          std::to_string(chain.size()) + " blocks");
  }
  return findings;
}

}  // namespace histchain
