#include "histchain/audit.hpp"

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace histchain {

std::string_view to_string(AuditStatus s) {
  switch (s) {
    case AuditStatus::Intact:
      return "Intact";
    case AuditStatus::Tampered:
      return "Tampered";
    case AuditStatus::Missing:
      return "Missing";
  }
  return "?";
}

bool AuditReport::all_intact() const {
  return chain.valid() && flagged().empty();
}

std::vector<AuditRecordVerdict> AuditReport::flagged() const {
  std::vector<AuditRecordVerdict> out;
  for (const auto& r : records) {
    if (r.status != AuditStatus::Intact) {
      out.push_back(r);
    }
  }
  return out;
}

std::string AuditReport::render() const {
  std::ostringstream out;
  if (chain.valid()) {
    out << "chain\tValid\n";
  } else {
    out << "chain\tFirstBadBlock\t" << chain.first_bad->position << '\t'
        << to_string(chain.first_bad->reason) << '\n';
  }
  for (const auto& r : records) {
    out << "record\tnode" << r.node << '\t' << r.time.iso() << '\t'
        << (r.key ? r.key->name : std::string("-")) << '\t' << to_string(r.status) << '\t'
        << r.expected_digest.hex() << '\n';
  }
  for (const auto& [node, key] : unindexed) {
    out << "unindexed\tnode" << node << '\t' << key.time.iso() << '\t' << key.name << '\n';
  }
  out << "verdict\t" << (all_intact() ? "ALL_INTACT" : "FLAGGED") << '\n';
  return out.str();
}

AuditReport audit(const Chain& chain, const std::map<NodeId, Historian>& historians) {
  AuditReport report;
  report.chain = chain.verify();
  if (!report.chain.valid()) {
    return report;
  }
  const HashAlgorithm algo = chain.algorithm();

  for (const auto& [node, historian] : historians) {
    // Chain order, oldest first; every index that lists this node.
    std::vector<const LedgerIndex*> listed;
    for (const auto& block : chain.blocks()) {
      for (const auto& idx : block.indexes) {
        if (idx.lists(node)) {
          listed.push_back(&idx);
        }
      }
    }
    std::map<RecordKey, Digest> digests;
    for (const auto& r : historian.records()) {
      digests.emplace(r.key(), vector_digest(r.as_vector(), algo));
    }

    std::set<RecordKey> claimed;
    std::vector<AuditRecordVerdict> verdicts(listed.size());
    for (std::size_t i = 0; i < listed.size(); ++i) {
      const auto& idx = *listed[i];
      auto& v = verdicts[i];
      v.node = node;
      v.time = idx.captured_at;
      v.expected_digest = idx.vector_digest;
      v.status = AuditStatus::Missing;
      for (const auto* r : historian.at_time(idx.captured_at)) {
        if (!claimed.count(r->key()) && digests.at(r->key()) == idx.vector_digest) {
          v.status = AuditStatus::Intact;
          v.key = r->key();
          claimed.insert(r->key());
          break;
        }
      }
    }
    for (auto& v : verdicts) {
      if (v.status == AuditStatus::Intact) {
        continue;
      }
      for (const auto* r : historian.at_time(v.time)) {
        if (!claimed.count(r->key())) {
          v.status = AuditStatus::Tampered;
          v.key = r->key();
          claimed.insert(r->key());
          break;
        }
      }
    }
    for (const auto& r : historian.records()) {
      if (!claimed.count(r.key())) {
        report.unindexed.emplace_back(node, r.key());
      }
    }
    report.records.insert(report.records.end(), verdicts.begin(), verdicts.end());
  }
  return report;
}

AuditReport audit_directory(const std::filesystem::path& dir, HashAlgorithm algo) {
  std::ifstream chain_in(dir / "chain.txt");
  if (!chain_in) {
    throw std::runtime_error("cannot read " + (dir / "chain.txt").string());
  }
  const Chain chain = Chain::read_dump(chain_in, algo);

  std::map<NodeId, Historian> historians;
  const std::regex pattern(R"(historian_(\d+)\.txt)");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string file = entry.path().filename().string();
    if (!std::regex_match(file, m, pattern)) {
      continue;
    }
    std::ifstream in(entry.path());
    if (!in) {
      throw std::runtime_error("cannot read " + entry.path().string());
    }
    historians.emplace(static_cast<NodeId>(std::stoi(m[1].str())), Historian::read_dump(in));
  }
  if (historians.empty()) {
    throw std::runtime_error("no historian dumps in " + dir.string());
  }
  return audit(chain, historians);
}

}  // namespace histchain
