#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "histchain/attacks.hpp"
#include "histchain/audit.hpp"

using namespace histchain;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Verdicts = std::map<std::pair<NodeId, std::string>, bool>;

/// State captured during criteria 1-4 for the offline oracle comparison.
struct OracleCase {
  std::string label;
  Chain chain;
  std::map<NodeId, Historian> historians;
  std::optional<fs::path> artifacts;
  Verdicts validator;
  std::set<NodeId> nodes;  // restrict the audit side to these nodes
};
std::vector<OracleCase> g_oracle_cases;

MinuteStamp at(unsigned minute) { return MinuteStamp::from_civil(2020, 12, 23, 17, minute); }

Verdicts verdicts_of(const std::vector<ValidationFinding>& fs) {
  Verdicts out;
  for (const auto& f : fs) out[{f.node, f.expected_digest.hex()}] = f.verdict == Verdict::Intact;
  return out;
}

std::vector<ValidationFinding> last_cycle(const Simulation& sim) {
  std::vector<ValidationFinding> out;
  const Tick last = sim.validator_history().back().tick;
  for (const auto& c : sim.validator_history()) {
    if (c.tick == last) out.insert(out.end(), c.findings.begin(), c.findings.end());
  }
  return out;
}

std::map<NodeId, Historian> historians_of(const Simulation& sim) {
  std::map<NodeId, Historian> out;
  for (NodeId id : sim.node_ids()) out[id] = sim.node(id).historian();
  return out;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("histchain_acceptance_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string fmt(bool ok, const std::string& what) { return (ok ? "" : "NOT ") + what; }

// ---------------------------------------------------------------------------

Outcome criterion1() {
  SimConfig cfg;
  auto sim = make_reference_fixture(cfg);
  const auto report = run_scenario_A(*sim, TamperSpec{});
  const auto& cycle = sim->validator_history().back();
  const RecordKey target{"Sensor 1", at(27)};
  int flagged = 0, intact = 0;
  bool recovered = false;
  for (const auto& f : sim->validator_history()) {
    if (f.node != 1 || f.tick != cycle.tick) continue;
    for (const auto& x : f.findings) {
      if (x.verdict == Verdict::Intact) {
        ++intact;
      } else {
        ++flagged;
        recovered = x.key == target && x.verdict == Verdict::TamperedRecovered;
      }
    }
  }
  const auto* now = sim->node(1).historian().find(target);
  const bool restored = now && now->value == std::vector<std::uint32_t>{6, 7, 7, 6, 7, 7, 6, 7, 7, 6};

  const auto dir = scratch("c1_tampered");
  report.tampered_state->write(dir);
  std::vector<ValidationFinding> node1;
  for (const auto& c : sim->validator_history()) {
    if (c.node == 1 && c.tick == cycle.tick) node1 = c.findings;
  }
  g_oracle_cases.push_back({"scenario A tampered state", sim->chain(), {}, dir, verdicts_of(node1), {1}});

  const bool ok = report.passed() && flagged == 1 && recovered && intact == 2 && restored;
  return {ok, std::to_string(flagged) + " flagged, " + std::to_string(intact) + " intact, " +
                  fmt(restored, "restored to [6,7,7,6,7,7,6,7,7,6]")};
}

Outcome criterion2() {
  SimConfig cfg;
  cfg.minutes = 4;
  Simulation sim(cfg);
  const auto report = run_scenario_B(sim, MitmSpec{});
  std::size_t mismatch = 0;
  for (const auto& e : sim.events().records()) {
    mismatch += e.actor == "node1" && e.code == code::kDataDamaged &&
                e.detail.find("digest_received=") != std::string::npos;
  }
  const bool nothing = sim.node(1).historian().find({"Sensor 1", at(28)}) == nullptr &&
                       sim.node(1).historian().at_time(at(28)).empty();
  const bool resumed = sim.node(1).historian().find({"Sensor 1", at(29)}) != nullptr;
  const auto dir = scratch("c2");
  sim.write_artifacts(dir);
  g_oracle_cases.push_back({"scenario B final state", sim.chain(), {}, dir, verdicts_of(last_cycle(sim)), {}});
  return {report.passed() && mismatch == 1 && nothing && resumed,
          std::to_string(mismatch) + " DigestMismatch alarm(s), " + fmt(nothing, "empty") +
              " attacked interval, storage " + fmt(resumed, "resumed")};
}

Outcome criterion3() {
  SimConfig cfg;
  cfg.minutes = 4;
  Simulation sim(cfg);
  const auto report = run_scenario_C(sim, MitmSpec{});
  const auto dump = sim.chain_dump();
  const auto* v1 = sim.node(1).historian().find({"Sensor 1", at(28)});
  const auto* v2 = sim.node(2).historian().find({"Sensor 2", at(28)});
  const Block* block = nullptr;
  for (const auto& b : sim.chain().blocks()) {
    if (b.minted_at == at(30)) block = &b;
  }
  const bool node2_only = block && v2 && block->indexes.size() == 1 &&
                          block->indexes[0].vector_digest == vector_digest(v2->as_vector());
  bool forged_absent = v1 != nullptr && dump.find(vector_digest(v1->as_vector()).hex()) == std::string::npos;
  for (const auto& r : sim.chain_module().rejected()) {
    for (const auto& d : {r.error.received_digest, r.error.rebuilt_digest}) {
      forged_absent = forged_absent && (d.empty() || dump.find(d) == std::string::npos);
    }
  }
  const auto& gaps = sim.node(1).coverage_gaps();
  const bool gap = std::find(gaps.begin(), gaps.end(), RecordKey{"Sensor 1", at(28)}) != gaps.end();
  const auto dir = scratch("c3");
  sim.write_artifacts(dir);
  g_oracle_cases.push_back({"scenario C final state", sim.chain(), {}, dir, verdicts_of(last_cycle(sim)), {}});
  return {report.passed() && node2_only && forged_absent && gap,
          "block " + fmt(node2_only, "node2-only") + ", forged digests " +
              fmt(forged_absent, "absent") + ", coverage gap " + fmt(gap, "raised")};
}

Outcome criterion4() {
  SimConfig cfg;
  cfg.seed = 4;
  cfg.minutes = 10;
  Simulation sim(cfg);
  sim.run();
  if (sim.chain().size() < 11) return {false, "only " + std::to_string(sim.chain().size()) + " blocks"};
  RngStream rng(4, "mutation");
  std::size_t trials = 0, exact = 0, false_pos = 0;
  for (NodeId node : sim.node_ids()) {
    const auto keys = [&] {
      std::vector<RecordKey> k;
      for (const auto& r : sim.node(node).historian().records()) k.push_back(r.key());
      return k;
    }();
    for (const auto& key : keys) {
      auto& h = sim.node(node).historian();
      const HistorianRecord original = *h.find(key);
      HistorianRecord forged = original;
      forged.value[rng.below(forged.value.size())] ^= static_cast<std::uint32_t>(1 + rng.below(255));
      h.overwrite(forged);
      auto state = historians_of(sim);
      const auto findings = sim.validate_now(node);
      ++trials;
      std::size_t flagged = 0;
      bool hit = false;
      for (const auto& f : findings) {
        if (f.verdict == Verdict::Intact) continue;
        ++flagged;
        hit = f.key == key;
      }
      exact += flagged == 1 && hit && *h.find(key) == original;
      false_pos += flagged > 1 || (flagged == 1 && !hit);
      g_oracle_cases.push_back({"mutation " + key.describe() + " on node" + std::to_string(node),
                                sim.chain(), std::move(state), std::nullopt, verdicts_of(findings), {node}});
    }
  }
  return {trials > 0 && exact == trials && false_pos == 0,
          std::to_string(exact) + "/" + std::to_string(trials) + " mutations detected exactly, " +
              std::to_string(false_pos) + " false positives, " + std::to_string(sim.chain().size() - 1) +
              " blocks"};
}

Outcome criterion5() {
  SimConfig cfg;
  cfg.seed = 5;
  cfg.minutes = 5;
  Simulation sim(cfg);
  sim.run();
  RngStream rng(5, "recovery-matrix");
  int agree = 0, recovered_total = 0;
  constexpr int kTrials = 500;
  for (int t = 0; t < kTrials; ++t) {
    const auto& block = sim.chain().blocks()[1 + rng.below(sim.chain().size() - 1)];
    const auto idx = block.indexes[rng.below(block.indexes.size())];
    const auto key = *sim.node(idx.origin()).key_for(idx.vector_digest);
    const HistorianRecord original = *sim.node(idx.origin()).historian().find(key);
    const auto mask = 1 + rng.below(7);
    std::vector<NodeId> corrupted;
    for (std::size_t i = 0; i < idx.replica_ids.size(); ++i) {
      if (!(mask & (1u << i))) continue;
      const NodeId n = idx.replica_ids[i];
      corrupted.push_back(n);
      auto& h = sim.node(n).historian();
      if (rng.below(4) == 0) {
        h.erase(key);
      } else {
        HistorianRecord forged = original;
        forged.value[rng.below(forged.value.size())] += static_cast<std::uint32_t>(1 + rng.below(9));
        h.overwrite(forged);
      }
    }
    const NodeId validator = corrupted[rng.below(corrupted.size())];
    const bool any_intact = corrupted.size() < idx.replica_ids.size();
    bool recovered = false, digest_ok = true;
    for (const auto& f : sim.validate_now(validator)) {
      if (f.expected_digest != idx.vector_digest) continue;
      recovered = f.verdict == Verdict::TamperedRecovered;
      if (recovered) {
        const auto* now = sim.node(validator).historian().find(key);
        digest_ok = now && vector_digest(now->as_vector()) == idx.vector_digest;
      }
    }
    agree += recovered == any_intact && digest_ok;
    recovered_total += recovered;
    for (NodeId n : idx.replica_ids) sim.node(n).historian().overwrite(original);
  }
  return {agree == kTrials, std::to_string(agree) + "/" + std::to_string(kTrials) +
                                " trials agree (" + std::to_string(recovered_total) + " recovered)"};
}

Outcome criterion6() {
  RngStream rng(6, "chain-mutation");
  Chain chain;
  const auto random_index = [&](MinuteStamp m) {
    LedgerIndex idx{digest(std::to_string(rng.next())), m, {}};
    std::vector<NodeId> pool{1, 2, 3, 4, 5, 6};
    for (int k = 0; k < 3; ++k) {
      const auto i = rng.below(pool.size());
      idx.replica_ids.push_back(pool[i]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
    }
    return idx;
  };
  for (int b = 0; b < 100; ++b) {
    std::vector<LedgerIndex> idx{random_index(at(0) + b), random_index(at(0) + b)};
    chain.append(make_block(std::move(idx), chain.tip().block_hash, at(2) + b));
  }
  if (!chain.verify().valid()) return {false, "unmutated chain does not verify"};

  constexpr int kMutations = 300;
  int correct = 0;
  for (int m = 0; m < kMutations; ++m) {
    auto blocks = chain.blocks();
    const std::size_t pos = m < 10 ? 0 : 1 + rng.below(100);
    auto& b = blocks[pos];
    const auto field = rng.below(pos == 0 ? 3 : 7);
    switch (field) {
      case 0:
        b.block_hash = digest(std::to_string(rng.next()));
        break;
      case 1:
        b.prev_block_hash = digest(std::to_string(rng.next()));
        break;
      case 2:
        b.minted_at = b.minted_at + static_cast<std::int64_t>(1 + rng.below(100));
        break;
      case 3:
        b.indexes[rng.below(b.indexes.size())].vector_digest = digest(std::to_string(rng.next()));
        break;
      case 4:
        b.indexes[rng.below(b.indexes.size())].captured_at = b.minted_at + 7;
        break;
      case 5: {
        auto& ids = b.indexes[rng.below(b.indexes.size())].replica_ids;
        for (NodeId n = 1; n <= 9; ++n) {
          if (std::find(ids.begin(), ids.end(), n) == ids.end()) {
            ids[rng.below(ids.size())] = n;
            break;
          }
        }
        break;
      }
      default:
        b.indexes.erase(b.indexes.begin() + static_cast<std::ptrdiff_t>(rng.below(b.indexes.size())));
        break;
    }
    const auto v = verify_chain(blocks);
    correct += !v.valid() && v.first_bad->position == pos;
  }
  return {correct == kMutations,
          std::to_string(correct) + "/" + std::to_string(kMutations) +
              " mutations located at the right block; unmutated chain Valid"};
}

Outcome criterion7() {
  RngStream rng(7, "envelope");
  RngStream entropy(7, "entropy");
  constexpr int kCases = 1000;
  int round_trips = 0, caught = 0;
  for (int i = 0; i < kCases; ++i) {
    const auto sender = NodeKeys::generate(static_cast<EndpointId>(1 + rng.below(999)), rng);
    const auto recipient = NodeKeys::generate(static_cast<EndpointId>(1 + rng.below(999)), rng);
    Bytes plain(rng.below(400));
    rng.fill(plain.data(), plain.size());
    const auto env = seal(plain, sender, recipient.public_keys(), entropy);
    const auto out = open(env, recipient, sender.public_keys());
    round_trips += std::holds_alternative<Bytes>(out) && std::get<Bytes>(out) == plain;

    auto broken = env;
    const auto total = broken.ciphertext.size() + broken.signature.size();
    const auto at_byte = rng.below(total);
    auto& target = at_byte < broken.ciphertext.size() ? broken.ciphertext[at_byte]
                                                      : broken.signature[at_byte - broken.ciphertext.size()];
    target ^= static_cast<std::uint8_t>(1 + rng.below(255));
    caught += std::holds_alternative<AuthError>(open(broken, recipient, sender.public_keys()));
  }
  return {round_trips == kCases && caught == kCases,
          std::to_string(round_trips) + "/" + std::to_string(kCases) + " round trips, " +
              std::to_string(caught) + "/" + std::to_string(kCases) + " mutations rejected"};
}

Outcome criterion8() {
  EventLog log;
  KeyDirectory dir;
  RngStream keys(8, "keys");
  ChainModule chain(NodeKeys::generate(endpoint::kChain, keys), dir, {1, 2, 3, 4, 5, 6}, 3,
                    HashAlgorithm::Sha256, 8, log);
  std::map<std::pair<NodeId, NodeId>, int> counts;
  constexpr int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) {
    const auto ids = chain.draw_replicas(1);
    ++counts[{ids[1], ids[2]}];
  }
  double chi2 = 0;
  const double expected = kDraws / 20.0;
  for (const auto& [pair, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
  constexpr double kCritical = 36.191;  // df 19, alpha 0.01
  std::ostringstream d;
  d << counts.size() << " ordered pairs, chi2=" << chi2 << " (critical " << kCritical << ")";
  return {counts.size() == 20 && chi2 < kCritical, d.str()};
}

Outcome criterion9() {
  const auto a = scratch("c9_a"), b = scratch("c9_b");
  for (const auto& dir : {a, b}) {
    const auto cmd = std::string(HISTCHAIN_CLI) + " run --minutes 10 --seed 42 --out " + dir.string() +
                     " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "cli run failed"};
  }
  std::size_t compared = 0, same = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    ++compared;
    same += fs::exists(b / name) && read_text(a / name) == read_text(b / name);
  }
  const bool has_all = fs::exists(a / "events.tsv") && fs::exists(a / "chain.txt") &&
                       fs::exists(a / "historian_1.txt");
  fs::remove_all(a);
  fs::remove_all(b);
  return {has_all && compared == same && compared >= 8,
          std::to_string(same) + "/" + std::to_string(compared) + " artifact files byte-identical"};
}

Outcome criterion10() {
  std::size_t agree = 0;
  std::string first_disagreement;
  for (const auto& c : g_oracle_cases) {
    const auto report = c.artifacts ? audit_directory(*c.artifacts) : audit(c.chain, c.historians);
    Verdicts offline;
    for (const auto& r : report.records) {
      if (c.nodes.empty() || c.nodes.count(r.node)) {
        offline[{r.node, r.expected_digest.hex()}] = r.status == AuditStatus::Intact;
      }
    }
    if (offline == c.validator && !c.validator.empty()) {
      ++agree;
    } else if (first_disagreement.empty()) {
      first_disagreement = "; first disagreement: " + c.label;
    }
  }
  return {!g_oracle_cases.empty() && agree == g_oracle_cases.size(),
          std::to_string(agree) + "/" + std::to_string(g_oracle_cases.size()) +
              " states audited identically" + first_disagreement};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double budget_s;
  };
  const std::vector<Criterion> criteria{
      {1, "scenario A reproduction", criterion1, 1.0},
      {2, "scenario B reproduction", criterion2, 1.0},
      {3, "scenario C reproduction", criterion3, 1.0},
      {4, "detection completeness", criterion4, 30.0},
      {5, "recovery matrix", criterion5, 0},
      {6, "chain integrity", criterion6, 0},
      {7, "envelope property", criterion7, 0},
      {8, "replica-assignment distribution", criterion8, 0},
      {9, "determinism", criterion9, 0},
      {10, "oracle equivalence", criterion10, 0},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = c.budget_s == 0 || secs < c.budget_s;
    const bool pass = o.pass && in_budget;
    failures += !pass;
    std::ostringstream t;
    t.precision(3);
    t << std::fixed << secs << "s";
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << o.detail
              << " [" << t.str() << (c.budget_s > 0 ? ", budget " + std::to_string(static_cast<int>(c.budget_s * 1000)) + "ms" : "")
              << (in_budget ? "" : ", OVER BUDGET") << "]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
