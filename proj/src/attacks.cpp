#include "histchain/attacks.hpp"

#include <algorithm>
#include <sstream>

namespace histchain {

namespace {

constexpr std::string_view kAdversary = "adversary";

std::string render(const std::vector<std::uint32_t>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += (i ? "," : "") + std::to_string(values[i]);
  }
  return out + "]";
}

void collect_timeline(ScenarioReport& report, const EventLog& log, std::size_t from) {
  const auto& records = log.records();
  for (std::size_t i = from; i < records.size(); ++i) {
    if (records[i].severity == Severity::Alarm || records[i].code == code::kAttack) {
      report.timeline.push_back(records[i]);
    }
  }
}

/// Rejects any mutator output whose header differs from its input.
Interceptor header_guard(Interceptor inner, std::shared_ptr<std::size_t> violations) {
  return [inner = std::move(inner), violations](const Frame& in) -> std::optional<Frame> {
    auto out = inner(in);
    if (out && (out->version != in.version || out->msg_type != in.msg_type ||
                out->sender_id != in.sender_id || out->recipient_id != in.recipient_id ||
                out->payload.size() != in.payload.size())) {
      ++*violations;
    }
    return out;
  };
}

bool contains(const Bytes& hay, std::string_view needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

ArtifactSnapshot ArtifactSnapshot::capture(const Simulation& sim) {
  ArtifactSnapshot s;
  s.chain_dump = sim.chain_dump();
  for (NodeId id : sim.node_ids()) {
    s.historians[id] = sim.historian_dump(id);
  }
  return s;
}

void ArtifactSnapshot::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_text(dir / "chain.txt", chain_dump);
  for (const auto& [id, text] : historians) {
    write_text(dir / ("historian_" + std::to_string(id) + ".txt"), text);
  }
}

bool ScenarioReport::passed() const {
  return !assertions.empty() &&
         std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.passed; });
}

void ScenarioReport::check(std::string name, bool ok, std::string detail) {
  assertions.push_back(Assertion{std::move(name), ok, std::move(detail)});
}

std::string ScenarioReport::serialize() const {
  std::ostringstream out;
  out << "scenario\t" << scenario_id << '\n';
  out << "seed\t" << seed << '\n';
  for (const auto& [k, v] : facts) {
    out << "fact\t" << k << '\t' << v << '\n';
  }
  for (const auto& e : timeline) {
    out << "event\t" << e.tick << '\t' << e.actor << '\t' << to_string(e.severity) << '\t'
        << e.code << '\t' << e.detail << '\n';
  }
  for (const auto& a : assertions) {
    out << "assert\t" << a.name << '\t' << (a.passed ? "PASS" : "FAIL") << '\t' << a.detail
        << '\n';
  }
  out << "result\t" << (passed() ? "PASS" : "FAIL") << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

std::vector<MeasurementVector> reference_vectors() {
  const auto at = [](unsigned minute) { return MinuteStamp::from_civil(2020, 12, 23, 17, minute); };
  return {
      {"Sensor 1", at(26), {2, 5}},
      {"Sensor 1", at(27), {6, 7, 7, 6, 7, 7, 6, 7, 7, 6}},
      {"Sensor 2", at(28), {4, 4, 5, 4, 5, 3, 6, 3, 6, 3}},
  };
}

std::map<MinuteStamp, std::vector<NodeId>> reference_replicas() {
  const auto at = [](unsigned minute) { return MinuteStamp::from_civil(2020, 12, 23, 17, minute); };
  return {{at(26), {1, 4, 2}}, {at(27), {1, 6, 3}}, {at(28), {1, 5, 2}}};
}

std::unique_ptr<Simulation> make_reference_fixture(SimConfig config) {
  config.start = MinuteStamp::from_civil(2020, 12, 23, 17, 26);
  config.minutes = std::max(config.minutes, 4);
  if (config.n_storage_nodes < 6 || config.replication_factor != 3) {
    throw ScenarioSetupError("the reference fixture needs >= 6 storage nodes and replication 3");
  }
  auto sim = std::make_unique<Simulation>(config);
  sim->set_plant_enabled(false);

  auto& chain = sim->chain_module();
  chain.set_replica_picker([&chain, fixed = reference_replicas()](const IndexSubmission& s) {
    const auto it = fixed.find(s.captured_at);
    if (it != fixed.end() && it->second.front() == s.origin) {
      return it->second;
    }
    return chain.draw_replicas(s.origin);
  });

  const Tick interval = config.interval_ticks;
  const auto vectors = reference_vectors();
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& v = vectors[i];
    const auto plc = v.sensor_name == "Sensor 1" ? PlcId::PLC1 : PlcId::PLC2;
    Simulation* s = sim.get();
    sim->at(static_cast<Tick>(i + 1) * interval - 1, Phase::Plant,
            [s, plc, v] { s->submit_vector(plc, v, NodeId{1}); });
  }
  // Last block at 4 intervals, then one validator cycle.
  sim->run_until(sim->next_validator_tick(4 * interval) + 1);
  return sim;
}

ScenarioReport run_scenario_A(Simulation& sim, const TamperSpec& spec) {
  ScenarioReport report;
  report.scenario_id = "A_historian_tamper";
  report.seed = sim.config().seed;
  const std::size_t log_start = sim.events().records().size();

  auto& target = sim.node(spec.target);
  const HistorianRecord* existing = target.historian().find(spec.key);
  if (existing == nullptr && !spec.insert_if_missing) {
    throw ScenarioSetupError("no record " + spec.key.describe() + " on " + target.name());
  }
  const std::optional<HistorianRecord> original =
      existing ? std::optional(*existing) : std::nullopt;
  const auto algo = sim.config().hash;

  std::optional<LedgerIndex> index;
  if (original) {
    const Digest d = vector_digest(original->as_vector(), algo);
    for (const auto& block : sim.chain().blocks()) {
      for (const auto& idx : block.indexes) {
        if (idx.vector_digest == d && idx.lists(spec.target)) {
          index = idx;
        }
      }
    }
  }

  std::vector<NodeId> corrupted{spec.target};
  corrupted.insert(corrupted.end(), spec.also_corrupt.begin(), spec.also_corrupt.end());
  bool any_intact = false;
  if (index) {
    for (NodeId n : index->replica_ids) {
      if (std::find(corrupted.begin(), corrupted.end(), n) != corrupted.end()) {
        continue;
      }
      const auto* copy = sim.node(n).historian().find(spec.key);
      any_intact = any_intact || (copy && vector_digest(copy->as_vector(), algo) ==
                                              index->vector_digest);
    }
  }

  report.fact("target", target.name());
  report.fact("record", spec.key.describe());
  report.fact("original", original ? render(original->value) : "-");
  report.fact("forged", spec.delete_record ? "deleted" : render(spec.forged));
  report.fact("coverage", index ? "ledger index " + index->serialize() : "outside ledger coverage");

  const Tick tamper_tick = sim.now() + 1;
  sim.at(tamper_tick, Phase::Adversary, [&] {
    for (NodeId n : corrupted) {
      auto& h = sim.node(n).historian();
      if (spec.delete_record) {
        h.erase(spec.key);
      } else if (h.find(spec.key) || n == spec.target) {
        h.overwrite(HistorianRecord{spec.key.name, spec.forged, spec.key.time});
      }
      sim.events().alarm(kAdversary, code::kAttack,
                         std::string(spec.delete_record ? "deleted " : "overwrote ") +
                             spec.key.describe() + " on " + sim.node(n).name());
    }
    report.tampered_state = ArtifactSnapshot::capture(sim);
  });

  const Tick validator_tick = sim.next_validator_tick(tamper_tick);
  sim.run_until(validator_tick + 1);

  const ValidatorCycle* cycle = nullptr;
  int cycles = 0;
  for (const auto& c : sim.validator_history()) {
    if (c.node == spec.target && c.tick >= tamper_tick) {
      ++cycles;
      cycle = &c;
      break;
    }
  }
  if (cycle == nullptr) {
    report.check("validator ran", false, "no validator cycle on target after tampering");
    collect_timeline(report, sim.events(), log_start);
    return report;
  }
  report.fact("detection_latency_cycles", std::to_string(cycles));

  std::vector<const ValidationFinding*> flagged;
  for (const auto& f : cycle->findings) {
    if (f.verdict != Verdict::Intact) {
      flagged.push_back(&f);
    }
  }

  if (!index) {
    report.check("no ledger finding for unindexed record", flagged.empty(),
                 std::to_string(flagged.size()) + " findings flagged");
    const auto& gaps = target.coverage_gaps();
    report.check("coverage gap reported",
                 std::find(gaps.begin(), gaps.end(), spec.key) != gaps.end(),
                 "outside ledger coverage");
    collect_timeline(report, sim.events(), log_start);
    return report;
  }

  const bool exactly_target = flagged.size() == 1 && flagged.front()->key == spec.key;
  report.check("detects exactly the tampered record", exactly_target,
               std::to_string(flagged.size()) + " of " + std::to_string(cycle->findings.size()) +
                   " records flagged");
  report.check("other records intact",
               std::all_of(cycle->findings.begin(), cycle->findings.end(),
                           [&](const auto& f) {
                             return f.key == spec.key || f.verdict == Verdict::Intact;
                           }));

  if (exactly_target) {
    const auto& finding = *flagged.front();
    if (any_intact) {
      report.check("recovered", finding.verdict == Verdict::TamperedRecovered,
                   std::string(to_string(finding.verdict)));
      if (finding.recovered_from) {
        report.fact("recovered_from", endpoint::name(*finding.recovered_from));
      }
      const auto* now = target.historian().find(spec.key);
      report.check("restored value equals original", now && original && now->value == original->value,
                   now ? render(now->value) : "missing");
      report.check("restored digest equals ledger digest",
                   now && vector_digest(now->as_vector(), algo) == index->vector_digest);
    } else {
      report.check("unrecoverable", finding.verdict == Verdict::TamperedUnrecoverable,
                   std::string(to_string(finding.verdict)));
      report.check("operator alarmed", sim.events().count(target.name(), code::kUnrecoverable) > 0);
    }
  }
  collect_timeline(report, sim.events(), log_start);
  return report;
}

// ---------------------------------------------------------------------------

Interceptor payload_flipper(MsgType target, std::size_t body_from, std::size_t body_to,
                            std::uint64_t seed, std::shared_ptr<std::vector<Frame>> transcript) {
  auto rng = std::make_shared<RngStream>(seed, "adversary");
  return [=](const Frame& in) -> std::optional<Frame> {
    if (transcript) {
      transcript->push_back(in);
    }
    if (in.msg_type != target || in.payload.size() < 4) {
      return in;
    }
    std::size_t ct_len = 0;
    for (int i = 0; i < 4; ++i) {
      ct_len = (ct_len << 8) | in.payload[i];
    }
    const std::size_t body_start = 4 + kEncKeyBytes + 16;
    const std::size_t body_end = std::min(4 + ct_len, in.payload.size());
    if (body_end <= body_start) {
      return in;
    }
    const std::size_t lo = body_start + body_from;
    const std::size_t hi = body_to >= body_end - body_start ? body_end : body_start + body_to;
    if (lo >= hi) {
      return in;
    }
    Frame out = in;
    const std::size_t run = std::min<std::size_t>(3, hi - lo);
    const std::size_t at = lo + rng->below(hi - lo - run + 1);
    for (std::size_t i = at; i < at + run; ++i) {
      out.payload[i] ^= static_cast<std::uint8_t>(1 + rng->below(255));
    }
    return out;
  };
}

Interceptor passive_tap(std::shared_ptr<std::vector<Frame>> transcript) {
  return [transcript](const Frame& in) -> std::optional<Frame> {
    transcript->push_back(in);
    return in;
  };
}

namespace {

struct MitmWindow {
  Tick install = 0;
  Tick remove = 0;
  MinuteStamp minute;
};

MitmWindow plan_window(const Simulation& sim, const MitmSpec& spec, Tick lag) {
  const auto& cfg = sim.config();
  if (spec.attack_interval < 0 || cfg.minutes < spec.attack_interval + 2) {
    throw ScenarioSetupError("attack interval must leave one clean interval before the run ends");
  }
  const Tick interval = cfg.interval_ticks;
  const Tick install = spec.attack_interval * interval + lag;
  if (sim.now() > install || sim.chain().size() > 1) {
    throw ScenarioSetupError("MITM scenarios start from a fresh simulation");
  }
  return {install, (spec.attack_interval + 1) * interval + lag,
          cfg.start + spec.attack_interval};
}

}  // namespace

ScenarioReport run_scenario_B(Simulation& sim, const MitmSpec& spec) {
  ScenarioReport report;
  report.scenario_id = "B_mitm_plc_storage";
  report.seed = sim.config().seed;
  const auto window = plan_window(sim, spec, 0);
  const auto plc = endpoint::plc(1);
  const NodeId node1 = sim.route(PlcId::PLC1);
  const std::string sensor = sensor_name(SensorId::S1);

  auto transcript = std::make_shared<std::vector<Frame>>();
  auto violations = std::make_shared<std::size_t>(0);
  // The readings follow `name|YYYY-MM-DDTHH:MM|` in the plaintext.
  const std::size_t readings_from = sensor.size() + 18;
  Interceptor mutator = spec.passive
                            ? passive_tap(transcript)
                            : payload_flipper(MsgType::Measurement, readings_from, SIZE_MAX,
                                              sim.config().seed, transcript);
  mutator = header_guard(std::move(mutator), violations);

  auto handle = std::make_shared<InterceptorHandle>();
  sim.at(window.install, Phase::Adversary, [&sim, plc, node1, mutator, handle, &spec] {
    *handle = sim.network().install_interceptor(plc, node1, mutator);
    sim.events().alarm(kAdversary, code::kAttack,
                       std::string(spec.passive ? "eavesdropping" : "injecting") + " on " +
                           endpoint::name(plc) + "<->" + endpoint::name(node1));
  });
  sim.at(window.remove, Phase::Adversary, [&sim, handle] {
    sim.network().remove_interceptor(*handle);
    sim.events().alarm(kAdversary, code::kAttack, "interceptor removed");
  });
  sim.run();

  const auto& h = sim.node(node1).historian();
  const bool stored_attacked = h.find({sensor, window.minute}) != nullptr;
  const auto damaged = sim.events().count(sim.node(node1).name(), code::kDataDamaged);
  report.fact("link", endpoint::name(plc) + "<->" + endpoint::name(node1));
  report.fact("attacked_interval", window.minute.iso());
  report.fact("frames_seen", std::to_string(transcript->size()));

  report.check("interceptor touched payload bytes only", *violations == 0,
               std::to_string(*violations) + " header changes");
  if (spec.passive) {
    std::size_t alarms = 0;
    for (const auto& e : sim.events().records()) {
      alarms += e.severity == Severity::Alarm && e.code != code::kAttack;
    }
    report.check("no alarms under eavesdropping", alarms == 0, std::to_string(alarms));
    report.check("attacked interval stored normally", stored_attacked);
    report.check("transcript non-empty", !transcript->empty());
    bool leaked = false;
    for (const auto& record : h.records()) {
      const auto plain = canonical_serialize(record.as_vector());
      for (const auto& f : *transcript) {
        leaked = leaked || contains(f.payload, plain);
      }
    }
    report.check("transcript carries no plaintext", !leaked);
  } else {
    report.check("exactly one digest-mismatch alarm", damaged == 1, std::to_string(damaged));
    report.check("nothing stored for the attacked interval", !stored_attacked);
    report.check("storage resumes next interval",
                 h.find({sensor, window.minute + 1}) != nullptr);
  }
  collect_timeline(report, sim.events(), 0);
  return report;
}

ScenarioReport run_scenario_C(Simulation& sim, const MitmSpec& spec) {
  ScenarioReport report;
  report.scenario_id = "C_mitm_storage_chain";
  report.seed = sim.config().seed;
  // Opens one tick late, after the previous interval's index has left.
  const auto window = plan_window(sim, spec, 1);
  const NodeId node1 = sim.route(PlcId::PLC1);
  const NodeId node2 = sim.route(PlcId::PLC2);
  std::vector<NodeId> victims{node1};
  if (spec.both_links) {
    victims.push_back(node2);
  }

  auto violations = std::make_shared<std::size_t>(0);
  auto handles = std::make_shared<std::vector<InterceptorHandle>>();
  for (std::size_t i = 0; i < victims.size(); ++i) {
    const NodeId victim = victims[i];
    // Digest hex leads the index submission.
    Interceptor mutator = header_guard(
        payload_flipper(MsgType::Index, 0, 64, sim.config().seed + i, nullptr), violations);
    sim.at(window.install, Phase::Adversary, [&sim, victim, mutator, handles] {
      handles->push_back(sim.network().install_interceptor(victim, endpoint::kChain, mutator));
      sim.events().alarm(kAdversary, code::kAttack,
                         "injecting on " + endpoint::name(victim) + "<->chain");
    });
  }
  sim.at(window.remove, Phase::Adversary, [&sim, handles] {
    for (const auto& h : *handles) {
      sim.network().remove_interceptor(h);
    }
    sim.events().alarm(kAdversary, code::kAttack, "interceptors removed");
  });
  sim.run();

  const auto algo = sim.config().hash;
  const auto dump = sim.chain_dump();
  const auto* v1 = sim.node(node1).historian().find({sensor_name(SensorId::S1), window.minute});
  const auto* v2 = sim.node(node2).historian().find({sensor_name(SensorId::S2), window.minute});
  const auto* next1 =
      sim.node(node1).historian().find({sensor_name(SensorId::S1), window.minute + 1});

  std::size_t rejected_node1 = 0;
  std::vector<std::string> forged;
  for (const auto& r : sim.chain_module().rejected()) {
    rejected_node1 += r.sender == node1;
    for (const auto& d : {r.error.received_digest, r.error.rebuilt_digest}) {
      if (!d.empty()) {
        forged.push_back(d);
      }
    }
  }
  if (v1) {
    forged.push_back(vector_digest(v1->as_vector(), algo).hex());
  }

  // Indexes for the attacked interval are minted two boundaries later.
  const MinuteStamp minted = window.minute + 2;
  const Block* block = nullptr;
  for (const auto& b : sim.chain().blocks()) {
    if (b.minted_at == minted) {
      block = &b;
    }
  }

  report.fact("link", endpoint::name(node1) + "<->chain");
  report.fact("attacked_interval", window.minute.iso());
  report.check("interceptor touched payload bytes only", *violations == 0);
  report.check("node1 index rejected once", rejected_node1 == 1, std::to_string(rejected_node1));
  if (spec.both_links) {
    report.check("no block minted for the attacked interval", block == nullptr);
  } else {
    const bool only_node2 = block && block->indexes.size() == 1 &&
                            block->indexes.front().origin() == node2 && v2 &&
                            block->indexes.front().vector_digest ==
                                vector_digest(v2->as_vector(), algo);
    report.check("block holds node2's index only", only_node2,
                 block ? std::to_string(block->indexes.size()) + " indexes" : "no block");
  }
  bool leaked = false;
  for (const auto& d : forged) {
    leaked = leaked || dump.find(d) != std::string::npos;
  }
  report.check("forged digest absent from chain", v1 != nullptr && !leaked,
               std::to_string(forged.size()) + " digests checked");
  const auto& gaps = sim.node(node1).coverage_gaps();
  const bool gap = std::find(gaps.begin(), gaps.end(),
                             RecordKey{sensor_name(SensorId::S1), window.minute}) != gaps.end();
  report.check("coverage gap raised for node1's unindexed vector", gap);
  report.check("node1 indexed normally once the attack is lifted",
               next1 && dump.find(vector_digest(next1->as_vector(), algo).hex()) !=
                            std::string::npos);
  collect_timeline(report, sim.events(), 0);
  return report;
}

}  // namespace histchain
