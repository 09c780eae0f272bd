#include <gtest/gtest.h>

#include <sstream>

#include "cluster.hpp"

using namespace histchain;
using histchain::testing::Cluster;

namespace {

MinuteStamp at(unsigned minute) { return MinuteStamp::from_civil(2020, 12, 23, 17, minute); }

const MeasurementVector kRow26{"Sensor 1", at(26), {2, 5}};
const MeasurementVector kRow27{"Sensor 1", at(27), {6, 7, 7, 6, 7, 7, 6, 7, 7, 6}};
const MeasurementVector kRow28{"Sensor 2", at(28), {4, 4, 5, 4, 5, 3, 6, 3, 6, 3}};

/// Historian 1 as in the tampering reproduction, replicated [1,4,2], [1,6,3], [1,5,2].
void seed_reference_historian(Cluster& c) {
  c.store(1, kRow26, {1, 4, 2});
  c.store(1, kRow27, {1, 6, 3});
  c.store(1, kRow28, {1, 5, 2});
}

const ValidationFinding& finding_for(const std::vector<ValidationFinding>& fs, const RecordKey& k) {
  for (const auto& f : fs) {
    if (f.key == k) return f;
  }
  throw std::runtime_error("no finding for " + k.describe());
}

}  // namespace

TEST(Historian, InsertRejectsDuplicatesAndKeepsOrder) {
  Historian h;
  EXPECT_TRUE(h.insert(HistorianRecord::from_vector(kRow27)));
  EXPECT_TRUE(h.insert(HistorianRecord::from_vector(kRow26)));
  EXPECT_FALSE(h.insert(HistorianRecord{"Sensor 1", {9}, at(27)}));
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h.records()[0].time, at(27));
  EXPECT_EQ(h.time_ordered()[0].time, at(26));
  h.overwrite(HistorianRecord{"Sensor 1", {2, 1}, at(27)});
  EXPECT_EQ(h.records()[0].value, (std::vector<std::uint32_t>{2, 1}));
  EXPECT_TRUE(h.erase({"Sensor 1", at(27)}));
  EXPECT_EQ(h.find({"Sensor 1", at(27)}), nullptr);
  EXPECT_THROW(h.insert(HistorianRecord{"Sensor 1", {}, at(30)}), std::invalid_argument);
}

TEST(Historian, DumpRoundTrips) {
  Historian h;
  h.insert(HistorianRecord::from_vector(kRow26));
  h.insert(HistorianRecord::from_vector(kRow28));
  std::stringstream s;
  h.write_dump(s);
  EXPECT_EQ(s.str(), "Sensor 1|2020-12-23T17:26|2,5\nSensor 2|2020-12-23T17:28|4,4,5,4,5,3,6,3,6,3\n");
  EXPECT_EQ(Historian::read_dump(s), h);
}

TEST(Register, AuthenticVectorIsStoredAndIndexed) {
  Cluster c;
  const MeasurementVector v{"Sensor 1", at(26), {7, 6, 6, 7, 7, 6, 7, 6, 6, 6, 7}};
  const auto out = c.node(1).register_measurement(c.measurement(1, v));
  ASSERT_TRUE(out.stored);
  ASSERT_TRUE(out.index_message);
  EXPECT_EQ(out.index_message->recipient_id, 1000);
  EXPECT_EQ(c.log.count("node1", code::kAuthenticMessage), 1u);
  ASSERT_NE(c.node(1).historian().find({"Sensor 1", at(26)}), nullptr);
  EXPECT_EQ(c.node(1).key_for(vector_digest(v)), (RecordKey{"Sensor 1", at(26)}));
}

TEST(Register, MangledEnvelopeIsRejectedWithDamageAlarm) {
  Cluster c;
  auto env = c.measurement(1, kRow27);
  env.ciphertext[60] ^= 0x10;
  const auto out = c.node(1).register_measurement(env);
  EXPECT_FALSE(out.stored);
  EXPECT_FALSE(out.index_message);
  ASSERT_TRUE(out.auth_error);
  EXPECT_EQ(out.auth_error->kind, AuthErrorKind::DigestMismatch);
  EXPECT_EQ(c.node(1).historian().size(), 0u);
  ASSERT_EQ(c.log.count(code::kDataDamaged), 1u);
  EXPECT_NE(c.log.records().back().detail.find("THEY WILL NOT STORED IN THE HISTORIAN"),
            std::string::npos);
}

TEST(Register, DuplicateKeyIsRejected) {
  Cluster c;
  EXPECT_TRUE(c.node(1).register_measurement(c.measurement(1, kRow26)).stored);
  const auto again = c.node(1).register_measurement(c.measurement(1, kRow26));
  EXPECT_FALSE(again.stored);
  EXPECT_EQ(again.alarm_code, code::kDuplicateRecord);
}

TEST(Replication, ListedNodesPullAndOthersDoNothing) {
  Cluster c;
  c.store(1, kRow27, {1, 6, 3});
  const RecordKey key{"Sensor 1", at(27)};
  for (NodeId n : {1, 6, 3}) {
    const auto* r = c.node(n).historian().find(key);
    ASSERT_NE(r, nullptr) << n;
    EXPECT_EQ(r->value, kRow27.values);
  }
  for (NodeId n : {2, 4, 5}) {
    EXPECT_EQ(c.node(n).historian().size(), 0u) << n;
  }
  EXPECT_EQ(c.log.count(code::kReplicaStored), 2u);
}

TEST(Replication, CorruptSourceCopyIsNotStored) {
  Cluster c;
  auto reg = c.node(1).register_measurement(c.measurement(1, kRow27));
  c.node(1).historian().overwrite(HistorianRecord{"Sensor 1", {2, 1}, at(27)});
  c.chain->set_replica_picker([](const IndexSubmission&) { return std::vector<NodeId>{1, 6, 3}; });
  c.chain->collect(*reg.index_message);
  const auto block = c.chain->close_interval(at(29));
  const auto logs = c.chain->broadcast_log(block->block_hash);
  const auto pulls = c.node(6).handle_log(logs[5], c.chain->chain(), c.transport());
  ASSERT_EQ(pulls.size(), 1u);
  EXPECT_FALSE(pulls[0].stored);
  EXPECT_EQ(c.node(6).historian().size(), 0u);
  EXPECT_GE(c.log.count("node6", code::kReplicaMismatch), 1u);
}

TEST(Replication, ForeignLogIsRejected) {
  Cluster c;
  c.store(1, kRow26, {1, 2, 3});
  const auto logs = c.chain->broadcast_log(c.chain->chain().tip().block_hash);
  ASSERT_EQ(logs.size(), 6u);
  for (std::size_t i = 1; i < logs.size(); ++i) {
    EXPECT_NE(logs[0].ciphertext, logs[i].ciphertext);
  }
  EXPECT_TRUE(c.node(2).handle_log(logs[0], c.chain->chain(), c.transport()).empty());
  EXPECT_EQ(c.log.count("node2", code::kLogRejected), 1u);
}

TEST(ServeReplica, PresentAbsentAndMangled) {
  Cluster c;
  c.store(1, kRow27, {1, 6, 3});
  RngStream e(9, "req");
  const auto ask = [&](const std::string& body) {
    return seal(to_bytes(body), c.keys[2], c.dir.at(1), e);
  };
  const auto unwrap = [&](const SignedEnvelope& env) {
    return to_string(std::get<Bytes>(open(env, c.keys[2], c.dir.at(1))));
  };
  const auto d = vector_digest(kRow27);
  auto resp = c.node(1).serve_replica(ask(d.hex() + "|" + at(27).iso()));
  ASSERT_TRUE(resp);
  const auto body = unwrap(*resp);
  EXPECT_EQ(body, "+" + canonical_serialize(kRow27));
  EXPECT_EQ(vector_digest(parse_canonical(body.substr(1))), d);

  resp = c.node(1).serve_replica(ask(digest(std::string_view{"x"}).hex() + "|" + at(27).iso()));
  ASSERT_TRUE(resp);
  EXPECT_EQ(unwrap(*resp)[0], '-');

  auto mangled = ask(d.hex() + "|" + at(27).iso());
  mangled.ciphertext.back() ^= 1;
  EXPECT_FALSE(c.node(1).serve_replica(mangled));
  EXPECT_EQ(c.log.count("node1", code::kReplicaRequestRejected), 1u);
}

TEST(Validator, UntamperedHistorianIsIntact) {
  Cluster c;
  for (int i = 0; i < 10; ++i) {
    c.store(1, {"Sensor 1", at(0) + i, {static_cast<std::uint32_t>(i), 3}}, {1, 2, 3});
  }
  ASSERT_EQ(c.chain->chain().size(), 11u);
  const auto fs = c.node(1).validate_cycle(c.chain->chain(), c.transport());
  EXPECT_EQ(fs.size(), 10u);
  for (const auto& f : fs) EXPECT_EQ(f.verdict, Verdict::Intact);
  EXPECT_EQ(c.log.count("node1", code::kCheckOk), 1u);
}

TEST(Validator, ForgedRowIsRecoveredFromNode6) {
  Cluster c;
  seed_reference_historian(c);
  const RecordKey key{"Sensor 1", at(27)};
  c.node(1).historian().overwrite(HistorianRecord{"Sensor 1", {2, 1}, at(27)});
  const auto fs = c.node(1).validate_cycle(c.chain->chain(), c.transport());
  ASSERT_EQ(fs.size(), 3u);
  const auto& f = finding_for(fs, key);
  EXPECT_EQ(f.verdict, Verdict::TamperedRecovered);
  EXPECT_EQ(f.recovered_from, NodeId{6});
  EXPECT_EQ(f.expected_digest, vector_digest(kRow27));
  EXPECT_EQ(f.found_digest, vector_digest({"Sensor 1", at(27), {2, 1}}));
  EXPECT_EQ(finding_for(fs, {"Sensor 1", at(26)}).verdict, Verdict::Intact);
  EXPECT_EQ(finding_for(fs, {"Sensor 2", at(28)}).verdict, Verdict::Intact);
  EXPECT_EQ(c.node(1).historian().find(key)->value, kRow27.values);
  EXPECT_EQ(c.log.count("node1", code::kFalseDataInjection), 1u);
}

TEST(Validator, DeletedRecordIsRecovered) {
  Cluster c;
  seed_reference_historian(c);
  const RecordKey key{"Sensor 1", at(27)};
  c.node(1).historian().erase(key);
  const auto fs = c.node(1).validate_cycle(c.chain->chain(), c.transport());
  const auto& f = finding_for(fs, key);
  EXPECT_EQ(f.verdict, Verdict::TamperedRecovered);
  EXPECT_FALSE(f.found_digest);
  ASSERT_NE(c.node(1).historian().find(key), nullptr);
}

TEST(Recover, FollowsReplicaListOrder) {
  Cluster c;
  seed_reference_historian(c);
  const auto idx = c.chain->chain().blocks()[2].indexes[0];
  ASSERT_EQ(idx.replica_ids, (std::vector<NodeId>{1, 6, 3}));
  const RecordKey key{"Sensor 1", at(27)};
  auto out = c.node(1).recover(idx, c.transport());
  EXPECT_TRUE(out.recovered);
  EXPECT_EQ(out.from, 6);

  c.node(6).historian().overwrite(HistorianRecord{"Sensor 1", {0}, at(27)});
  out = c.node(1).recover(idx, c.transport());
  EXPECT_TRUE(out.recovered);
  EXPECT_EQ(out.from, 3);
  ASSERT_TRUE(out.restored);
  EXPECT_EQ(vector_digest(*out.restored), idx.vector_digest);

  c.node(3).historian().erase(key);
  out = c.node(1).recover(idx, c.transport());
  EXPECT_FALSE(out.recovered);
  EXPECT_EQ(c.log.count("node1", code::kUnrecoverable), 1u);
}

TEST(Recover, UnreachableHolderFallsThrough) {
  Cluster c;
  seed_reference_historian(c);
  c.offline = {6};
  const auto idx = c.chain->chain().blocks()[2].indexes[0];
  const auto out = c.node(1).recover(idx, c.transport());
  EXPECT_TRUE(out.recovered);
  EXPECT_EQ(out.from, 3);
  EXPECT_GE(c.log.count("node1", code::kReplicaUnavailable), 1u);
}

TEST(Validator, AllCopiesCorruptIsUnrecoverable) {
  Cluster c;
  seed_reference_historian(c);
  const RecordKey key{"Sensor 1", at(27)};
  for (NodeId n : {1, 6, 3}) {
    c.node(n).historian().overwrite(HistorianRecord{"Sensor 1", {2, 1}, at(27)});
  }
  const auto fs = c.node(1).validate_cycle(c.chain->chain(), c.transport());
  EXPECT_EQ(finding_for(fs, key).verdict, Verdict::TamperedUnrecoverable);
  EXPECT_EQ(c.node(1).historian().find(key)->value, (std::vector<std::uint32_t>{2, 1}));
}

TEST(Validator, InvalidChainAbortsTheCycle) {
  Cluster c;
  seed_reference_historian(c);
  auto blocks = c.chain->chain().blocks();
  blocks[2].indexes[0].replica_ids = {1, 6, 4};
  const auto broken = Chain::from_blocks_unchecked(blocks);
  EXPECT_TRUE(c.node(1).validate_cycle(broken, c.transport()).empty());
  EXPECT_EQ(c.log.count("node1", code::kChainInvalid), 1u);
}

TEST(Validator, UnindexedRecordIsACoverageGapOnce) {
  Cluster c;
  seed_reference_historian(c);
  const RecordKey planted{"Sensor 1", at(20)};
  c.node(4).historian().insert(HistorianRecord{"Sensor 1", {1, 2}, at(20)});
  auto fs = c.node(4).validate_cycle(c.chain->chain(), c.transport(), at(40));
  EXPECT_EQ(c.node(4).coverage_gaps(), std::vector<RecordKey>{planted});
  for (const auto& f : fs) EXPECT_EQ(f.verdict, Verdict::Intact);
  c.node(4).validate_cycle(c.chain->chain(), c.transport(), at(40));
  EXPECT_EQ(c.log.count("node4", code::kCoverageGap), 1u);
}

TEST(Validator, RecentRecordsAreNotYetGaps) {
  Cluster c;
  c.node(1).register_measurement(c.measurement(1, kRow26));
  c.node(1).validate_cycle(c.chain->chain(), c.transport(), at(26));
  EXPECT_TRUE(c.node(1).coverage_gaps().empty());
}
