#include <gtest/gtest.h>

#include <sodium.h>

#include <set>
#include <sstream>

#include "histchain/ledger.hpp"
#include "histchain/rng.hpp"

using namespace histchain;

namespace {

// Standalone block hash: sha256(prev_hex "\n" index lines "\n" minted_iso),
// each index line `digest|iso|ids`.
std::string oracle_block_hash(const std::string& prev_hex,
                              const std::vector<std::string>& index_lines,
                              const std::string& minted_iso) {
  std::string msg = prev_hex + "\n";
  for (std::size_t i = 0; i < index_lines.size(); ++i) {
    msg += (i ? "\n" : "") + index_lines[i];
  }
  msg += "\n" + minted_iso;
  unsigned char out[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(out, reinterpret_cast<const unsigned char*>(msg.data()), msg.size());
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned char c : out) {
    s += hex[c >> 4];
    s += hex[c & 15];
  }
  return s;
}

const MinuteStamp kT0 = MinuteStamp::from_civil(2020, 12, 23, 17, 26);

LedgerIndex random_index(RngStream& r, MinuteStamp at) {
  LedgerIndex idx;
  idx.vector_digest = digest(std::to_string(r.next()));
  idx.captured_at = at;
  std::vector<NodeId> pool{1, 2, 3, 4, 5, 6};
  for (int k = 0; k < 3; ++k) {
    const auto i = r.below(pool.size());
    idx.replica_ids.push_back(pool[i]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return idx;
}

Chain build_chain(std::size_t blocks, std::uint64_t seed) {
  RngStream r(seed, "chain-test");
  Chain c;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::vector<LedgerIndex> idx;
    const auto n = 1 + r.below(3);
    for (std::uint64_t i = 0; i < n; ++i) {
      idx.push_back(random_index(r, kT0 + static_cast<std::int64_t>(b)));
    }
    c.append(make_block(std::move(idx), c.tip().block_hash, kT0 + static_cast<std::int64_t>(b + 2)));
  }
  return c;
}

}  // namespace

TEST(LedgerIndex, SerializesAndParses) {
  LedgerIndex idx{digest(std::string_view{"v"}), MinuteStamp::from_civil(2020, 12, 23, 3, 24), {1, 6, 3}};
  EXPECT_EQ(idx.serialize(), idx.vector_digest.hex() + "|2020-12-23T03:24|1,6,3");
  EXPECT_EQ(LedgerIndex::parse(idx.serialize()), idx);
  EXPECT_EQ(idx.origin(), 1);
  EXPECT_TRUE(idx.lists(6));
  EXPECT_FALSE(idx.lists(2));
  EXPECT_TRUE(idx.well_formed());
  EXPECT_FALSE((LedgerIndex{idx.vector_digest, idx.captured_at, {1, 1}}.well_formed()));
  EXPECT_FALSE((LedgerIndex{idx.vector_digest, idx.captured_at, {}}.well_formed()));
  EXPECT_FALSE((LedgerIndex{idx.vector_digest, idx.captured_at, {0, 2}}.well_formed()));
  EXPECT_THROW(LedgerIndex::parse("nothex|2020-12-23T03:24|1"), SerializationError);
}

TEST(Block, HashMatchesStandaloneOracle) {
  RngStream r(1, "oracle");
  Chain c;
  for (int b = 0; b < 20; ++b) {
    std::vector<LedgerIndex> idx{random_index(r, kT0), random_index(r, kT0 + 1)};
    std::vector<std::string> lines;
    for (const auto& i : idx) lines.push_back(i.serialize());
    const auto prev = c.tip().block_hash;
    const auto block = make_block(idx, prev, kT0 + b);
    EXPECT_EQ(block.block_hash.hex(), oracle_block_hash(prev.hex(), lines, (kT0 + b).iso()));
    c.append(block);
  }
}

TEST(Block, DeterministicAndSingleIndexLinkage) {
  LedgerIndex idx{digest(std::string_view{"D"}), MinuteStamp::from_civil(2020, 12, 23, 3, 24), {1, 6, 3}};
  const auto g = genesis_block();
  const auto a = make_block({idx}, g.block_hash, kT0);
  const auto b = make_block({idx}, g.block_hash, kT0);
  EXPECT_EQ(a.block_hash, b.block_hash);
  ASSERT_EQ(a.indexes.size(), 1u);
  EXPECT_EQ(a.indexes[0], idx);
  EXPECT_EQ(a.prev_block_hash, g.block_hash);
}

TEST(Block, RejectsEmptyAndMalformed) {
  const auto g = genesis_block();
  EXPECT_THROW(make_block({}, g.block_hash, kT0), EmptyBlockError);
  LedgerIndex dup{digest(std::string_view{"x"}), kT0, {2, 2}};
  EXPECT_THROW(make_block({dup}, g.block_hash, kT0), std::invalid_argument);
}

TEST(Genesis, ZeroPrevNoIndexesEpoch) {
  const auto g = genesis_block();
  EXPECT_EQ(g.prev_block_hash.hex(), std::string(64, '0'));
  EXPECT_TRUE(g.indexes.empty());
  EXPECT_EQ(g.minted_at, MinuteStamp{});
  EXPECT_EQ(g.block_hash.hex(), oracle_block_hash(std::string(64, '0'), {}, "1970-01-01T00:00"));
}

TEST(Chain, AppendChecksLinkage) {
  Chain c;
  LedgerIndex idx{digest(std::string_view{"a"}), kT0, {1, 2, 3}};
  c.append(make_block({idx}, c.tip().block_hash, kT0));
  EXPECT_EQ(c.size(), 2u);
  EXPECT_THROW(c.append(make_block({idx}, c.blocks()[0].block_hash, kT0 + 1)), ChainLinkError);
  EXPECT_EQ(c.size(), 2u);
}

TEST(Chain, HundredAppendsVerify) {
  EXPECT_TRUE(build_chain(100, 3).verify().valid());
}

TEST(Chain, MutatedDigestInBlockSevenIsHashMismatchAtSeven) {
  auto blocks = build_chain(50, 4).blocks();
  blocks[7].indexes[0].vector_digest = digest(std::string_view{"forged"});
  const auto v = verify_chain(blocks);
  ASSERT_FALSE(v.valid());
  EXPECT_EQ(*v.first_bad, (FirstBadBlock{7, BlockFault::HashMismatch}));
}

TEST(Chain, SwappedBlocksFailAtFirstSwappedPosition) {
  auto blocks = build_chain(30, 5).blocks();
  std::swap(blocks[12], blocks[20]);
  const auto v = verify_chain(blocks);
  ASSERT_FALSE(v.valid());
  EXPECT_EQ(v.first_bad->position, 12u);
  EXPECT_EQ(v.first_bad->reason, BlockFault::LinkMismatch);
}

TEST(Chain, TamperedGenesisIsReported) {
  auto blocks = build_chain(3, 6).blocks();
  blocks[0].minted_at = kT0;
  const auto v = verify_chain(blocks);
  ASSERT_FALSE(v.valid());
  EXPECT_EQ(*v.first_bad, (FirstBadBlock{0, BlockFault::BadGenesis}));
}

TEST(Chain, RehashedEmptyBlockIsStillRejected) {
  auto blocks = build_chain(5, 7).blocks();
  blocks[3].indexes.clear();
  blocks[3].block_hash = compute_block_hash(blocks[3].prev_block_hash, {}, blocks[3].minted_at);
  const auto v = verify_chain(blocks);
  ASSERT_FALSE(v.valid());
  EXPECT_EQ(v.first_bad->position, 3u);
}

TEST(ChainWalk, VisitsEveryBlockOnce) {
  const auto c = build_chain(25, 8);
  std::set<std::string> seen;
  std::size_t n = 0;
  for (const auto& b : c.walk_back()) {
    seen.insert(b.block_hash.hex());
    ++n;
  }
  EXPECT_EQ(n, 26u);
  std::set<std::string> stored;
  for (const auto& b : c.blocks()) stored.insert(b.block_hash.hex());
  EXPECT_EQ(seen, stored);

  n = 0;
  for (const auto& b : c.walk_back(c.blocks()[0].block_hash)) {
    (void)b;
    ++n;
  }
  EXPECT_EQ(n, 1u);
  EXPECT_THROW(c.walk_back(digest(std::string_view{"nope"})), std::out_of_range);
}

TEST(Chain, DumpRoundTrips) {
  const auto c = build_chain(10, 9);
  std::stringstream s;
  c.write_dump(s);
  const auto back = Chain::read_dump(s);
  EXPECT_EQ(back.blocks(), c.blocks());
  EXPECT_TRUE(back.verify().valid());
  std::istringstream bad("0\tnot-a-line\n");
  EXPECT_ANY_THROW(Chain::read_dump(bad));
}
