#include "histchain/ledger.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <set>

namespace histchain {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) {
      return out;
    }
    start = pos + 1;
  }
}

template <typename Int>
Int parse_int(std::string_view token, const char* what) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size()) {
    throw SerializationError(std::string("bad ") + what + ": " + std::string(token));
  }
  return value;
}

Digest zero_hash(HashAlgorithm algo) {
  return Digest::from_hex(std::string(digest_size(algo) * 2, '0'));
}

}  // namespace

bool LedgerIndex::lists(NodeId node) const {
  return std::find(replica_ids.begin(), replica_ids.end(), node) != replica_ids.end();
}

bool LedgerIndex::well_formed() const {
  if (replica_ids.empty() || vector_digest.empty()) {
    return false;
  }
  std::set<NodeId> seen(replica_ids.begin(), replica_ids.end());
  return seen.size() == replica_ids.size() && !seen.count(0);
}

std::string LedgerIndex::serialize() const {
  std::string out = vector_digest.hex() + "|" + captured_at.iso() + "|";
  for (std::size_t i = 0; i < replica_ids.size(); ++i) {
    if (i != 0) {
      out += ',';
    }
    out += std::to_string(replica_ids[i]);
  }
  return out;
}

LedgerIndex LedgerIndex::parse(std::string_view line) {
  const auto fields = split(line, '|');
  if (fields.size() != 3) {
    throw SerializationError("malformed ledger index: " + std::string(line));
  }
  LedgerIndex idx;
  idx.vector_digest = Digest::from_hex(fields[0]);
  try {
    idx.captured_at = MinuteStamp::parse(fields[1]);
  } catch (const std::invalid_argument& e) {
    throw SerializationError(e.what());
  }
  for (auto id : split(fields[2], ',')) {
    idx.replica_ids.push_back(parse_int<NodeId>(id, "replica id"));
  }
  return idx;
}

std::string serialize_indexes(std::span<const LedgerIndex> indexes) {
  std::string out;
  for (std::size_t i = 0; i < indexes.size(); ++i) {
    if (i != 0) {
      out += '\n';
    }
    out += indexes[i].serialize();
  }
  return out;
}

Digest compute_block_hash(const Digest& prev, std::span<const LedgerIndex> indexes,
                          MinuteStamp minted_at, HashAlgorithm algo) {
  const std::string preimage =
      prev.hex() + "\n" + serialize_indexes(indexes) + "\n" + minted_at.iso();
  return digest(preimage, algo);
}

Block make_block(std::vector<LedgerIndex> indexes, const Digest& prev_hash, MinuteStamp minted_at,
                 HashAlgorithm algo) {
  if (indexes.empty()) {
    throw EmptyBlockError("refusing to mint a block without indexes");
  }
  for (const auto& idx : indexes) {
    if (!idx.well_formed()) {
      throw std::invalid_argument("malformed ledger index: " + idx.serialize());
    }
  }
  Block b;
  b.block_hash = compute_block_hash(prev_hash, indexes, minted_at, algo);
  b.indexes = std::move(indexes);
  b.prev_block_hash = prev_hash;
  b.minted_at = minted_at;
  return b;
}

Block genesis_block(HashAlgorithm algo) {
  Block g;
  g.prev_block_hash = zero_hash(algo);
  g.minted_at = MinuteStamp(0);
  g.block_hash = compute_block_hash(g.prev_block_hash, g.indexes, g.minted_at, algo);
  return g;
}

std::string_view to_string(BlockFault f) {
  switch (f) {
    case BlockFault::BadGenesis:
      return "BadGenesis";
    case BlockFault::HashMismatch:
      return "HashMismatch";
    case BlockFault::LinkMismatch:
      return "LinkMismatch";
    case BlockFault::EmptyBlock:
      return "EmptyBlock";
    case BlockFault::BadIndex:
      return "BadIndex";
  }
  return "?";
}

ChainVerdict verify_chain(std::span<const Block> blocks, HashAlgorithm algo) {
  if (blocks.empty() || blocks.front() != genesis_block(algo)) {
    return {FirstBadBlock{0, BlockFault::BadGenesis}};
  }
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (compute_block_hash(b.prev_block_hash, b.indexes, b.minted_at, algo) != b.block_hash) {
      return {FirstBadBlock{i, BlockFault::HashMismatch}};
    }
    if (b.prev_block_hash != blocks[i - 1].block_hash) {
      return {FirstBadBlock{i, BlockFault::LinkMismatch}};
    }
    if (b.indexes.empty()) {
      return {FirstBadBlock{i, BlockFault::EmptyBlock}};
    }
    for (const auto& idx : b.indexes) {
      if (!idx.well_formed()) {
        return {FirstBadBlock{i, BlockFault::BadIndex}};
      }
    }
  }
  return {};
}

// ---------------------------------------------------------------------------

const Block& ChainWalk::iterator::operator*() const { return chain_->blocks()[*pos_]; }

ChainWalk::iterator& ChainWalk::iterator::operator++() {
  const auto& current = chain_->blocks()[*pos_];
  ++steps_;
  pos_ = chain_->find(current.prev_block_hash);
  // Stops after size() steps on a cyclic chain.
  if (steps_ >= chain_->size()) {
    pos_.reset();
  }
  return *this;
}

Chain::Chain(HashAlgorithm algo) : algo_(algo) {
  blocks_.push_back(genesis_block(algo));
  by_hash_.emplace(blocks_.back().block_hash.hex(), 0);
}

Chain Chain::from_blocks_unchecked(std::vector<Block> blocks, HashAlgorithm algo) {
  Chain c(algo);
  c.blocks_ = std::move(blocks);
  c.by_hash_.clear();
  for (std::size_t i = 0; i < c.blocks_.size(); ++i) {
    c.by_hash_.emplace(c.blocks_[i].block_hash.hex(), i);
  }
  return c;
}

void Chain::append(Block block) {
  if (block.prev_block_hash != tip().block_hash) {
    throw ChainLinkError("block " + block.block_hash.hex() + " does not extend tip " +
                         tip().block_hash.hex());
  }
  by_hash_.emplace(block.block_hash.hex(), blocks_.size());
  blocks_.push_back(std::move(block));
}

std::optional<std::size_t> Chain::find(const Digest& block_hash) const {
  const auto it = by_hash_.find(block_hash.hex());
  if (it == by_hash_.end()) {
    return std::nullopt;
  }
  return it->second;
}

ChainWalk Chain::walk_back(const Digest& from_block_hash) const {
  const auto pos = find(from_block_hash);
  if (!pos) {
    throw std::out_of_range("unknown block hash " + from_block_hash.hex());
  }
  return ChainWalk(this, *pos);
}

void Chain::write_dump(std::ostream& out) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    out << i << '\t' << b.minted_at.iso() << '\t' << b.block_hash.hex() << '\t'
        << b.prev_block_hash.hex() << '\t';
    for (std::size_t j = 0; j < b.indexes.size(); ++j) {
      out << (j ? ";" : "") << b.indexes[j].serialize();
    }
    out << '\n';
  }
}

Chain Chain::read_dump(std::istream& in, HashAlgorithm algo) {
  std::vector<Block> blocks;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const auto fields = split(line, '\t');
    if (fields.size() != 5) {
      throw SerializationError("malformed chain dump line: " + line);
    }
    if (parse_int<std::size_t>(fields[0], "block position") != blocks.size()) {
      throw SerializationError("chain dump positions out of order at: " + line);
    }
    Block b;
    try {
      b.minted_at = MinuteStamp::parse(fields[1]);
    } catch (const std::invalid_argument& e) {
      throw SerializationError(e.what());
    }
    b.block_hash = Digest::from_hex(fields[2]);
    b.prev_block_hash = Digest::from_hex(fields[3]);
    if (!fields[4].empty()) {
      for (auto idx : split(fields[4], ';')) {
        b.indexes.push_back(LedgerIndex::parse(idx));
      }
    }
    blocks.push_back(std::move(b));
  }
  return from_blocks_unchecked(std::move(blocks), algo);
}

}  // namespace histchain
