#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <iterator>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "histchain/crypto.hpp"
#include "histchain/timestamp.hpp"

namespace histchain {

using NodeId = std::uint16_t;

/// One stored vector as recorded on chain: its digest, capture minute and the
/// ordered list of historians holding it. `replica_ids[0]` is the origin.
struct LedgerIndex {
  Digest vector_digest;
  MinuteStamp captured_at;
  std::vector<NodeId> replica_ids;

  NodeId origin() const { return replica_ids.front(); }
  bool lists(NodeId node) const;
  /// Non-empty, distinct, non-zero ids.
  bool well_formed() const;
  /// `digest_hex|YYYY-MM-DDTHH:MM|id,id,id`
  std::string serialize() const;
  static LedgerIndex parse(std::string_view line);

  friend bool operator==(const LedgerIndex&, const LedgerIndex&) = default;
};

std::string serialize_indexes(std::span<const LedgerIndex> indexes);

struct Block {
  std::vector<LedgerIndex> indexes;
  Digest block_hash;
  Digest prev_block_hash;
  MinuteStamp minted_at;

  friend bool operator==(const Block&, const Block&) = default;
};

struct EmptyBlockError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ChainLinkError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// digest(prev_hex '\n' serialize_indexes(indexes) '\n' minted_iso)
Digest compute_block_hash(const Digest& prev, std::span<const LedgerIndex> indexes,
                          MinuteStamp minted_at, HashAlgorithm algo = HashAlgorithm::Sha256);

/// Throws EmptyBlockError for an empty index list and std::invalid_argument
/// for a malformed replica list.
Block make_block(std::vector<LedgerIndex> indexes, const Digest& prev_hash, MinuteStamp minted_at,
                 HashAlgorithm algo = HashAlgorithm::Sha256);

/// All-zero prev hash, no indexes, minted at the epoch.
Block genesis_block(HashAlgorithm algo = HashAlgorithm::Sha256);

enum class BlockFault { BadGenesis, HashMismatch, LinkMismatch, EmptyBlock, BadIndex };
std::string_view to_string(BlockFault f);

struct FirstBadBlock {
  std::size_t position = 0;
  BlockFault reason = BlockFault::HashMismatch;
  friend bool operator==(const FirstBadBlock&, const FirstBadBlock&) = default;
};

struct ChainVerdict {
  std::optional<FirstBadBlock> first_bad;
  bool valid() const { return !first_bad.has_value(); }
};

/// Reports the earliest block whose hash does not recompute or whose prev
/// link does not match its predecessor.
ChainVerdict verify_chain(std::span<const Block> blocks, HashAlgorithm algo = HashAlgorithm::Sha256);

class Chain;

/// Follows prev_block_hash links from a starting block back to genesis.
class ChainWalk {
 public:
  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Block;
    using difference_type = std::ptrdiff_t;
    using pointer = const Block*;
    using reference = const Block&;

    iterator() = default;
    reference operator*() const;
    pointer operator->() const { return &**this; }
    iterator& operator++();
    iterator operator++(int) {
      auto copy = *this;
      ++*this;
      return copy;
    }
    friend bool operator==(const iterator& a, const iterator& b) { return a.pos_ == b.pos_; }

   private:
    friend class ChainWalk;
    iterator(const Chain* chain, std::optional<std::size_t> pos) : chain_(chain), pos_(pos) {}
    const Chain* chain_ = nullptr;
    std::optional<std::size_t> pos_;
    std::size_t steps_ = 0;
  };

  iterator begin() const { return iterator(chain_, start_); }
  iterator end() const { return iterator(chain_, std::nullopt); }

 private:
  friend class Chain;
  ChainWalk(const Chain* chain, std::size_t start) : chain_(chain), start_(start) {}
  const Chain* chain_;
  std::size_t start_;
};

/// Append-only hash chain anchored at the genesis block.
class Chain {
 public:
  explicit Chain(HashAlgorithm algo = HashAlgorithm::Sha256);

  /// Builds a chain from stored blocks without checking them; use
  /// verify_chain on the result. Intended for loading dumps.
  static Chain from_blocks_unchecked(std::vector<Block> blocks,
                                     HashAlgorithm algo = HashAlgorithm::Sha256);

  /// Throws ChainLinkError unless block.prev_block_hash is the tip's hash.
  void append(Block block);

  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& tip() const { return blocks_.back(); }
  std::size_t size() const { return blocks_.size(); }
  HashAlgorithm algorithm() const { return algo_; }
  std::optional<std::size_t> find(const Digest& block_hash) const;

  /// Throws std::out_of_range for a hash not in the chain.
  ChainWalk walk_back(const Digest& from_block_hash) const;
  ChainWalk walk_back() const { return walk_back(tip().block_hash); }

  ChainVerdict verify() const { return verify_chain(blocks_, algo_); }

  /// One line per block: position, minted_at, block_hash, prev_block_hash,
  /// indexes joined by ';' (tab separated).
  void write_dump(std::ostream& out) const;
  static Chain read_dump(std::istream& in, HashAlgorithm algo = HashAlgorithm::Sha256);

 private:
  HashAlgorithm algo_;
  std::vector<Block> blocks_;
  std::unordered_map<std::string, std::size_t> by_hash_;
};

}  // namespace histchain
