#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "slipstream/core.hpp"

namespace slipstream {

using BlockIndex = std::uint32_t;

// Dense bitset over pool indices. Out-of-range bits read as zero.
class BlockSet {
 public:
  BlockSet() = default;

  bool test(BlockIndex i) const {
    std::size_t w = i >> 6;
    return w < words_.size() && ((words_[w] >> (i & 63)) & 1u);
  }
  void set(BlockIndex i);
  void reset(BlockIndex i);
  void insert(const BlockSet& other);
  bool subset_of(const BlockSet& other) const;
  bool intersects(const BlockSet& other) const;
  BlockSet minus(const BlockSet& other) const;
  std::size_t count() const;
  bool empty() const;
  std::vector<BlockIndex> members() const;

  template <typename F>
  void for_each(F&& fn) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits) {
        int b = __builtin_ctzll(bits);
        fn(static_cast<BlockIndex>(w * 64 + b));
        bits &= bits - 1;
      }
    }
  }

  bool operator==(const BlockSet& other) const;

 private:
  void trim();
  std::vector<std::uint64_t> words_;
};

struct PoolEntry {
  std::shared_ptr<const Block> block;
  BlockId id{};
  std::size_t bytes = 0;
  std::vector<BlockIndex> refs;  // resolved refs; empty when incomplete
  bool cone_complete = false;
  BlockSet cone;

  // Memoised per-pool facts. Each is a pure function of the block bytes and
  // its ancestry, so sharing them between node instances is sound.
  mutable std::int8_t signature_ok = -1;
  mutable std::int8_t cone_valid = -1;
  mutable std::int8_t dc_known = 0;
  mutable std::optional<Digest> dc_commit;
};

// Content-addressed block store shared by every node of one run. Interning
// order is a topological order because a block can only be created once its
// refs exist.
class BlockPool {
 public:
  explicit BlockPool(Block genesis);

  BlockIndex intern(std::shared_ptr<const Block> b);
  BlockIndex intern(Block b) { return intern(std::make_shared<const Block>(std::move(b))); }
  std::optional<BlockIndex> find(const BlockId& id) const;

  const PoolEntry& entry(BlockIndex i) const { return entries_.at(i); }
  const Block& block(BlockIndex i) const { return *entries_.at(i).block; }
  const BlockId& id(BlockIndex i) const { return entries_.at(i).id; }
  std::size_t size() const { return entries_.size(); }
  BlockIndex genesis() const { return 0; }

  const std::vector<BlockIndex>& at_slot(std::int64_t slot) const;
  const std::vector<BlockIndex>& by_author(NodeId node) const;

 private:
  std::vector<PoolEntry> entries_;
  std::unordered_map<BlockId, BlockIndex, Hash32Hasher> index_;
  std::map<std::int64_t, std::vector<BlockIndex>> by_slot_;
  std::unordered_map<NodeId, std::vector<BlockIndex>> by_author_;
  std::vector<BlockIndex> none_;
};

// cone(b): b plus everything reachable from it. Throws MissingAncestor when
// some ancestor was never interned.
const BlockSet& cone(const BlockPool& pool, BlockIndex b);
bool is_reachable(const BlockPool& pool, BlockIndex from, BlockIndex to);

// Number of distinct authors E.node with E in cone(b), E.slot = b.slot and
// c in cone(E).
int reach_number(const BlockPool& pool, BlockIndex c, BlockIndex b);

bool is_quorum(const BlockPool& pool, const std::vector<BlockIndex>& blocks, int f);
int distinct_authors(const BlockPool& pool, const std::vector<BlockIndex>& blocks);
inline int popcount(std::uint64_t mask) { return __builtin_popcountll(mask); }
inline std::uint64_t node_bit(NodeId n) { return n < 64 ? (std::uint64_t{1} << n) : 0; }

std::vector<BlockIndex> tips(const BlockPool& pool, const BlockSet& dag);

struct EqSet {
  std::uint64_t mask = 0;
  std::map<NodeId, std::pair<BlockId, BlockId>> proofs;

  bool contains(NodeId n) const { return (mask & node_bit(n)) != 0; }
  void add(NodeId n, const BlockId& a, const BlockId& b);
};

// Tracks, per author, the latest block of a linearly ordered chain; a block
// comparable with neither end of it proves an equivocation.
class EquivocationTracker {
 public:
  std::optional<std::pair<BlockIndex, BlockIndex>> observe(const BlockPool& pool, BlockIndex b);
  const EqSet& eqset() const { return eq_; }
  EqSet& eqset() { return eq_; }

 private:
  std::unordered_map<NodeId, BlockIndex> max_;
  EqSet eq_;
};

// Equivocators among the blocks of `blocks` whose cones lie inside `blocks`.
EqSet detect_equivocations(const BlockPool& pool, const BlockSet& blocks);

// Proofs carried in blocks count only when self-evident: two distinct,
// validly signed blocks by one author with the same timestamp.
bool proof_is_self_evident(const EquivocationProof& p, const Authenticator& auth);

// Read/write access to digest bookkeeping needed by the validity rules.
class DigestBook {
 public:
  virtual ~DigestBook() = default;
  virtual std::optional<std::int64_t> slot_of(const Digest& d) const = 0;
  virtual std::optional<Digest> parent_of(const Digest& d) const = 0;
  // D(d): every block committed by d. Null when d is unknown.
  virtual const BlockSet* committed_of(const Digest& d) const = 0;
  virtual void record(const Digest& d, std::int64_t slot, const Digest& parent,
                      const std::vector<BlockIndex>& fresh) = 0;
};

struct ValidityReport {
  bool ok = true;
  std::string rule;  // G1..G3, T1..T2, DV1..DV4
  BlockId block{};
  std::string detail;

  static ValidityReport fail(std::string rule, const BlockId& b, std::string detail) {
    return {false, std::move(rule), b, std::move(detail)};
  }
};

// Rules for one block given that its ancestors are present. Round-(f+2)
// digests are recomputed and recorded in `book` (DV4).
ValidityReport check_block(const BlockPool& pool, BlockIndex b, int f, DigestBook& book);

// Full check of a candidate DAG (graph, time and digest validity).
ValidityReport is_valid_dag(const BlockPool& pool, const BlockSet& candidate, int f,
                            DigestBook& book);

// Standalone book: knows only the digests it recorded itself.
class LocalDigestBook : public DigestBook {
 public:
  LocalDigestBook();
  std::optional<std::int64_t> slot_of(const Digest& d) const override;
  std::optional<Digest> parent_of(const Digest& d) const override;
  const BlockSet* committed_of(const Digest& d) const override;
  void record(const Digest& d, std::int64_t slot, const Digest& parent,
              const std::vector<BlockIndex>& fresh) override;

 private:
  struct Item {
    std::int64_t slot;
    Digest parent;
    BlockSet committed;
  };
  std::unordered_map<Digest, Item, Hash32Hasher> items_;
};

// is_valid_dag over growing candidates that only ever add blocks: blocks
// already checked against this monitor's own book are not re-checked.
class ValidityMonitor {
 public:
  ValidityReport check(const BlockPool& pool, const BlockSet& candidate, int f);

 private:
  LocalDigestBook book_;
  BlockSet checked_;
};

// Memoised is_valid_dag(cone(b)) against one shared book.
bool cone_is_valid(const BlockPool& pool, BlockIndex b, int f, DigestBook& book,
                   ValidityReport* why = nullptr);

}  // namespace slipstream
