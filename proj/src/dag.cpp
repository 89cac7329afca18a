#include "slipstream/dag.hpp"

#include <algorithm>

#include "slipstream/commitment.hpp"

namespace slipstream {

void BlockSet::set(BlockIndex i) {
  std::size_t w = i >> 6;
  if (w >= words_.size()) words_.resize(w + 1, 0);
  words_[w] |= std::uint64_t{1} << (i & 63);
}

void BlockSet::reset(BlockIndex i) {
  std::size_t w = i >> 6;
  if (w < words_.size()) {
    words_[w] &= ~(std::uint64_t{1} << (i & 63));
    trim();
  }
}

void BlockSet::insert(const BlockSet& other) {
  if (other.words_.size() > words_.size()) words_.resize(other.words_.size(), 0);
  for (std::size_t w = 0; w < other.words_.size(); ++w) words_[w] |= other.words_[w];
}

bool BlockSet::subset_of(const BlockSet& other) const {
  for (std::size_t w = 0; w < words_.size(); ++w) {
    std::uint64_t o = w < other.words_.size() ? other.words_[w] : 0;
    if (words_[w] & ~o) return false;
  }
  return true;
}

bool BlockSet::intersects(const BlockSet& other) const {
  std::size_t m = std::min(words_.size(), other.words_.size());
  for (std::size_t w = 0; w < m; ++w)
    if (words_[w] & other.words_[w]) return true;
  return false;
}

BlockSet BlockSet::minus(const BlockSet& other) const {
  BlockSet out = *this;
  std::size_t m = std::min(out.words_.size(), other.words_.size());
  for (std::size_t w = 0; w < m; ++w) out.words_[w] &= ~other.words_[w];
  out.trim();
  return out;
}

std::size_t BlockSet::count() const {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(__builtin_popcountll(w));
  return c;
}

bool BlockSet::empty() const { return words_.empty(); }

std::vector<BlockIndex> BlockSet::members() const {
  std::vector<BlockIndex> out;
  for_each([&](BlockIndex i) { out.push_back(i); });
  return out;
}

bool BlockSet::operator==(const BlockSet& other) const { return words_ == other.words_; }

void BlockSet::trim() {
  while (!words_.empty() && words_.back() == 0) words_.pop_back();
}

BlockPool::BlockPool(Block genesis) { intern(std::move(genesis)); }

BlockIndex BlockPool::intern(std::shared_ptr<const Block> b) {
  BlockId id = block_id(*b);
  if (auto it = index_.find(id); it != index_.end()) return it->second;
  auto idx = static_cast<BlockIndex>(entries_.size());
  PoolEntry e;
  e.id = id;
  e.bytes = canonical_serialize(*b).size();
  bool complete = true;
  for (const auto& r : b->refs) {
    auto it = index_.find(r);
    if (it == index_.end() || !entries_[it->second].cone_complete) {
      complete = false;
      break;
    }
    e.refs.push_back(it->second);
  }
  if (complete) {
    for (auto r : e.refs) e.cone.insert(entries_[r].cone);
    e.cone.set(idx);
    e.cone_complete = true;
  } else {
    e.refs.clear();
  }
  by_slot_[b->time.slot].push_back(idx);
  by_author_[b->node].push_back(idx);
  e.block = std::move(b);
  entries_.push_back(std::move(e));
  index_.emplace(id, idx);
  return idx;
}

std::optional<BlockIndex> BlockPool::find(const BlockId& id) const {
  if (auto it = index_.find(id); it != index_.end()) return it->second;
  return std::nullopt;
}

const std::vector<BlockIndex>& BlockPool::at_slot(std::int64_t slot) const {
  auto it = by_slot_.find(slot);
  return it == by_slot_.end() ? none_ : it->second;
}

const std::vector<BlockIndex>& BlockPool::by_author(NodeId node) const {
  auto it = by_author_.find(node);
  return it == by_author_.end() ? none_ : it->second;
}

const BlockSet& cone(const BlockPool& pool, BlockIndex b) {
  const auto& e = pool.entry(b);
  if (!e.cone_complete) throw Error(ErrorCode::MissingAncestor, "cone of " + hex(e.id));
  return e.cone;
}

bool is_reachable(const BlockPool& pool, BlockIndex from, BlockIndex to) {
  if (from >= pool.size() || to >= pool.size()) throw Error(ErrorCode::UnknownBlock, "index");
  return cone(pool, from).test(to);
}

int reach_number(const BlockPool& pool, BlockIndex c, BlockIndex b) {
  const auto& cb = cone(pool, b);
  std::uint64_t authors = 0;
  for (auto e : pool.at_slot(pool.block(b).time.slot)) {
    if (!cb.test(e)) continue;
    if (pool.entry(e).cone.test(c)) authors |= node_bit(pool.block(e).node);
  }
  return popcount(authors);
}

int distinct_authors(const BlockPool& pool, const std::vector<BlockIndex>& blocks) {
  std::vector<NodeId> nodes;
  for (auto b : blocks) nodes.push_back(pool.block(b).node);
  std::sort(nodes.begin(), nodes.end());
  return static_cast<int>(std::unique(nodes.begin(), nodes.end()) - nodes.begin());
}

bool is_quorum(const BlockPool& pool, const std::vector<BlockIndex>& blocks, int f) {
  return distinct_authors(pool, blocks) >= 2 * f + 1;
}

std::vector<BlockIndex> tips(const BlockPool& pool, const BlockSet& dag) {
  BlockSet referenced;
  dag.for_each([&](BlockIndex b) {
    for (auto r : pool.entry(b).refs) referenced.set(r);
  });
  return dag.minus(referenced).members();
}

void EqSet::add(NodeId n, const BlockId& a, const BlockId& b) {
  if (contains(n)) return;
  mask |= node_bit(n);
  proofs[n] = {a, b};
}

std::optional<std::pair<BlockIndex, BlockIndex>> EquivocationTracker::observe(const BlockPool& pool,
                                                                              BlockIndex b) {
  const auto& e = pool.entry(b);
  if (!e.cone_complete) return std::nullopt;
  NodeId n = e.block->node;
  if (n == kNoNode) return std::nullopt;
  auto it = max_.find(n);
  if (it == max_.end()) {
    max_.emplace(n, b);
    return std::nullopt;
  }
  BlockIndex m = it->second;
  if (m == b || e.cone.test(m)) {
    it->second = b;
    return std::nullopt;
  }
  if (pool.entry(m).cone.test(b)) return std::nullopt;
  bool fresh = !eq_.contains(n);
  eq_.add(n, pool.id(m), pool.id(b));
  if (!fresh) return std::nullopt;
  return std::make_pair(m, b);
}

EqSet detect_equivocations(const BlockPool& pool, const BlockSet& blocks) {
  EquivocationTracker t;
  blocks.for_each([&](BlockIndex b) {
    const auto& e = pool.entry(b);
    if (e.cone_complete && e.cone.subset_of(blocks)) t.observe(pool, b);
  });
  return t.eqset();
}

bool proof_is_self_evident(const EquivocationProof& p, const Authenticator& auth) {
  if (!p.first || !p.second) return false;
  const Block& a = *p.first;
  const Block& b = *p.second;
  if (a.node != b.node || a.time != b.time) return false;
  if (block_id(a) == block_id(b)) return false;
  return auth.verify_block(a) && auth.verify_block(b);
}

namespace {

ValidityReport check_genesis(const Block& g, const BlockId& id, int f) {
  if (!g.refs.empty()) return ValidityReport::fail("G1", id, "genesis has refs");
  if (g.time != genesis_time(f)) return ValidityReport::fail("T2", id, "genesis time");
  if (!is_zero(g.digest)) return ValidityReport::fail("DV1", id, "genesis digest not zero");
  return {};
}

}  // namespace

ValidityReport check_block(const BlockPool& pool, BlockIndex bi, int f, DigestBook& book) {
  const auto& e = pool.entry(bi);
  const Block& b = *e.block;
  if (bi == pool.genesis()) return check_genesis(b, e.id, f);

  if (b.refs.empty()) return ValidityReport::fail("G1", e.id, "second block without refs");
  if (!e.cone_complete) return ValidityReport::fail("G2", e.id, "ref closure incomplete");
  {
    auto r = b.refs;
    std::sort(r.begin(), r.end());
    if (std::adjacent_find(r.begin(), r.end()) != r.end())
      return ValidityReport::fail("G3", e.id, "duplicate ref");
  }
  if (b.time.round < 1 || b.time.round > f + 2)
    return ValidityReport::fail("T1", e.id, "round outside [1, f+2]");
  for (auto r : e.refs) {
    if (!(pool.block(r).time < b.time))
      return ValidityReport::fail("T1", e.id, "ref not strictly earlier");
  }
  if (b.time.slot <= 0) return ValidityReport::fail("T2", e.id, "non-genesis block at slot 0");

  const bool last_round = b.time.round == f + 2;
  if (last_round) {
    // DV3c / DV4: refs share the parent digest, and the block's digest is the
    // recomputed commitment over its cone.
    const Digest& parent = pool.block(e.refs.front()).digest;
    for (auto r : e.refs)
      if (pool.block(r).digest != parent)
        return ValidityReport::fail("DV3", e.id, "round f+2 refs disagree on digest");
    auto pslot = book.slot_of(parent);
    if (!pslot) return ValidityReport::fail("DV4", e.id, "parent digest unknown");
    if (*pslot != b.time.slot - 2)
      return ValidityReport::fail("DV4", e.id, "parent digest has wrong slot");
    const BlockSet* prior = book.committed_of(parent);
    if (!prior || !prior->subset_of(e.cone))
      return ValidityReport::fail("DV4", e.id, "parent commitment outside cone");
    std::vector<BlockIndex> fresh;
    e.cone.for_each([&](BlockIndex c) {
      if (c == bi || prior->test(c)) return;
      if (pool.block(c).time.slot <= b.time.slot - 1) fresh.push_back(c);
    });
    auto ordered = concat_order(pool, fresh);
    Digest recomputed = slot_digest_hash(parent, pool, ordered);
    if (recomputed != b.digest)
      return ValidityReport::fail("DV4", e.id, "digest does not match recomputation");
    book.record(recomputed, b.time.slot - 1, parent, ordered);
  }

  auto dslot = book.slot_of(b.digest);
  if (!dslot) return ValidityReport::fail("DV2", e.id, "digest unknown");
  std::int64_t want = last_round ? b.time.slot - 1 : b.time.slot - 2;
  if (*dslot != want) return ValidityReport::fail("DV2", e.id, "digest slot mismatch");

  if (b.time.round == 1) {
    bool have_same = false;
    std::optional<Digest> other;
    for (auto r : e.refs) {
      const Digest& d = pool.block(r).digest;
      if (d == b.digest) {
        have_same = true;
      } else if (!other) {
        other = d;
      } else if (*other != d) {
        return ValidityReport::fail("DV3", e.id, "round-1 minority refs disagree");
      }
    }
    if (!have_same) return ValidityReport::fail("DV3", e.id, "round-1 block lacks same-digest ref");
  } else if (!last_round) {
    for (auto r : e.refs)
      if (pool.block(r).digest != b.digest)
        return ValidityReport::fail("DV3", e.id, "ref digest differs");
  }
  return {};
}

ValidityReport is_valid_dag(const BlockPool& pool, const BlockSet& candidate, int f,
                            DigestBook& book) {
  if (!candidate.test(pool.genesis()))
    return ValidityReport::fail("G1", pool.id(pool.genesis()), "genesis missing");
  ValidityReport first;
  bool failed = false;
  candidate.for_each([&](BlockIndex b) {
    if (failed) return;
    const auto& e = pool.entry(b);
    if (b != pool.genesis() && e.block->refs.empty()) {
      first = ValidityReport::fail("G1", e.id, "second block without refs");
      failed = true;
      return;
    }
    if (e.block->time.slot == 0 && b != pool.genesis()) {
      first = ValidityReport::fail("T2", e.id, "second slot-0 block");
      failed = true;
      return;
    }
    for (const auto& r : e.block->refs) {
      auto ri = pool.find(r);
      if (!ri || !candidate.test(*ri)) {
        first = ValidityReport::fail("G2", e.id, "referenced block missing");
        failed = true;
        return;
      }
    }
    auto rep = check_block(pool, b, f, book);
    if (!rep.ok) {
      first = rep;
      failed = true;
    }
  });
  return failed ? first : ValidityReport{};
}

bool cone_is_valid(const BlockPool& pool, BlockIndex b, int f, DigestBook& book,
                   ValidityReport* why) {
  const auto& e = pool.entry(b);
  if (e.cone_valid >= 0 && !why) return e.cone_valid == 1;
  if (!e.cone_complete) {
    if (why) *why = ValidityReport::fail("G2", e.id, "ref closure incomplete");
    return false;
  }
  bool result = true;
  e.cone.for_each([&](BlockIndex c) {
    const auto& ce = pool.entry(c);
    if (ce.cone_valid < 0) {
      auto rep = check_block(pool, c, f, book);
      bool ok = rep.ok;
      for (auto r : ce.refs) ok = ok && pool.entry(r).cone_valid == 1;
      ce.cone_valid = ok ? 1 : 0;
      if (!rep.ok && why && result) *why = rep;
    }
    if (ce.cone_valid == 0 && result) {
      result = false;
      if (why && why->ok) *why = ValidityReport::fail("INVALID", ce.id, "ancestor invalid");
    }
  });
  return result;
}

}  // namespace slipstream

namespace slipstream {

LocalDigestBook::LocalDigestBook() { items_.emplace(kZeroDigest, Item{-1, kZeroDigest, {}}); }

std::optional<std::int64_t> LocalDigestBook::slot_of(const Digest& d) const {
  auto it = items_.find(d);
  if (it == items_.end()) return std::nullopt;
  return it->second.slot;
}

std::optional<Digest> LocalDigestBook::parent_of(const Digest& d) const {
  auto it = items_.find(d);
  if (it == items_.end()) return std::nullopt;
  return it->second.parent;
}

const BlockSet* LocalDigestBook::committed_of(const Digest& d) const {
  auto it = items_.find(d);
  return it == items_.end() ? nullptr : &it->second.committed;
}

void LocalDigestBook::record(const Digest& d, std::int64_t slot, const Digest& parent,
                             const std::vector<BlockIndex>& fresh) {
  if (items_.count(d)) return;
  auto p = items_.find(parent);
  if (p == items_.end()) throw Error(ErrorCode::ParentUnknown, hex(parent));
  Item it{slot, parent, p->second.committed};
  for (auto b : fresh) it.committed.set(b);
  items_.emplace(d, std::move(it));
}

ValidityReport ValidityMonitor::check(const BlockPool& pool, const BlockSet& candidate, int f) {
  BlockSet fresh = candidate.minus(checked_);
  ValidityReport out;
  if (!candidate.test(pool.genesis()))
    return ValidityReport::fail("G1", pool.id(pool.genesis()), "genesis missing");
  bool failed = false;
  fresh.for_each([&](BlockIndex b) {
    if (failed) return;
    const auto& e = pool.entry(b);
    for (const auto& r : e.block->refs) {
      auto ri = pool.find(r);
      if (!ri || !candidate.test(*ri)) {
        out = ValidityReport::fail("G2", e.id, "referenced block missing");
        failed = true;
        return;
      }
    }
    if (b != pool.genesis() && e.block->time.slot == 0) {
      out = ValidityReport::fail("T2", e.id, "second slot-0 block");
      failed = true;
      return;
    }
    auto rep = check_block(pool, b, f, book_);
    if (!rep.ok) {
      out = rep;
      failed = true;
      return;
    }
    checked_.set(b);
  });
  return out;
}

}  // namespace slipstream
