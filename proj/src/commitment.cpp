#include "slipstream/commitment.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace slipstream {

std::vector<BlockIndex> concat_order(const BlockPool& pool, const std::vector<BlockIndex>& blocks) {
  BlockSet in;
  for (auto b : blocks) in.set(b);
  auto key = [&](BlockIndex b) {
    const Block& blk = pool.block(b);
    return std::make_tuple(blk.time.slot, blk.time.round, blk.node, pool.id(b));
  };
  std::unordered_map<BlockIndex, int> pending;
  std::unordered_map<BlockIndex, std::vector<BlockIndex>> children;
  for (auto b : blocks) {
    int deg = 0;
    for (auto r : pool.entry(b).refs) {
      if (in.test(r)) {
        ++deg;
        children[r].push_back(b);
      }
    }
    pending[b] = deg;
  }
  using Key = decltype(key(0));
  std::set<std::pair<Key, BlockIndex>> ready;
  for (auto b : blocks)
    if (pending[b] == 0) ready.insert({key(b), b});
  std::vector<BlockIndex> out;
  out.reserve(blocks.size());
  while (!ready.empty()) {
    auto b = ready.begin()->second;
    ready.erase(ready.begin());
    out.push_back(b);
    for (auto c : children[b])
      if (--pending[c] == 0) ready.insert({key(c), c});
  }
  return out;
}

Digest slot_digest_hash(const Digest& parent, const BlockPool& pool,
                        const std::vector<BlockIndex>& ordered) {
  Bytes buf(parent.begin(), parent.end());
  buf.reserve(32 * (ordered.size() + 1));
  for (auto b : ordered) {
    const auto& id = pool.id(b);
    buf.insert(buf.end(), id.begin(), id.end());
  }
  return sha256(buf);
}

std::optional<Digest> digest_certificate(const BlockPool& pool, const DigestBook& book,
                                         BlockIndex a, int f) {
  const auto& e = pool.entry(a);
  if (e.dc_known) return e.dc_commit;
  if (!e.cone_complete || a == pool.genesis()) return std::nullopt;
  const std::int64_t slot = e.block->time.slot;
  std::map<Digest, std::uint64_t> authors;
  for (auto c : pool.at_slot(slot))
    if (e.cone.test(c)) authors[pool.block(c).digest] |= node_bit(pool.block(c).node);
  bool all_known = true;
  std::optional<Digest> found;
  for (const auto& [d, mask] : authors) {
    if (popcount(mask) < 2 * f + 1) continue;
    auto ds = book.slot_of(d);
    if (!ds) {
      all_known = false;
      continue;
    }
    if (*ds == slot - 2 && !found) found = d;
  }
  // Slot of a digest never changes once known, so the answer can be cached
  // as soon as nothing was unknown.
  if (all_known) {
    e.dc_known = 1;
    e.dc_commit = found;
  }
  return found;
}

DigestRegistry::DigestRegistry(const BlockPool& pool, int f, const Authenticator* auth)
    : pool_(pool), f_(f), auth_(auth) {
  Entry z;
  z.digest = kZeroDigest;
  z.slot = -1;
  z.parent = kZeroDigest;
  z.chain = {kZeroDigest};
  z.derived = true;
  z.dc_authors = {0};
  z.last_final = -1;
  entries_.emplace(kZeroDigest, std::move(z));
}

const DigestRegistry::Entry* DigestRegistry::find(const Digest& d) const {
  auto it = entries_.find(d);
  return it == entries_.end() ? nullptr : &it->second;
}

const DigestRegistry::Entry& DigestRegistry::at(const Digest& d) const {
  const Entry* e = find(d);
  if (!e) throw Error(ErrorCode::UnknownDigest, hex(d));
  return *e;
}

std::optional<std::int64_t> DigestRegistry::slot_of(const Digest& d) const {
  if (const Entry* e = find(d)) return e->slot;
  return std::nullopt;
}

std::optional<Digest> DigestRegistry::parent_of(const Digest& d) const {
  if (const Entry* e = find(d)) return e->parent;
  return std::nullopt;
}

const BlockSet* DigestRegistry::committed_of(const Digest& d) const {
  if (const Entry* e = find(d)) return &e->committed;
  return nullptr;
}

void DigestRegistry::record(const Digest& d, std::int64_t slot, const Digest& parent,
                            const std::vector<BlockIndex>& fresh) {
  if (entries_.count(d)) return;
  const Entry* p = find(parent);
  if (!p) throw Error(ErrorCode::ParentUnknown, hex(parent));
  if (p->slot != slot - 1) throw Error(ErrorCode::ParentUnknown, "parent slot mismatch");
  Entry e;
  e.digest = d;
  e.slot = slot;
  e.parent = parent;
  e.fresh = fresh;
  e.committed = p->committed;
  for (auto b : fresh) e.committed.set(b);
  e.chain = p->chain;
  e.chain.push_back(d);
  auto it = entries_.emplace(d, std::move(e)).first;
  if (on_record) on_record(it->second);
}

Digest DigestRegistry::compute_slot_digest(const Digest& parent, const BlockSet& dag,
                                           std::int64_t s) {
  const Entry& p = at(parent);
  std::vector<BlockIndex> fresh;
  dag.for_each([&](BlockIndex b) {
    if (!p.committed.test(b) && pool_.block(b).time.slot <= s) fresh.push_back(b);
  });
  auto ordered = concat_order(pool_, fresh);
  Digest d = slot_digest_hash(parent, pool_, ordered);
  record(d, s, parent, ordered);
  return d;
}

std::vector<BlockIndex> DigestRegistry::order_of(const Digest& d) const {
  const Entry& e = at(d);
  std::vector<BlockIndex> out;
  for (std::size_t i = 1; i < e.chain.size(); ++i) {
    const Entry& c = at(e.chain[i]);
    out.insert(out.end(), c.fresh.begin(), c.fresh.end());
  }
  return out;
}

std::optional<Digest> DigestRegistry::chain_at(const Digest& d, std::int64_t j) const {
  const Entry& e = at(d);
  if (j < -1 || j + 1 >= static_cast<std::int64_t>(e.chain.size())) return std::nullopt;
  return e.chain[static_cast<std::size_t>(j + 1)];
}

bool DigestRegistry::is_conflict(const Digest& a, const Digest& b) const {
  const Entry& ea = at(a);
  const Entry& eb = at(b);
  if (ea.slot <= eb.slot) return chain_at(b, ea.slot) != a;
  return chain_at(a, eb.slot) != b;
}

void DigestRegistry::derive(const Entry& target) const {
  std::vector<const Entry*> todo;
  for (const Entry* e = &target; !e->derived; e = &at(e->parent)) todo.push_back(e);
  for (auto it = todo.rbegin(); it != todo.rend(); ++it) {
    const Entry& e = **it;
    const Entry& p = at(e.parent);
    e.eq_mask = p.eq_mask;
    e.eq_max = p.eq_max;
    e.dc_authors = p.dc_authors;
    e.dc_authors.resize(e.chain.size(), 0);
    e.last_final = std::max<std::int64_t>(p.last_final, 0);
    for (auto b : e.fresh) {
      const Block& blk = pool_.block(b);
      NodeId n = blk.node;
      if (n != kNoNode) {
        auto m = e.eq_max.find(n);
        if (m == e.eq_max.end()) {
          e.eq_max.emplace(n, b);
        } else if (pool_.entry(b).cone.test(m->second)) {
          m->second = b;
        } else if (!pool_.entry(m->second).cone.test(b)) {
          e.eq_mask |= node_bit(n);
        }
      }
      if (auth_) {
        for (const auto& proof : blk.proofs)
          if (proof_is_self_evident(proof, *auth_)) e.eq_mask |= node_bit(proof.first->node);
      }
      if (auto dc = digest_certificate(pool_, *this, b, f_)) {
        auto k = slot_of(*dc);
        if (k && *k + 1 < static_cast<std::int64_t>(e.chain.size()) &&
            e.chain[static_cast<std::size_t>(*k + 1)] == *dc)
          e.dc_authors[static_cast<std::size_t>(*k + 1)] |= node_bit(n);
      }
    }
    for (std::size_t i = 0; i < e.dc_authors.size(); ++i)
      if (popcount(e.dc_authors[i]) >= 2 * f_ + 1)
        e.last_final = std::max<std::int64_t>(e.last_final, static_cast<std::int64_t>(i) - 1);
    e.derived = true;
  }
}

std::uint64_t DigestRegistry::eqset_of(const Digest& d) const {
  const Entry& e = at(d);
  derive(e);
  return e.eq_mask;
}

std::int64_t DigestRegistry::last_final_in(const Digest& d) const {
  const Entry& e = at(d);
  derive(e);
  return e.last_final;
}

std::vector<Digest> DigestRegistry::all_digests() const {
  std::vector<Digest> out;
  for (const auto& [d, _] : entries_) out.push_back(d);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::int64_t> finality_time(const FinalityState& st, const DigestRegistry& reg,
                                          const Digest& head, std::int64_t s) {
  if (auto it = st.final_time.find(s); it != st.final_time.end()) return it->second;
  auto top = reg.chain_at(head, st.s_final);
  if (!top || s > reg.last_final_in(*top)) return std::nullopt;
  for (std::int64_t tau = std::max<std::int64_t>(s, 0); tau <= st.s_final; ++tau) {
    auto c = reg.chain_at(head, tau);
    if (c && reg.last_final_in(*c) >= s) return tau;
  }
  return std::nullopt;
}

FinalizeOutcome finalize_slots(FinalityState& st, const DigestRegistry& reg, const BlockPool& pool,
                               const Digest& head, const BlockSet& dag, std::int64_t now_slot,
                               int f, const std::function<void(std::int64_t)>& on_tau) {
  FinalizeOutcome out;
  const std::int64_t from = st.s_final + 3;
  for (std::int64_t t = from; t <= now_slot; ++t) {
    auto target = reg.chain_at(head, t - 2);
    if (!target) break;
    std::uint64_t authors = 0;
    for (auto b : pool.at_slot(t)) {
      if (!dag.test(b)) continue;
      auto dc = digest_certificate(pool, reg, b, f);
      if (dc && *dc == *target) authors |= node_bit(pool.block(b).node);
    }
    if (popcount(authors) < 2 * f + 1) continue;
    st.s_final = t - 2;
    st.final_digest = *target;
    out.newly_final_slots.push_back(st.s_final);

    auto tau = finality_time(st, reg, head, st.s_pre + 1);
    while (tau) {
      auto c = reg.chain_at(head, *tau);
      std::int64_t reach = reg.last_final_in(*c);
      if (reach <= st.s_pre) break;
      for (std::int64_t j = st.s_pre + 1; j <= reach; ++j) st.final_time[j] = *tau;
      st.s_pre = reach;
      out.new_taus.push_back(*tau);
      if (on_tau) on_tau(*tau);
      tau = finality_time(st, reg, head, st.s_pre + 1);
    }
  }
  return out;
}

CommitCertificate last_commit_certificate(const BlockPool& pool, const DigestRegistry& reg,
                                          BlockIndex b, int f) {
  const auto& cb = cone(pool, b);
  CommitCertificate best;
  std::optional<Timestamp> best_time;
  for (auto c : pool.by_author(pool.block(b).node)) {
    if (!cb.test(c)) continue;
    const Timestamp& t = pool.block(c).time;
    if (best_time && t <= *best_time) continue;
    auto dc = digest_certificate(pool, reg, c, f);
    if (!dc) continue;
    best.block = c;
    best.slot = t.slot;
    best.commit = *dc;
    best_time = t;
  }
  return best;
}

}  // namespace slipstream
