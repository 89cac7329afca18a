#include "slipstream/ledger.hpp"

#include <algorithm>
#include <limits>
#include <set>

namespace slipstream {

bool is_double_spend(const UtxoTx& a, const UtxoTx& b) {
  if (tx_hash(a) == tx_hash(b)) return false;
  for (const auto& x : a.inputs)
    for (const auto& y : b.inputs)
      if (x == y) return true;
  return false;
}

TxEngine::TxEngine(const BlockPool& pool, const Authenticator& auth, int f)
    : pool_(pool), auth_(auth), f_(f) {
  sync();
}

void TxEngine::sync() {
  for (; indexed_ < pool_.size(); ++indexed_) {
    auto b = static_cast<BlockIndex>(indexed_);
    const Block& blk = pool_.block(b);
    for (std::uint32_t k = 0; k < blk.txs.size(); ++k) {
      TxRef r{b, k};
      Hash32 h = tx_hash(blk.txs[k]);
      hashes_[pack(b, k)] = h;
      first_seen_.emplace(h, r);
      if (b == pool_.genesis()) genesis_.insert(h);
      for (const auto& in : blk.txs[k].inputs) spenders_[in].push_back(r);
    }
  }
}

const UtxoTx& TxEngine::tx(TxRef r) const { return pool_.block(r.block).txs.at(r.pos); }

const Hash32& TxEngine::hash(TxRef r) {
  sync();
  return hashes_.at(pack(r.block, r.pos));
}

std::vector<TxRef> TxEngine::refs_in(BlockIndex b) const {
  std::vector<TxRef> out;
  auto n = static_cast<std::uint32_t>(pool_.block(b).txs.size());
  for (std::uint32_t k = 0; k < n; ++k) out.push_back({b, k});
  return out;
}

const UtxoTx* TxEngine::find_tx(const Hash32& h) {
  sync();
  auto it = first_seen_.find(h);
  return it == first_seen_.end() ? nullptr : &tx(it->second);
}

bool TxEngine::is_genesis_tx(const Hash32& h) { return genesis_.count(h) != 0; }

std::optional<TxOutput> TxEngine::output_of(const UtxoId& u) {
  const UtxoTx* t = find_tx(u.tx);
  if (!t || u.index >= t->outputs.size()) return std::nullopt;
  return t->outputs[u.index];
}

bool TxEngine::well_formed(TxRef r) { return well_formed(tx(r), hash(r)); }

bool TxEngine::well_formed(const UtxoTx& t, const Hash32& h) {
  sync();
  if (is_genesis_tx(h)) return true;
  if (auto it = well_formed_.find(h); it != well_formed_.end()) return it->second;
  auto decide = [&](bool v) {
    well_formed_[h] = v;
    return v;
  };
  if (t.inputs.empty() || t.outputs.empty()) return decide(false);
  {
    auto ins = t.inputs;
    std::sort(ins.begin(), ins.end());
    if (std::adjacent_find(ins.begin(), ins.end()) != ins.end()) return decide(false);
  }
  std::uint64_t out_sum = 0;
  for (const auto& o : t.outputs) {
    if (o.value == 0 || o.owner >= auth_.accounts()) return decide(false);
    if (out_sum > std::numeric_limits<std::uint64_t>::max() - o.value) return decide(false);
    out_sum += o.value;
  }
  std::uint64_t in_sum = 0;
  for (const auto& in : t.inputs) {
    const UtxoTx* creator = find_tx(in.tx);
    if (!creator) return false;  // may become known later, so not cached
    if (in.index >= creator->outputs.size()) return decide(false);
    const auto& o = creator->outputs[in.index];
    if (o.owner != t.owner) return decide(false);
    if (in_sum > std::numeric_limits<std::uint64_t>::max() - o.value) return decide(false);
    in_sum += o.value;
  }
  if (in_sum != out_sum) return decide(false);
  return decide(auth_.verify_tx(t));
}

bool TxEngine::is_ready(TxRef r) {
  auto key = pack(r.block, r.pos);
  if (auto it = ready_.find(key); it != ready_.end()) return it->second;
  bool ok = pool_.entry(r.block).cone_complete && well_formed(r);
  if (ok) {
    for (const auto& in : tx(r).inputs) {
      if (is_genesis_tx(in.tx)) continue;
      if (!confirmed_in_cone(in.tx, r.block)) {
        ok = false;
        break;
      }
    }
  }
  ready_[key] = ok;
  return ok;
}

bool TxEngine::approves(BlockIndex c, TxRef r) {
  auto key = std::make_pair(c, pack(r.block, r.pos));
  if (auto it = approves_.find(key); it != approves_.end()) return it->second;
  const auto& ce = pool_.entry(c);
  bool ok = ce.cone_complete && ce.cone.test(r.block) && is_ready(r);
  if (ok) {
    const Hash32& h = hash(r);
    for (const auto& in : tx(r).inputs) {
      for (const auto& s : spenders_[in]) {
        if (!ce.cone.test(s.block) || hash(s) == h) continue;
        if (well_formed(s)) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
  }
  approves_[key] = ok;
  return ok;
}

bool TxEngine::is_tx_certificate(BlockIndex c, TxRef r) {
  auto key = std::make_pair(c, pack(r.block, r.pos));
  if (auto it = tc_.find(key); it != tc_.end()) return it->second;
  const auto& ce = pool_.entry(c);
  const std::int64_t bs = pool_.block(r.block).time.slot;
  const std::int64_t cs = ce.block->time.slot;
  bool ok = false;
  if (ce.cone_complete && (cs == bs || cs == bs + 1)) {
    std::uint64_t authors = 0;
    for (std::int64_t s = bs; s <= cs; ++s)
      for (auto a : pool_.at_slot(s))
        if (ce.cone.test(a) && approves(a, r)) authors |= node_bit(pool_.block(a).node);
    ok = popcount(authors) >= 2 * f_ + 1;
  }
  tc_[key] = ok;
  return ok;
}

std::uint64_t TxEngine::certificate_authors(const BlockSet& dag, TxRef r) {
  const std::int64_t bs = pool_.block(r.block).time.slot;
  std::uint64_t authors = 0;
  for (std::int64_t s = bs; s <= bs + 1; ++s)
    for (auto c : pool_.at_slot(s))
      if (dag.test(c) && is_tx_certificate(c, r)) authors |= node_bit(pool_.block(c).node);
  return authors;
}

bool TxEngine::fast_confirmed_in(const BlockSet& dag, TxRef r) {
  return popcount(certificate_authors(dag, r)) >= 2 * f_ + 1;
}

bool TxEngine::confirmed_in_cone(const Hash32& h, BlockIndex b) {
  sync();
  if (is_genesis_tx(h)) return true;
  auto key = std::make_pair(h, b);
  if (auto it = confirmed_in_cone_.find(key); it != confirmed_in_cone_.end()) return it->second;
  const auto& be = pool_.entry(b);
  bool ok = false;
  if (be.cone_complete) {
    // Inclusions of h inside cone(b).
    be.cone.for_each([&](BlockIndex x) {
      if (ok) return;
      const auto& txs = pool_.block(x).txs;
      for (std::uint32_t k = 0; k < txs.size() && !ok; ++k) {
        TxRef r{x, k};
        if (hash(r) == h && fast_confirmed_in(be.cone, r)) ok = true;
      }
    });
  }
  confirmed_in_cone_[key] = ok;
  return ok;
}

const char* to_string(ConfirmPath p) {
  switch (p) {
    case ConfirmPath::Fast: return "fast";
    case ConfirmPath::Consensus1: return "consensus-1";
    case ConfirmPath::Consensus2: return "consensus-2";
  }
  return "?";
}

UtxoLedger::UtxoLedger(const std::vector<UtxoTx>& genesis_txs) {
  for (const auto& t : genesis_txs) add(t, tx_hash(t));
}

bool UtxoLedger::has_inputs(const UtxoTx& tx) const {
  for (const auto& in : tx.inputs) {
    auto it = confirmed_.find(in.tx);
    if (it == confirmed_.end() || in.index >= it->second.outputs.size()) return false;
  }
  return true;
}

bool UtxoLedger::conflicts(const UtxoTx& tx, const Hash32& h) const {
  for (const auto& in : tx.inputs) {
    auto [lo, hi] = spent_.equal_range(in);
    for (auto it = lo; it != hi; ++it)
      if (it->second != h) return true;
  }
  return false;
}

bool UtxoLedger::add(const UtxoTx& tx, const Hash32& h) {
  if (contains(h)) return false;
  confirmed_.emplace(h, tx);
  order_.push_back(h);
  for (const auto& in : tx.inputs) spent_.emplace(in, h);
  return true;
}

std::vector<std::pair<Hash32, Hash32>> UtxoLedger::double_spends() const {
  std::vector<std::pair<Hash32, Hash32>> out;
  std::set<std::pair<Hash32, Hash32>> seen;
  for (auto it = spent_.begin(); it != spent_.end(); ++it) {
    auto [lo, hi] = spent_.equal_range(it->first);
    for (auto a = lo; a != hi; ++a)
      for (auto b = std::next(a); b != hi; ++b) {
        auto p = std::minmax(a->second, b->second);
        if (p.first != p.second && seen.insert(p).second) out.push_back(p);
      }
  }
  return out;
}

bool UtxoLedger::inputs_closed() const {
  for (const auto& [h, tx] : confirmed_)
    if (!has_inputs(tx)) return false;
  return true;
}

std::vector<std::pair<UtxoId, TxOutput>> UtxoLedger::unspent_of(AccountId owner) const {
  std::vector<std::pair<UtxoId, TxOutput>> out;
  for (const auto& h : order_) {
    const auto& tx = confirmed_.at(h);
    for (std::uint32_t i = 0; i < tx.outputs.size(); ++i) {
      UtxoId u{h, i};
      if (tx.outputs[i].owner == owner && spent_.count(u) == 0) out.push_back({u, tx.outputs[i]});
    }
  }
  return out;
}

std::vector<Confirmation> confirm_transactions(TxEngine& eng, const BlockSet& dag,
                                               std::vector<TxRef>& pending, UtxoLedger& ledger) {
  std::vector<Confirmation> out;
  std::vector<TxRef> keep;
  for (const auto& r : pending) {
    const Hash32& h = eng.hash(r);
    if (ledger.contains(h)) continue;
    if (dag.test(r.block) && eng.fast_confirmed_in(dag, r)) {
      ledger.add(eng.tx(r), h);
      out.push_back({h, ConfirmPath::Fast});
      continue;
    }
    keep.push_back(r);
  }
  pending.swap(keep);
  return out;
}

namespace {

bool try_add(TxEngine& eng, TxRef r, UtxoLedger& ledger, ConfirmPath path,
             std::vector<Confirmation>& out) {
  const Hash32& h = eng.hash(r);
  if (ledger.contains(h)) return false;
  const UtxoTx& tx = eng.tx(r);
  if (!eng.well_formed(r) || !ledger.has_inputs(tx) || ledger.conflicts(tx, h)) return false;
  ledger.add(tx, h);
  out.push_back({h, path});
  return true;
}

}  // namespace

std::vector<Confirmation> finalize_transactions(TxEngine& eng, const DigestRegistry& reg,
                                                const Digest& head, std::int64_t tau,
                                                ConsensusCursor& cursor, UtxoLedger& ledger) {
  std::vector<Confirmation> out;
  auto top = reg.chain_at(head, tau);
  if (!top) return out;
  const BlockSet& committed = reg.at(*top).committed;
  for (auto b : reg.order_of(*top)) {
    if (eng.pool().block(b).time.slot > tau - 2 || cursor.proc_tx_certificate.test(b)) continue;
    cursor.proc_tx_certificate.set(b);
    for (auto r : eng.refs_in(b))
      if (eng.certificate_authors(committed, r) != 0)
        try_add(eng, r, ledger, ConfirmPath::Consensus1, out);
  }
  auto older = reg.chain_at(head, tau - 2);
  if (!older) return out;
  for (auto b : reg.order_of(*older)) {
    if (cursor.proc_total_order.test(b)) continue;
    cursor.proc_total_order.set(b);
    for (auto r : eng.refs_in(b)) try_add(eng, r, ledger, ConfirmPath::Consensus2, out);
  }
  return out;
}

void Mempool::push(UtxoTx tx) {
  Hash32 h = tx_hash(tx);
  for (const auto& [qh, _] : queue_)
    if (qh == h) return;
  queue_.emplace_back(h, std::move(tx));
}

std::vector<UtxoTx> Mempool::payload(const std::unordered_set<Hash32, Hash32Hasher>& seen,
                                     std::size_t cap) {
  std::erase_if(queue_, [&](const auto& e) { return seen.count(e.first) != 0; });
  std::vector<UtxoTx> out;
  for (const auto& [h, tx] : queue_) {
    if (out.size() >= cap) break;
    out.push_back(tx);
  }
  return out;
}

}  // namespace slipstream
