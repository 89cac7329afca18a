#include "slipstream/node.hpp"

#include <algorithm>
#include <map>

namespace slipstream {

World::World(int n_, int f_, std::uint64_t seed, std::uint32_t accounts,
             std::vector<UtxoTx> genesis, Trace* trace_)
    : n(n_),
      f(f_),
      auth(seed, static_cast<std::uint32_t>(n_), accounts),
      genesis_txs(std::move(genesis)),
      pool(make_genesis(f_, genesis_txs)),
      registry(pool, f_, &auth),
      txs(pool, auth, f_),
      trace(trace_) {
  if (trace) {
    registry.on_record = [this](const DigestRegistry::Entry& e) {
      Json fresh = Json::array();
      for (auto b : e.fresh) fresh.push_back(hex(pool.id(b)));
      emit(-1, "registry",
           {{"digest", hex(e.digest)}, {"parent", hex(e.parent)}, {"slot", e.slot},
            {"fresh", std::move(fresh)}});
    };
  }
}

void World::emit(std::int64_t node, std::string type, Json payload) {
  if (trace) trace->emit(round, node, std::move(type), std::move(payload));
}

Node::Node(World& world, NodeId id, NodeOptions opts)
    : w_(world), id_(id), opts_(opts), ledger_(world.genesis_txs) {
  BlockIndex g = w_.pool.genesis();
  dag_.set(g);
  buffer_.set(g);
  dag_seen_.set(g);
  own_ = g;
  for (const auto& t : w_.genesis_txs) seen_tx_.insert(tx_hash(t));
}

void Node::emit(std::string type, Json payload) { w_.emit(id_, std::move(type), std::move(payload)); }

void Node::receive(const std::vector<BlockIndex>& blocks) {
  for (auto b : blocks) {
    if (buffer_.test(b)) continue;
    const auto& e = w_.pool.entry(b);
    if (e.signature_ok < 0) e.signature_ok = w_.auth.verify_block(*e.block) ? 1 : 0;
    if (e.signature_ok == 0) {
      emit("drop", {{"block", hex(e.id)}, {"reason", "signature"}});
      continue;
    }
    buffer_.set(b);
    waiting_.push_back(b);
  }
  absorb_buffer();
}

// UpdateHistory plus equivocation scanning for blocks whose cone just became
// complete inside Buffer. Pool order is topological, so one sorted pass works.
void Node::absorb_buffer() {
  std::sort(waiting_.begin(), waiting_.end());
  std::vector<BlockIndex> still;
  for (auto b : waiting_) {
    const auto& e = w_.pool.entry(b);
    if (!e.cone_complete || !e.cone.subset_of(buffer_)) {
      still.push_back(b);
      continue;
    }
    history_[e.block->node].insert(e.cone);
    if (auto eq = tracker_.observe(w_.pool, b)) {
      const Block& x = w_.pool.block(eq->first);
      const Block& y = w_.pool.block(eq->second);
      emit("eq-detect", {{"equivocator", x.node},
                         {"blocks", {hex(w_.pool.id(eq->first)), hex(w_.pool.id(eq->second))}}});
      if (x.time == y.time)
        pending_proofs_.push_back({w_.pool.entry(eq->first).block, w_.pool.entry(eq->second).block});
    }
    for (const auto& p : e.block->proofs) {
      if (tracker_.eqset().contains(p.first->node)) continue;
      if (!proof_is_self_evident(p, w_.auth)) continue;
      tracker_.eqset().add(p.first->node, block_id(*p.first), block_id(*p.second));
      emit("eq-detect", {{"equivocator", p.first->node}, {"via", "proof"}});
    }
  }
  waiting_.swap(still);
}

void Node::absorb_dag() {
  BlockSet fresh = dag_.minus(dag_seen_);
  fresh.for_each([&](BlockIndex b) {
    for (auto r : w_.txs.refs_in(b)) {
      pending_txs_.push_back(r);
      seen_tx_.insert(w_.txs.hash(r));
    }
  });
  dag_seen_.insert(fresh);
}

void Node::merge_cone(BlockIndex b) { dag_.insert(cone(w_.pool, b)); }

std::optional<BlockIndex> Node::last_block_from(NodeId node, bool require_complete) const {
  std::optional<BlockIndex> best;
  for (auto b : w_.pool.by_author(node)) {
    if (!buffer_.test(b)) continue;
    if (require_complete && !w_.pool.entry(b).cone.subset_of(buffer_)) continue;
    if (!best || w_.pool.block(*best).time < w_.pool.block(b).time) best = b;
  }
  return best;
}

void Node::update_dag(Timestamp now) {
  const Timestamp prev = before_time(now, w_.f);
  if (w_.pool.block(own_).time != prev) return;
  const Digest sigma = head_;
  const std::uint64_t local_eq = tracker_.eqset().mask;
  const std::uint64_t digest_eq = w_.registry.eqset_of(sigma);
  const BlockSet& committed = w_.registry.at(sigma).committed;

  for (auto b : w_.pool.at_slot(prev.slot)) {
    if (!buffer_.test(b)) continue;
    const auto& e = w_.pool.entry(b);
    const Block& blk = *e.block;
    if (blk.time != prev || blk.digest != sigma) continue;
    if (blk.node == kNoNode || (local_eq & node_bit(blk.node))) continue;
    if (!e.cone.subset_of(buffer_)) continue;
    if (dag_.test(b)) continue;

    const char* reason = nullptr;
    // U1: no slot-now block in the cone by an equivocator known to sigma.
    for (auto c : w_.pool.at_slot(now.slot)) {
      if (e.cone.test(c) && (digest_eq & node_bit(w_.pool.block(c).node))) {
        reason = "U1";
        break;
      }
    }
    // U3: blocks new to us and uncommitted must be seen by i-1 slot authors.
    if (!reason && now.round > 1) {
      BlockSet unseen = e.cone.minus(dag_).minus(committed);
      unseen.for_each([&](BlockIndex c) {
        if (reason || w_.pool.block(c).time.slot > now.slot - 1) return;
        if (reach_number(w_.pool, c, b) < now.round - 1) reason = "U3";
      });
    }
    ValidityReport why;
    if (!reason && !cone_is_valid(w_.pool, b, w_.f, w_.registry)) reason = "U2";
    if (reason) {
      emit("dag-reject", {{"block", hex(e.id)}, {"reason", reason}});
      continue;
    }
    merge_cone(b);
    emit("dag-accept", {{"block", hex(e.id)}});
  }
}

void Node::set_elss(const char* reason) {
  if (i_elss_) return;
  i_elss_ = true;
  emit("elss-flag", {{"reason", reason}});
}

void Node::check_elss(Timestamp now) {
  const Timestamp target{now.slot - 2, w_.f + 2};
  if (target.slot < 1) return;
  std::map<Digest, int> count;
  for (auto b : w_.pool.at_slot(target.slot))
    if (buffer_.test(b) && w_.pool.block(b).time == target) ++count[w_.pool.block(b).digest];
  int heavy = 0;
  for (const auto& [d, c] : count)
    if (c >= w_.f + 1) ++heavy;
  if (heavy >= 2) set_elss("split-digests");
}

void Node::switch_chain(Timestamp now, std::optional<NodeId> leader) {
  const std::int64_t s = now.slot - 1;
  const Timestamp last{s, w_.f + 2};
  const std::uint64_t eq = tracker_.eqset().mask;
  int same = 0;
  int total = 0;
  for (NodeId v = 0; v < static_cast<NodeId>(w_.n); ++v) {
    if (eq & node_bit(v)) continue;
    auto b = last_block_from(v);
    if (!b || w_.pool.block(*b).time != last) continue;
    ++total;
    if (w_.pool.block(*b).digest == head_) ++same;
  }
  check_elss(now);
  if (fin_.s_final == s - 2 || !leader) return;

  auto bl = last_block_from(*leader);
  if (!bl || w_.pool.block(*bl).time != last || !w_.pool.entry(*bl).cone.subset_of(buffer_) ||
      !cone_is_valid(w_.pool, *bl, w_.f, w_.registry)) {
    emit("switch-skip", {{"leader", *leader}});
    return;
  }
  const Block& lb = w_.pool.block(*bl);
  CommitCertificate dc_leader = last_commit_certificate(w_.pool, w_.registry, *bl, w_.f);
  CommitCertificate dc_own = last_commit_certificate(w_.pool, w_.registry, own_, w_.f);
  if (w_.registry.is_conflict(dc_leader.commit, w_.pool.block(own_).digest))
    set_elss("conflicting-certificate");

  bool adopt;
  if (2 * same <= total) {
    adopt = !w_.registry.is_conflict(lb.digest, dc_own.commit) || dc_leader.slot >= dc_own.slot;
  } else {
    adopt = i_elss_ && dc_leader.slot >= dc_own.slot;
  }
  if (!adopt) return;
  merge_cone(*bl);
  if (head_ != lb.digest) {
    head_ = lb.digest;
    emit("adopt", {{"reason", "switch"}, {"digest", hex(head_)}, {"leader", *leader}});
  }
}

void Node::wake_up_chain(Timestamp now) {
  const Timestamp last{now.slot - 1, w_.f + 2};
  const std::uint64_t eq = tracker_.eqset().mask;
  std::vector<BlockIndex> carriers;
  std::map<Digest, int> count;
  for (NodeId v = 0; v < static_cast<NodeId>(w_.n); ++v) {
    if (eq & node_bit(v)) continue;
    auto b = last_block_from(v);
    if (!b || w_.pool.block(*b).time != last) continue;
    carriers.push_back(*b);
    ++count[w_.pool.block(*b).digest];
  }
  if (count.empty()) {
    emit("wake-fail", {{"reason", "no-digests"}});
    return;
  }
  // std::map iterates in byte order, so the first maximum is the lowest digest.
  Digest mode{};
  int best = 0;
  for (const auto& [d, c] : count)
    if (c > best) {
      best = c;
      mode = d;
    }
  bool merged = false;
  for (auto b : carriers) {
    if (w_.pool.block(b).digest != mode) continue;
    if (!w_.pool.entry(b).cone.subset_of(buffer_)) continue;
    if (!cone_is_valid(w_.pool, b, w_.f, w_.registry)) continue;
    merge_cone(b);
    merged = true;
  }
  if (!merged) {
    emit("wake-fail", {{"reason", "no-valid-cone"}});
    return;
  }
  head_ = mode;
  emit("adopt", {{"reason", "wake"}, {"digest", hex(head_)}});
}

void Node::update_chain(Timestamp now) {
  const std::int64_t s = now.slot;
  if (w_.registry.at(head_).slot != s - 2) {
    emit("chain-stale", {{"head_slot", w_.registry.at(head_).slot}});
    return;
  }
  head_ = w_.registry.compute_slot_digest(head_, dag_, s - 1);
}

void Node::finalize(Timestamp now) {
  auto on_tau = [&](std::int64_t tau) {
    emit("final-time", {{"tau", tau}, {"s_pre", fin_.s_pre}});
    for (const auto& c : finalize_transactions(w_.txs, w_.registry, head_, tau, cursor_, ledger_))
      emit("confirm", {{"tx", hex(c.tx)}, {"path", to_string(c.path)}});
  };
  auto out = finalize_slots(fin_, w_.registry, w_.pool, head_, dag_, now.slot, w_.f, on_tau);
  if (!out.newly_final_slots.empty())
    emit("finalize", {{"s_final", fin_.s_final}, {"digest", hex(fin_.final_digest)}});
}

BlockIndex Node::create_block(Timestamp now) {
  Block b;
  for (auto t : tips(w_.pool, dag_)) b.refs.push_back(w_.pool.id(t));
  std::sort(b.refs.begin(), b.refs.end());
  b.digest = head_;
  b.txs = mempool_.payload(seen_tx_, opts_.tx_cap);
  b.time = now;
  b.node = id_;
  b.proofs = std::move(pending_proofs_);
  pending_proofs_.clear();
  w_.auth.sign_block(b);
  BlockIndex idx = w_.pool.intern(std::move(b));
  w_.pool.entry(idx).signature_ok = 1;
  dag_.set(idx);
  buffer_.set(idx);
  const auto& e = w_.pool.entry(idx);
  history_[id_].insert(e.cone);
  tracker_.observe(w_.pool, idx);
  own_ = idx;
  absorb_dag();

  Json txs = Json::array();
  for (const auto& t : e.block->txs) txs.push_back(hex(tx_hash(t)));
  Json refs = Json::array();
  for (const auto& r : e.block->refs) refs.push_back(hex(r));
  emit("block", {{"id", hex(e.id)},
                 {"slot", now.slot},
                 {"round", now.round},
                 {"digest", hex(e.block->digest)},
                 {"refs", std::move(refs)},
                 {"txs", std::move(txs)},
                 {"proofs", e.block->proofs.size()},
                 {"bytes", e.bytes}});
  return idx;
}

BlockIndex Node::update(Timestamp now, std::optional<NodeId> leader) {
  absorb_buffer();
  update_dag(now);
  if (now.round == 1) {
    if (now.slot > 1) {
      const Timestamp prev_end{now.slot - 1, w_.f + 2};
      if (w_.pool.block(own_).time != prev_end)
        wake_up_chain(now);
      else
        switch_chain(now, leader);
    }
    emit("slot-entry", {{"slot", now.slot}, {"digest", hex(head_)}, {"elss", i_elss_}});
  }
  if (now.round == w_.f + 2) {
    update_chain(now);
    emit("slot-exit", {{"slot", now.slot}, {"digest", hex(head_)}});
  }
  absorb_dag();
  for (const auto& c : confirm_transactions(w_.txs, dag_, pending_txs_, ledger_))
    emit("confirm", {{"tx", hex(c.tx)}, {"path", to_string(c.path)}});
  finalize(now);

  auto ds = ledger_.double_spends();
  if (!ds.empty())
    emit("ledger-violation",
         {{"kind", "double-spend"}, {"txs", {hex(ds.front().first), hex(ds.front().second)}}});
  if (!ledger_.inputs_closed()) emit("ledger-violation", {{"kind", "missing-input"}});

  BlockIndex b = create_block(now);
  if (opts_.monitor_validity) {
    ++validity_checks_;
    auto rep = monitor_.check(w_.pool, cone(w_.pool, b), w_.f);
    if (!rep.ok)
      emit("validity-violation",
           {{"rule", rep.rule}, {"block", hex(rep.block)}, {"detail", rep.detail}});
  }
  return b;
}

std::vector<BlockIndex> Node::bundle_for(NodeId eta, Timestamp now) {
  auto& h = history_[eta];
  const Timestamp prev = before_time(now, w_.f);
  bool heard = false;
  for (auto b : w_.pool.at_slot(prev.slot))
    if (buffer_.test(b) && w_.pool.block(b).node == eta && w_.pool.block(b).time == prev) {
      heard = true;
      break;
    }
  if (!heard) {
    // Silent last round: eta may have missed what we sent, so fall back to
    // what its latest complete block proves it holds.
    BlockSet known;
    known.set(w_.pool.genesis());
    if (auto lb = last_block_from(eta, true)) known.insert(w_.pool.entry(*lb).cone);
    h = std::move(known);
  }
  const BlockSet& mine = cone(w_.pool, own_);
  auto out = mine.minus(h).members();
  h.insert(mine);
  return out;
}

std::vector<BlockIndex> Node::order_own() const { return w_.registry.order_of(head_); }

std::vector<BlockIndex> Node::order_final() const {
  if (!w_.registry.known(fin_.final_digest)) return {};
  return w_.registry.order_of(fin_.final_digest);
}

Json Node::summary() const {
  return {{"head", hex(head_)},
          {"s_final", fin_.s_final},
          {"final_digest", hex(fin_.final_digest)},
          {"ledger_size", ledger_.size()},
          {"dag_size", dag_.count()},
          {"elss", i_elss_},
          {"eq_mask", tracker_.eqset().mask},
          {"validity_checks", validity_checks_}};
}

}  // namespace slipstream
