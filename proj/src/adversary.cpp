#include "slipstream/adversary.hpp"

#include <algorithm>

namespace slipstream {

UtxoTx make_payment(const Authenticator& auth, const UtxoId& input, const TxOutput& spent,
                    AccountId to, std::uint64_t pay) {
  UtxoTx tx;
  tx.inputs = {input};
  tx.owner = spent.owner;
  pay = std::min(pay, spent.value);
  tx.outputs.push_back({pay, to});
  if (spent.value > pay) tx.outputs.push_back({spent.value - pay, spent.owner});
  auth.sign_tx(tx);
  return tx;
}

UtxoTx make_genesis_tx(std::uint32_t accounts, std::uint64_t value_each) {
  UtxoTx g;
  g.owner = kGenesisAccount;
  for (AccountId a = 0; a < accounts; ++a) g.outputs.push_back({value_each, a});
  return g;
}

ByzantineNode::ByzantineNode(World& w, NodeId id, ByzantineSpec spec, NodeOptions opts)
    : w_(w), node_(w, id, opts), spec_(std::move(spec)) {}

BlockIndex ByzantineNode::make_twin(BlockIndex own, Timestamp now) {
  Block twin = w_.pool.block(own);
  UtxoTx junk;  // no inputs: never ready, never confirmed
  junk.owner = 0;
  junk.outputs = {{1, 0}};
  junk.signature = {static_cast<std::uint8_t>(now.round), static_cast<std::uint8_t>(now.slot)};
  twin.txs.push_back(junk);
  twin.proofs.clear();
  w_.auth.sign_block(twin);
  return w_.pool.intern(std::move(twin));
}

std::vector<Message> ByzantineNode::step(Timestamp now, const std::vector<Message>& inbox,
                                         std::optional<NodeId> leader) {
  const std::int64_t r = global_round(now, w_.f);
  if (spec_.crash_from_round && r >= *spec_.crash_from_round) return {};
  for (const auto& m : inbox) node_.receive(m.blocks);
  BlockIndex own = node_.update(now, leader);

  std::optional<BlockIndex> twin;
  if (spec_.equivocate_rounds.count(r)) {
    twin = make_twin(own, now);
    ++actions_;
    w_.emit(node_.id(), "byz-action",
            {{"kind", "equivocate"}, {"blocks", {hex(w_.pool.id(own)), hex(w_.pool.id(*twin))}}});
  }
  std::vector<Message> out;
  const NodeId me = node_.id();
  std::vector<NodeId> peers;
  for (NodeId eta = 0; eta < static_cast<NodeId>(w_.n); ++eta)
    if (eta != me) peers.push_back(eta);
  for (std::size_t k = 0; k < peers.size(); ++k) {
    NodeId eta = peers[k];
    auto blocks = node_.bundle_for(eta, now);
    if (spec_.exclude.count(eta)) continue;
    if (spec_.withhold_targets.count(eta) && r >= spec_.withhold_from && r <= spec_.withhold_to)
      continue;
    if (twin && k >= peers.size() / 2) {
      std::replace(blocks.begin(), blocks.end(), own, *twin);
    }
    out.push_back({me, eta, std::move(blocks), 0});
  }
  return out;
}

Json ByzantineNode::summary() const {
  Json s = node_.summary();
  s["byzantine_actions"] = actions_;
  return s;
}

DigestSplitter::DigestSplitter(World& w, NodeId id, std::vector<std::vector<NodeId>> groups,
                               NodeOptions opts)
    : w_(w), id_(id), groups_(std::move(groups)) {
  if (groups_.empty()) throw Error(ErrorCode::ScenarioInvalid, "digest split needs groups");
  for (std::size_t g = 0; g < groups_.size(); ++g)
    replicas_.push_back(std::make_unique<Node>(w, id, opts));
}

void DigestSplitter::submit(const UtxoTx& tx) {
  for (auto& r : replicas_) r->submit(tx);
}

std::vector<Message> DigestSplitter::step(Timestamp now, const std::vector<Message>& inbox,
                                          std::optional<NodeId> leader) {
  std::vector<Message> out;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const auto& grp = groups_[g];
    auto in_group = [&](NodeId v) { return std::find(grp.begin(), grp.end(), v) != grp.end(); };
    Node& rep = *replicas_[g];
    for (const auto& m : inbox)
      if (in_group(m.from)) rep.receive(m.blocks);
    BlockIndex own = rep.update(now, leader);
    w_.emit(id_, "byz-action",
            {{"kind", "digest-split"}, {"group", g}, {"block", hex(w_.pool.id(own))},
             {"digest", hex(rep.head())}});
    for (NodeId eta : grp)
      if (eta != id_) out.push_back({id_, eta, rep.bundle_for(eta, now), 0});
  }
  return out;
}

Json DigestSplitter::summary() const {
  Json s = replicas_.front()->summary();
  s["replicas"] = replicas_.size();
  return s;
}

DoubleSpender::DoubleSpender(AccountId account, std::int64_t release_round,
                             std::vector<NodeId> targets_a, std::vector<NodeId> targets_b,
                             int group_id)
    : account_(account),
      release_round_(release_round),
      a_(std::move(targets_a)),
      b_(std::move(targets_b)),
      group_(group_id) {}

void DoubleSpender::tick(std::int64_t round, Timestamp, Simulator& sim) {
  if (done_ || round < release_round_) return;
  done_ = true;
  World& w = sim.world();
  if (w.genesis_txs.empty()) return;
  const UtxoTx& g = w.genesis_txs.front();
  if (account_ >= g.outputs.size()) throw Error(ErrorCode::UnknownAccount, "double spender");
  UtxoId input{tx_hash(g), account_};
  const TxOutput& spent = g.outputs[account_];
  AccountId other = (account_ + 1) % w.auth.accounts();
  AccountId third = (account_ + 2) % w.auth.accounts();
  UtxoTx tx1 = make_payment(w.auth, input, spent, other, spent.value);
  UtxoTx tx2 = make_payment(w.auth, input, spent, third, spent.value);
  auto a = a_;
  auto b = b_;
  if (a.empty() && b.empty()) {
    for (NodeId v = 0; v < static_cast<NodeId>(w.n); ++v) (v < static_cast<NodeId>(w.n / 2) ? a : b).push_back(v);
  }
  auto release = [&](const UtxoTx& tx, const std::vector<NodeId>& targets) {
    Json tj = Json::array();
    for (auto v : targets) {
      sim.submit(v, tx);
      tj.push_back(v);
    }
    w.emit(-1, "tx",
           {{"tx", hex(tx_hash(tx))},
            {"kind", "double-spend"},
            {"client", account_},
            {"group", group_},
            {"inputs", {hex(input.tx) + ":" + std::to_string(input.index)}},
            {"targets", std::move(tj)}});
  };
  release(tx1, a);
  release(tx2, b);
}

}  // namespace slipstream
