#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "slipstream/simnet.hpp"

namespace slipstream {

// Deviations layered over an otherwise honest replica. Combinable.
struct ByzantineSpec {
  std::optional<std::int64_t> crash_from_round;  // silent (and frozen) from this round
  std::set<NodeId> withhold_targets;             // no messages to these ...
  std::int64_t withhold_from = 0;                // ... during [from, to] rounds
  std::int64_t withhold_to = -1;
  std::set<NodeId> exclude;        // never sends to these
  std::set<std::int64_t> equivocate_rounds;  // twin blocks at these rounds
};

class ByzantineNode : public Participant {
 public:
  ByzantineNode(World& w, NodeId id, ByzantineSpec spec, NodeOptions opts = {});
  NodeId id() const override { return node_.id(); }
  std::vector<Message> step(Timestamp now, const std::vector<Message>& inbox,
                            std::optional<NodeId> leader) override;
  void submit(const UtxoTx& tx) override { node_.submit(tx); }
  const Node* view() const override { return &node_; }
  Json summary() const override;

 private:
  BlockIndex make_twin(BlockIndex own, Timestamp now);

  World& w_;
  Node node_;
  ByzantineSpec spec_;
  std::uint64_t actions_ = 0;
};

// One honest replica per group: each replica hears only its group and
// speaks only to it, so different groups see different digests.
class DigestSplitter : public Participant {
 public:
  DigestSplitter(World& w, NodeId id, std::vector<std::vector<NodeId>> groups,
                 NodeOptions opts = {});
  NodeId id() const override { return id_; }
  std::vector<Message> step(Timestamp now, const std::vector<Message>& inbox,
                            std::optional<NodeId> leader) override;
  void submit(const UtxoTx& tx) override;
  const Node* view() const override { return replicas_.front().get(); }
  Json summary() const override;

 private:
  World& w_;
  NodeId id_;
  std::vector<std::vector<NodeId>> groups_;
  std::vector<std::unique_ptr<Node>> replicas_;
};

// Releases two txs spending the same genesis output to two node subsets.
// Empty target lists mean "first half" / "second half" of all nodes.
class DoubleSpender : public Client {
 public:
  DoubleSpender(AccountId account, std::int64_t release_round, std::vector<NodeId> targets_a,
                std::vector<NodeId> targets_b, int group_id);
  void tick(std::int64_t round, Timestamp now, Simulator& sim) override;

 private:
  AccountId account_;
  std::int64_t release_round_;
  std::vector<NodeId> a_;
  std::vector<NodeId> b_;
  int group_;
  bool done_ = false;
};

// Builds and signs a tx moving `pay` to `to` and the remainder back to the
// owner of `input`.
UtxoTx make_payment(const Authenticator& auth, const UtxoId& input, const TxOutput& spent,
                    AccountId to, std::uint64_t pay);

UtxoTx make_genesis_tx(std::uint32_t accounts, std::uint64_t value_each);

}  // namespace slipstream
