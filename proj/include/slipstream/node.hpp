#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "slipstream/commitment.hpp"
#include "slipstream/core.hpp"
#include "slipstream/dag.hpp"
#include "slipstream/ledger.hpp"
#include "slipstream/trace.hpp"

namespace slipstream {

// State shared by every participant of one run. All of it is content
// addressed, so sharing does not leak information between nodes.
struct World {
  World(int n, int f, std::uint64_t seed, std::uint32_t accounts, std::vector<UtxoTx> genesis_txs,
        Trace* trace = nullptr);
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  int n;
  int f;
  Authenticator auth;
  std::vector<UtxoTx> genesis_txs;
  BlockPool pool;
  DigestRegistry registry;
  TxEngine txs;
  Trace* trace;
  std::int64_t round = 0;  // stamp for run-wide events

  void emit(std::int64_t node, std::string type, Json payload = Json::object());
};

struct NodeOptions {
  std::size_t tx_cap = kDefaultTxCap;
  bool monitor_validity = true;  // standalone is_valid_dag(cone(B_own)) every round
};

class Node {
 public:
  Node(World& world, NodeId id, NodeOptions opts = {});

  NodeId id() const { return id_; }
  void submit(UtxoTx tx) { mempool_.push(std::move(tx)); }

  // Receive phase.
  void receive(const std::vector<BlockIndex>& blocks);
  // State update phase, ending with block creation. Returns B_own.
  BlockIndex update(Timestamp now, std::optional<NodeId> leader);
  // Send phase: cone(B_own) minus what `eta` is known to hold.
  std::vector<BlockIndex> bundle_for(NodeId eta, Timestamp now);

  const BlockSet& dag() const { return dag_; }
  const BlockSet& buffer() const { return buffer_; }
  const Digest& head() const { return head_; }
  BlockIndex own_block() const { return own_; }
  const UtxoLedger& ledger() const { return ledger_; }
  const FinalityState& finality() const { return fin_; }
  bool elss_flag() const { return i_elss_; }
  std::uint64_t eq_mask() const { return tracker_.eqset().mask; }
  std::vector<BlockIndex> order_own() const;
  std::vector<BlockIndex> order_final() const;
  std::optional<BlockIndex> last_block_from(NodeId node, bool require_complete = false) const;
  std::uint64_t validity_checks() const { return validity_checks_; }
  Json summary() const;

 private:
  void absorb_buffer();
  void absorb_dag();
  void merge_cone(BlockIndex b);
  void update_dag(Timestamp now);
  void switch_chain(Timestamp now, std::optional<NodeId> leader);
  void wake_up_chain(Timestamp now);
  void check_elss(Timestamp now);
  void update_chain(Timestamp now);
  void finalize(Timestamp now);
  BlockIndex create_block(Timestamp now);
  void set_elss(const char* reason);
  void emit(std::string type, Json payload = Json::object());

  World& w_;
  NodeId id_;
  NodeOptions opts_;

  BlockSet dag_;
  BlockSet buffer_;
  std::vector<BlockIndex> waiting_;  // buffered, cone not yet inside Buffer
  std::unordered_map<NodeId, BlockSet> history_;
  EquivocationTracker tracker_;
  std::vector<EquivocationProof> pending_proofs_;

  Digest head_ = kZeroDigest;
  BlockIndex own_ = 0;
  bool i_elss_ = false;
  FinalityState fin_;

  UtxoLedger ledger_;
  ConsensusCursor cursor_;
  std::vector<TxRef> pending_txs_;
  BlockSet dag_seen_;
  std::unordered_set<Hash32, Hash32Hasher> seen_tx_;
  Mempool mempool_;

  ValidityMonitor monitor_;
  std::uint64_t validity_checks_ = 0;
};

}  // namespace slipstream
