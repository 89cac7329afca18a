#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "slipstream/commitment.hpp"
#include "slipstream/core.hpp"
#include "slipstream/dag.hpp"

namespace slipstream {

// One inclusion of a tx: position `pos` in block `block`.
struct TxRef {
  BlockIndex block = 0;
  std::uint32_t pos = 0;

  auto operator<=>(const TxRef&) const = default;
};

bool is_double_spend(const UtxoTx& a, const UtxoTx& b);

// Run-wide tx facts derived from the shared block pool. Everything cached here
// depends only on block contents and cones, never on a node's local view.
class TxEngine {
 public:
  TxEngine(const BlockPool& pool, const Authenticator& auth, int f);

  const UtxoTx& tx(TxRef r) const;
  const Hash32& hash(TxRef r);
  std::vector<TxRef> refs_in(BlockIndex b) const;

  const UtxoTx* find_tx(const Hash32& h);
  bool is_genesis_tx(const Hash32& h);
  std::optional<TxOutput> output_of(const UtxoId& u);

  // Signature, balance, owner and positivity checks.
  bool well_formed(TxRef r);
  bool well_formed(const UtxoTx& tx, const Hash32& h);

  bool is_ready(TxRef r);
  bool approves(BlockIndex c, TxRef r);
  bool is_tx_certificate(BlockIndex c, TxRef r);
  // Distinct authors of TCs for r found among blocks of `dag`.
  std::uint64_t certificate_authors(const BlockSet& dag, TxRef r);
  bool fast_confirmed_in(const BlockSet& dag, TxRef r);
  // Some inclusion of tx `h` is fast-path confirmed with respect to cone(b).
  bool confirmed_in_cone(const Hash32& h, BlockIndex b);

  int f() const { return f_; }
  const BlockPool& pool() const { return pool_; }

 private:
  void sync();
  static std::uint64_t pack(BlockIndex b, std::uint32_t pos) {
    return (std::uint64_t{b} << 20) ^ pos;
  }

  const BlockPool& pool_;
  const Authenticator& auth_;
  int f_;
  std::size_t indexed_ = 0;

  std::unordered_map<std::uint64_t, Hash32> hashes_;
  std::unordered_map<Hash32, TxRef, Hash32Hasher> first_seen_;
  std::unordered_set<Hash32, Hash32Hasher> genesis_;
  std::unordered_map<UtxoId, std::vector<TxRef>, UtxoIdHasher> spenders_;

  std::unordered_map<Hash32, bool, Hash32Hasher> well_formed_;
  std::unordered_map<std::uint64_t, bool> ready_;
  std::map<std::pair<BlockIndex, std::uint64_t>, bool> approves_;
  std::map<std::pair<BlockIndex, std::uint64_t>, bool> tc_;
  std::map<std::pair<Hash32, BlockIndex>, bool> confirmed_in_cone_;
};

enum class ConfirmPath { Fast, Consensus1, Consensus2 };
const char* to_string(ConfirmPath p);

struct Confirmation {
  Hash32 tx{};
  ConfirmPath path = ConfirmPath::Fast;
};

// A node's confirmed set. Genesis txs are present from the start.
class UtxoLedger {
 public:
  explicit UtxoLedger(const std::vector<UtxoTx>& genesis_txs);

  bool contains(const Hash32& h) const { return confirmed_.count(h) != 0; }
  bool has_inputs(const UtxoTx& tx) const;
  // Some input already consumed by a different confirmed tx.
  bool conflicts(const UtxoTx& tx, const Hash32& h) const;
  bool add(const UtxoTx& tx, const Hash32& h);

  // Pairs of confirmed txs sharing an input; empty when the ledger is safe.
  std::vector<std::pair<Hash32, Hash32>> double_spends() const;
  bool inputs_closed() const;  // every input's creator is confirmed

  const std::vector<Hash32>& entries() const { return order_; }
  const UtxoTx& at(const Hash32& h) const { return confirmed_.at(h); }
  std::size_t size() const { return order_.size(); }
  // Unspent outputs owned by `owner`.
  std::vector<std::pair<UtxoId, TxOutput>> unspent_of(AccountId owner) const;

 private:
  std::unordered_map<Hash32, UtxoTx, Hash32Hasher> confirmed_;
  std::vector<Hash32> order_;
  std::unordered_multimap<UtxoId, Hash32, UtxoIdHasher> spent_;
};

// Fast path over the node DAG. `pending` holds inclusions not yet confirmed;
// confirmed ones are dropped from it.
std::vector<Confirmation> confirm_transactions(TxEngine& eng, const BlockSet& dag,
                                               std::vector<TxRef>& pending, UtxoLedger& ledger);

struct ConsensusCursor {
  BlockSet proc_tx_certificate;
  BlockSet proc_total_order;
};

// Consensus path for one finality time tau, walking blocks in final order.
std::vector<Confirmation> finalize_transactions(TxEngine& eng, const DigestRegistry& reg,
                                                const Digest& head, std::int64_t tau,
                                                ConsensusCursor& cursor, UtxoLedger& ledger);

// Per-node queue of client txs waiting for inclusion.
class Mempool {
 public:
  void push(UtxoTx tx);
  // Up to `cap` queued txs whose hash is not in `seen`; they stay queued
  // until seen in the DAG.
  std::vector<UtxoTx> payload(const std::unordered_set<Hash32, Hash32Hasher>& seen,
                              std::size_t cap);
  std::size_t size() const { return queue_.size(); }

 private:
  std::vector<std::pair<Hash32, UtxoTx>> queue_;
};

inline constexpr std::size_t kDefaultTxCap = 8;

}  // namespace slipstream
