#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "slipstream/core.hpp"
#include "slipstream/dag.hpp"

namespace slipstream {

// Deterministic topological order: among blocks whose in-set parents are
// already emitted, pick the least (slot, round, node, id).
std::vector<BlockIndex> concat_order(const BlockPool& pool, const std::vector<BlockIndex>& blocks);

// Hash(parent || id_1 || ... || id_k) over ids in concat order.
Digest slot_digest_hash(const Digest& parent, const BlockPool& pool,
                        const std::vector<BlockIndex>& ordered);

// Commit(a) when `a` is a digest certificate: cone(a) holds a quorum of blocks
// from a's slot that all carry one digest of slot a.slot - 2.
std::optional<Digest> digest_certificate(const BlockPool& pool, const DigestBook& book,
                                         BlockIndex a, int f);

class DigestRegistry : public DigestBook {
 public:
  struct Entry {
    Digest digest{};
    std::int64_t slot = -1;
    Digest parent{};
    std::vector<BlockIndex> fresh;  // newly committed, concat order
    BlockSet committed;             // D(digest)
    std::vector<Digest> chain;      // chain[j + 1] is the slot-j digest

    // Lazily derived from D(digest).
    mutable bool derived = false;
    mutable std::uint64_t eq_mask = 0;
    mutable std::unordered_map<NodeId, BlockIndex> eq_max;
    mutable std::vector<std::uint64_t> dc_authors;  // [k + 1]: authors of DCs for chain[k+1]
    mutable std::int64_t last_final = -1;
  };

  DigestRegistry(const BlockPool& pool, int f, const Authenticator* auth = nullptr);

  std::optional<std::int64_t> slot_of(const Digest& d) const override;
  std::optional<Digest> parent_of(const Digest& d) const override;
  const BlockSet* committed_of(const Digest& d) const override;
  void record(const Digest& d, std::int64_t slot, const Digest& parent,
              const std::vector<BlockIndex>& fresh) override;

  const Entry* find(const Digest& d) const;
  const Entry& at(const Digest& d) const;  // throws UnknownDigest
  bool known(const Digest& d) const { return find(d) != nullptr; }

  // Registers and returns the slot-s digest over `dag` on top of `parent`.
  Digest compute_slot_digest(const Digest& parent, const BlockSet& dag, std::int64_t s);

  std::vector<BlockIndex> order_of(const Digest& d) const;
  const std::vector<Digest>& chain(const Digest& d) const { return at(d).chain; }
  // Chain(d)[j]; nullopt when j is beyond d's slot.
  std::optional<Digest> chain_at(const Digest& d, std::int64_t j) const;
  bool is_conflict(const Digest& a, const Digest& b) const;
  bool commits(const Digest& d, BlockIndex b) const { return at(d).committed.test(b); }

  // EqSet(d): equivocators visible inside D(d), plus self-evident proofs
  // carried by committed blocks.
  std::uint64_t eqset_of(const Digest& d) const;
  // Slot of the last final digest in D(d) (final: a quorum of DCs inside D(d)).
  std::int64_t last_final_in(const Digest& d) const;

  std::vector<Digest> all_digests() const;
  int f() const { return f_; }

  // Called once per newly registered digest.
  std::function<void(const Entry&)> on_record;

 private:
  void derive(const Entry& e) const;

  const BlockPool& pool_;
  int f_;
  const Authenticator* auth_;
  std::unordered_map<Digest, Entry, Hash32Hasher> entries_;
};

struct FinalityState {
  std::int64_t s_final = 0;
  std::int64_t s_pre = 0;
  Digest final_digest{};  // digest whose order is Order_final
  std::map<std::int64_t, std::int64_t> final_time;  // slot -> tau
};

// FinalTime(s) against a node's chain head; nullopt stands for bottom.
std::optional<std::int64_t> finality_time(const FinalityState& st, const DigestRegistry& reg,
                                          const Digest& head, std::int64_t s);

struct FinalizeOutcome {
  std::vector<std::int64_t> newly_final_slots;  // successive s_final values
  std::vector<std::int64_t> new_taus;
};

// Scans slots t in [s_final+3, now_slot]: when D holds a quorum of slot-t DCs
// for Chain[t-2], that digest becomes final. Each new finality time is handed
// to `on_tau` in order.
FinalizeOutcome finalize_slots(FinalityState& st, const DigestRegistry& reg, const BlockPool& pool,
                               const Digest& head, const BlockSet& dag, std::int64_t now_slot,
                               int f, const std::function<void(std::int64_t)>& on_tau);

struct CommitCertificate {
  std::optional<BlockIndex> block;  // empty: synthetic certificate
  std::int64_t slot = -1;
  Digest commit{};
};

// Latest DC authored by b.node inside cone(b), else a synthetic slot -1
// certificate of the zero digest.
CommitCertificate last_commit_certificate(const BlockPool& pool, const DigestRegistry& reg,
                                          BlockIndex b, int f);

}  // namespace slipstream
