#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace slipstream {

using Bytes = std::vector<std::uint8_t>;
using Hash32 = std::array<std::uint8_t, 32>;

// Block ids and slot digests are both 32-byte hashes. The all-zero digest is
// the pre-genesis digest (slot -1).
using BlockId = Hash32;
using Digest = Hash32;

using NodeId = std::uint32_t;
using AccountId = std::uint32_t;

inline constexpr NodeId kNoNode = 0xffffffffu;
inline constexpr AccountId kGenesisAccount = 0xffffffffu;
inline constexpr Digest kZeroDigest{};

enum class ErrorCode {
  UndefinedBeforeGenesis,
  UnknownNode,
  UnknownAccount,
  UnknownBlock,
  UnknownDigest,
  MissingAncestor,
  ParentUnknown,
  ScenarioInvalid,
  Parse,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct Hash32Hasher {
  std::size_t operator()(const Hash32& h) const noexcept {
    std::size_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | h[i];
    return v;
  }
};

bool is_zero(const Hash32& h);
std::string hex(const Hash32& h);
std::string hex(std::span<const std::uint8_t> data);
Hash32 hash32_from_hex(std::string_view text);

// SHA-256 (OpenSSL libcrypto).
Hash32 sha256(std::span<const std::uint8_t> data);
inline constexpr const char* kHashName = "SHA-256";

struct Timestamp {
  std::int64_t slot = 0;
  std::int32_t round = 1;

  auto operator<=>(const Timestamp&) const = default;
};

std::string to_string(const Timestamp& t);

// Predecessor on the round grid. Throws UndefinedBeforeGenesis at <0, f+2>.
Timestamp before_time(Timestamp t, int f);
Timestamp next_time(Timestamp t, int f);
Timestamp genesis_time(int f);

// Global round index: <1,1> is round 1, genesis sits at round 0.
std::int64_t global_round(Timestamp t, int f);
Timestamp time_of_round(std::int64_t round, int f);

struct UtxoId {
  Hash32 tx{};
  std::uint32_t index = 0;

  auto operator<=>(const UtxoId&) const = default;
};

struct UtxoIdHasher {
  std::size_t operator()(const UtxoId& u) const noexcept {
    return Hash32Hasher{}(u.tx) ^ (static_cast<std::size_t>(u.index) * 0x9e3779b97f4a7c15ull);
  }
};

struct TxOutput {
  std::uint64_t value = 0;
  AccountId owner = 0;

  bool operator==(const TxOutput&) const = default;
};

struct UtxoTx {
  std::vector<UtxoId> inputs;
  std::vector<TxOutput> outputs;
  AccountId owner = 0;
  Bytes signature;

  bool operator==(const UtxoTx&) const = default;
};

struct Block;

// Two signed blocks by one author that are not linearly ordered.
struct EquivocationProof {
  std::shared_ptr<const Block> first;
  std::shared_ptr<const Block> second;
};

struct Block {
  std::vector<BlockId> refs;
  Digest digest{};
  std::vector<UtxoTx> txs;
  Timestamp time;
  NodeId node = kNoNode;
  std::vector<EquivocationProof> proofs;
  Bytes sign;
};

// Canonical encoding, see docs/encoding.md.
void encode_tx(const UtxoTx& tx, Bytes& out, bool with_signature = true);
Bytes serialize_tx(const UtxoTx& tx, bool with_signature = true);
Hash32 tx_hash(const UtxoTx& tx);

// Serialization sorts refs, so permuted refs give identical bytes.
Bytes canonical_serialize(const Block& b, bool with_signature = true);
BlockId block_id(const Block& b);

Block make_genesis(int f, std::vector<UtxoTx> genesis_txs);

// Keyed simulation of signatures: HMAC-SHA256 with a per-principal key
// derived from the run seed.
class Authenticator {
 public:
  Authenticator(std::uint64_t run_seed, std::uint32_t nodes, std::uint32_t accounts);

  Bytes sign_node(NodeId node, std::span<const std::uint8_t> data) const;
  bool verify_node(NodeId node, std::span<const std::uint8_t> data,
                   std::span<const std::uint8_t> sig) const;

  Bytes sign_account(AccountId account, std::span<const std::uint8_t> data) const;
  bool verify_account(AccountId account, std::span<const std::uint8_t> data,
                      std::span<const std::uint8_t> sig) const;

  void sign_block(Block& b) const;
  bool verify_block(const Block& b) const;
  void sign_tx(UtxoTx& tx) const;
  bool verify_tx(const UtxoTx& tx) const;

  std::uint32_t nodes() const { return nodes_; }
  std::uint32_t accounts() const { return accounts_; }

  static constexpr const char* kName = "HMAC-SHA256-sim";

 private:
  Hash32 key_for(char kind, std::uint32_t id) const;

  std::uint64_t seed_;
  std::uint32_t nodes_;
  std::uint32_t accounts_;
  std::vector<Hash32> node_keys_;
  std::vector<Hash32> account_keys_;
};

}  // namespace slipstream
