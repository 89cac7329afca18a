#include "slipstream/core.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cstring>

namespace slipstream {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UndefinedBeforeGenesis: return "undefined-before-genesis";
    case ErrorCode::UnknownNode: return "unknown-node";
    case ErrorCode::UnknownAccount: return "unknown-account";
    case ErrorCode::UnknownBlock: return "unknown-block";
    case ErrorCode::UnknownDigest: return "unknown-digest";
    case ErrorCode::MissingAncestor: return "missing-ancestor";
    case ErrorCode::ParentUnknown: return "parent-unknown";
    case ErrorCode::ScenarioInvalid: return "scenario-invalid";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

bool is_zero(const Hash32& h) {
  return std::all_of(h.begin(), h.end(), [](std::uint8_t b) { return b == 0; });
}

std::string hex(std::span<const std::uint8_t> data) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(data.size() * 2);
  for (auto b : data) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

std::string hex(const Hash32& h) { return hex(std::span<const std::uint8_t>(h)); }

Hash32 hash32_from_hex(std::string_view text) {
  if (text.size() != 64) throw Error(ErrorCode::Parse, "expected 64 hex chars");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error(ErrorCode::Parse, "bad hex digit");
  };
  Hash32 h{};
  for (std::size_t i = 0; i < 32; ++i)
    h[i] = static_cast<std::uint8_t>(nib(text[2 * i]) << 4 | nib(text[2 * i + 1]));
  return h;
}

Hash32 sha256(std::span<const std::uint8_t> data) {
  Hash32 out{};
  SHA256(data.data(), data.size(), out.data());
  return out;
}

std::string to_string(const Timestamp& t) {
  return "<" + std::to_string(t.slot) + "," + std::to_string(t.round) + ">";
}

Timestamp before_time(Timestamp t, int f) {
  if (t.slot <= 0 && t.round >= f + 2)
    throw Error(ErrorCode::UndefinedBeforeGenesis, "no time before genesis");
  if (t.slot < 0 || (t.slot == 0 && t.round < f + 2))
    throw Error(ErrorCode::UndefinedBeforeGenesis, "time precedes genesis");
  if (t.round > 1) return {t.slot, t.round - 1};
  return {t.slot - 1, f + 2};
}

Timestamp next_time(Timestamp t, int f) {
  if (t.round < f + 2) return {t.slot, t.round + 1};
  return {t.slot + 1, 1};
}

Timestamp genesis_time(int f) { return {0, f + 2}; }

std::int64_t global_round(Timestamp t, int f) {
  if (t.slot == 0) return 0;
  return (t.slot - 1) * (f + 2) + t.round;
}

Timestamp time_of_round(std::int64_t round, int f) {
  if (round <= 0) return genesis_time(f);
  return {(round - 1) / (f + 2) + 1, static_cast<std::int32_t>((round - 1) % (f + 2) + 1)};
}

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_hash(Bytes& out, const Hash32& h) { out.insert(out.end(), h.begin(), h.end()); }

void put_bytes(Bytes& out, std::span<const std::uint8_t> b) {
  put_u32(out, static_cast<std::uint32_t>(b.size()));
  out.insert(out.end(), b.begin(), b.end());
}

}  // namespace

void encode_tx(const UtxoTx& tx, Bytes& out, bool with_signature) {
  put_u32(out, static_cast<std::uint32_t>(tx.inputs.size()));
  for (const auto& in : tx.inputs) {
    put_hash(out, in.tx);
    put_u32(out, in.index);
  }
  put_u32(out, static_cast<std::uint32_t>(tx.outputs.size()));
  for (const auto& o : tx.outputs) {
    put_u64(out, o.value);
    put_u32(out, o.owner);
  }
  put_u32(out, tx.owner);
  if (with_signature) put_bytes(out, tx.signature);
}

Bytes serialize_tx(const UtxoTx& tx, bool with_signature) {
  Bytes out;
  encode_tx(tx, out, with_signature);
  return out;
}

Hash32 tx_hash(const UtxoTx& tx) { return sha256(serialize_tx(tx)); }

Bytes canonical_serialize(const Block& b, bool with_signature) {
  Bytes out;
  out.reserve(64 + 32 * b.refs.size() + 64 * b.txs.size());
  std::vector<BlockId> refs = b.refs;
  std::sort(refs.begin(), refs.end());
  put_u32(out, static_cast<std::uint32_t>(refs.size()));
  for (const auto& r : refs) put_hash(out, r);
  put_hash(out, b.digest);
  put_u32(out, static_cast<std::uint32_t>(b.txs.size()));
  for (const auto& tx : b.txs) {
    Bytes t;
    encode_tx(tx, t);
    put_bytes(out, t);
  }
  put_u64(out, static_cast<std::uint64_t>(b.time.slot));
  put_u32(out, static_cast<std::uint32_t>(b.time.round));
  put_u32(out, b.node);
  put_u32(out, static_cast<std::uint32_t>(b.proofs.size()));
  for (const auto& p : b.proofs) {
    put_bytes(out, canonical_serialize(*p.first));
    put_bytes(out, canonical_serialize(*p.second));
  }
  if (with_signature) put_bytes(out, b.sign);
  return out;
}

BlockId block_id(const Block& b) { return sha256(canonical_serialize(b)); }

Block make_genesis(int f, std::vector<UtxoTx> genesis_txs) {
  Block g;
  g.digest = kZeroDigest;
  g.txs = std::move(genesis_txs);
  g.time = genesis_time(f);
  g.node = kNoNode;
  return g;
}

Authenticator::Authenticator(std::uint64_t run_seed, std::uint32_t nodes, std::uint32_t accounts)
    : seed_(run_seed), nodes_(nodes), accounts_(accounts) {
  for (std::uint32_t i = 0; i < nodes; ++i) node_keys_.push_back(key_for('N', i));
  for (std::uint32_t i = 0; i < accounts; ++i) account_keys_.push_back(key_for('A', i));
}

Hash32 Authenticator::key_for(char kind, std::uint32_t id) const {
  Bytes material{'s', 'l', 'p', 'k', static_cast<std::uint8_t>(kind)};
  put_u64(material, seed_);
  put_u32(material, id);
  return sha256(material);
}

namespace {

Bytes hmac(const Hash32& key, std::span<const std::uint8_t> data) {
  Bytes out(32);
  unsigned int len = 32;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(),
       out.data(), &len);
  out.resize(len);
  return out;
}

bool equal_sig(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace

Bytes Authenticator::sign_node(NodeId node, std::span<const std::uint8_t> data) const {
  if (node >= nodes_) throw Error(ErrorCode::UnknownNode, "node " + std::to_string(node));
  return hmac(node_keys_[node], data);
}

bool Authenticator::verify_node(NodeId node, std::span<const std::uint8_t> data,
                                std::span<const std::uint8_t> sig) const {
  if (node >= nodes_) return false;
  return equal_sig(hmac(node_keys_[node], data), sig);
}

Bytes Authenticator::sign_account(AccountId account, std::span<const std::uint8_t> data) const {
  if (account >= accounts_)
    throw Error(ErrorCode::UnknownAccount, "account " + std::to_string(account));
  return hmac(account_keys_[account], data);
}

bool Authenticator::verify_account(AccountId account, std::span<const std::uint8_t> data,
                                   std::span<const std::uint8_t> sig) const {
  if (account >= accounts_) return false;
  return equal_sig(hmac(account_keys_[account], data), sig);
}

void Authenticator::sign_block(Block& b) const {
  b.sign = sign_node(b.node, canonical_serialize(b, false));
}

bool Authenticator::verify_block(const Block& b) const {
  return verify_node(b.node, canonical_serialize(b, false), b.sign);
}

void Authenticator::sign_tx(UtxoTx& tx) const {
  tx.signature = sign_account(tx.owner, serialize_tx(tx, false));
}

bool Authenticator::verify_tx(const UtxoTx& tx) const {
  return verify_account(tx.owner, serialize_tx(tx, false), tx.signature);
}

}  // namespace slipstream
