#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "slipstream/harness.hpp"

using namespace slipstream;

namespace {

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

UtxoTx pay(const Authenticator& auth, const UtxoTx& from, std::uint32_t idx, AccountId to,
           std::uint64_t amount) {
  return make_payment(auth, UtxoId{tx_hash(from), idx}, from.outputs.at(idx), to, amount);
}

}  // namespace

// ---- core ----

TEST(Time, GlobalRoundMatchesClosedForm) {
  for (int f = 0; f <= 3; ++f)
    for (std::int64_t s = 1; s <= 30; ++s)
      for (int i = 1; i <= f + 2; ++i) {
        Timestamp t{s, i};
        EXPECT_EQ(global_round(t, f), (s - 1) * (f + 2) + i);
        EXPECT_EQ(time_of_round(global_round(t, f), f), t);
      }
}

TEST(Time, BeforeAndNextWalkTheGrid) {
  const int f = 2;
  EXPECT_EQ(before_time({1, 1}, f), (Timestamp{0, f + 2}));
  EXPECT_EQ(before_time({3, 1}, f), (Timestamp{2, f + 2}));
  EXPECT_EQ(next_time({2, f + 2}, f), (Timestamp{3, 1}));
  EXPECT_EQ(genesis_time(f), (Timestamp{0, f + 2}));
  try {
    before_time(genesis_time(f), f);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UndefinedBeforeGenesis);
  }
}

TEST(Hashing, Sha256KnownVector) {
  EXPECT_EQ(hex(sha256(bytes_of("abc"))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_TRUE(is_zero(kZeroDigest));
  EXPECT_EQ(hash32_from_hex(hex(sha256(bytes_of("x")))), sha256(bytes_of("x")));
}

TEST(Blocks, IdCoversEveryFieldAndSignaturesBind) {
  Authenticator auth(9, 4, 4);
  Block b;
  b.time = {2, 1};
  b.node = 1;
  b.refs = {sha256(bytes_of("r"))};
  auth.sign_block(b);
  const BlockId id = block_id(b);
  EXPECT_EQ(id, block_id(b));
  EXPECT_EQ(canonical_serialize(b), canonical_serialize(b));
  EXPECT_TRUE(auth.verify_block(b));

  Block c = b;
  c.time.round = 2;
  EXPECT_NE(block_id(c), id);
  EXPECT_FALSE(auth.verify_block(c));
  c = b;
  c.digest[0] ^= 1;
  EXPECT_NE(block_id(c), id);
  c = b;
  c.node = 2;  // someone else's signature
  EXPECT_FALSE(auth.verify_block(c));
  c = b;
  c.sign[0] ^= 1;
  EXPECT_FALSE(auth.verify_block(c));
}

TEST(Transactions, DoubleSpendIdentity) {
  Authenticator auth(3, 4, 4);
  UtxoTx g = make_genesis_tx(4, 100);
  UtxoTx a = pay(auth, g, 0, 1, 10);
  UtxoTx b = pay(auth, g, 0, 2, 10);
  UtxoTx c = pay(auth, g, 1, 2, 10);
  EXPECT_FALSE(is_double_spend(a, a));
  EXPECT_TRUE(is_double_spend(a, b));
  EXPECT_FALSE(is_double_spend(a, c));
  EXPECT_TRUE(auth.verify_tx(a));
  UtxoTx forged = a;
  forged.owner = 3;
  EXPECT_FALSE(auth.verify_tx(forged));
}

// ---- ledger ----

TEST(Ledger, AddsRejectsAndTracksUnspent) {
  Authenticator auth(3, 4, 4);
  UtxoTx g = make_genesis_tx(4, 100);
  UtxoLedger led({g});
  EXPECT_TRUE(led.contains(tx_hash(g)));
  EXPECT_EQ(led.unspent_of(0).size(), 1u);

  UtxoTx a = pay(auth, g, 0, 1, 30);
  UtxoTx b = pay(auth, g, 0, 2, 30);
  EXPECT_TRUE(led.has_inputs(a));
  EXPECT_FALSE(led.conflicts(a, tx_hash(a)));
  EXPECT_TRUE(led.add(a, tx_hash(a)));
  EXPECT_TRUE(led.conflicts(b, tx_hash(b)));
  EXPECT_FALSE(led.conflicts(a, tx_hash(a)));  // identical tx is no conflict
  EXPECT_TRUE(led.double_spends().empty());
  EXPECT_TRUE(led.inputs_closed());
  // change back to account 0, payment to account 1
  ASSERT_EQ(led.unspent_of(0).size(), 1u);
  EXPECT_EQ(led.unspent_of(0).front().second.value, 70u);
  EXPECT_EQ(led.unspent_of(1).size(), 2u);

  UtxoTx child = pay(auth, a, 0, 3, 5);
  UtxoLedger fresh({g});
  EXPECT_FALSE(fresh.has_inputs(child));
}

TEST(Ledger, MempoolDeduplicatesAndCaps) {
  Authenticator auth(3, 4, 4);
  UtxoTx g = make_genesis_tx(4, 100);
  Mempool m;
  UtxoTx a = pay(auth, g, 0, 1, 1), b = pay(auth, g, 1, 2, 1), c = pay(auth, g, 2, 3, 1);
  m.push(a);
  m.push(a);
  m.push(b);
  m.push(c);
  EXPECT_EQ(m.size(), 3u);
  std::unordered_set<Hash32, Hash32Hasher> seen{tx_hash(b)};
  auto p = m.payload(seen, 8);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(tx_hash(p[0]), tx_hash(a));
  EXPECT_EQ(m.payload({}, 1).size(), 1u);
  EXPECT_TRUE(Mempool{}.payload({}, 8).empty());
}

TEST(Ledger, ReadinessNeedsFastConfirmedCreatorInCone) {
  // n=4, f=1; block X includes a genesis spend `a`, block Y (later, same
  // cone) includes a child of `a`. Without certificates for `a`, the child
  // is not ready; a genesis spend always is.
  Authenticator auth(5, 4, 4);
  UtxoTx g = make_genesis_tx(4, 100);
  BlockPool pool(make_genesis(1, {g}));
  UtxoTx a = pay(auth, g, 0, 1, 40);
  UtxoTx child = pay(auth, a, 0, 2, 10);
  Block x;
  x.time = {1, 1};
  x.node = 0;
  x.refs = {pool.id(0)};
  x.txs = {a};
  auth.sign_block(x);
  BlockIndex xi = pool.intern(x);
  Block y;
  y.time = {1, 2};
  y.node = 0;
  y.refs = {pool.id(xi)};
  y.txs = {child};
  auth.sign_block(y);
  BlockIndex yi = pool.intern(y);
  TxEngine eng(pool, auth, 1);
  EXPECT_TRUE(eng.is_ready(TxRef{xi, 0}));
  EXPECT_FALSE(eng.is_ready(TxRef{yi, 0}));
  EXPECT_TRUE(eng.approves(yi, TxRef{xi, 0}));
  EXPECT_FALSE(eng.is_tx_certificate(yi, TxRef{xi, 0}));  // one author only
}

// ---- simnet ----

TEST(Simnet, UniformBelowIsUnbiasedEnough) {
  auto rng = keyed_rng(11, 2);
  std::vector<int> counts(7, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) ++counts[uniform_below(rng, 7)];
  double chi = 0;
  for (int c : counts) chi += std::pow(c - draws / 7.0, 2) / (draws / 7.0);
  EXPECT_LT(chi, 22.46);  // 6 dof, p = 0.001
}

TEST(Simnet, CommonCoinFrequenciesWithinThreeSigma) {
  const int n = 5, slots = 1000;
  LeaderOracle coin(123, n, LeaderMode::Coin, 1);
  std::vector<int> counts(n, 0);
  for (int s = 1; s <= slots; ++s) {
    auto l = coin.leader(s, 0);
    ASSERT_TRUE(l);
    EXPECT_EQ(l, coin.leader(s, 3));  // identical across viewers
    ++counts[*l];
  }
  const double p = 1.0 / n, sigma = std::sqrt(slots * p * (1 - p));
  for (int c : counts) EXPECT_LT(std::abs(c - slots * p), 3 * sigma);
}

TEST(Simnet, PreGstLeaderModes) {
  LeaderOracle none(1, 4, LeaderMode::None, 5);
  EXPECT_FALSE(none.leader(4, 0));
  EXPECT_TRUE(none.leader(5, 0));
  LeaderOracle split(1, 4, LeaderMode::Split, 5);
  bool differs = false;
  for (int s = 1; s < 5; ++s) differs |= split.leader(s, 0) != split.leader(s, 1);
  EXPECT_TRUE(differs);
  EXPECT_EQ(split.leader(7, 0), split.leader(7, 2));
}

namespace {

// Sends genesis to everyone each round and logs (from, sent, received).
class Recorder : public Participant {
 public:
  Recorder(NodeId id, int n, std::vector<std::tuple<NodeId, std::int64_t, std::int64_t>>& log,
           int f)
      : id_(id), n_(n), f_(f), log_(log) {}
  NodeId id() const override { return id_; }
  std::vector<Message> step(Timestamp now, const std::vector<Message>& inbox,
                            std::optional<NodeId>) override {
    const std::int64_t r = global_round(now, f_);
    for (const auto& m : inbox) log_.emplace_back(m.from, m.sent_round, r);
    std::vector<Message> out;
    for (NodeId v = 0; v < static_cast<NodeId>(n_); ++v)
      if (v != id_) out.push_back({id_, v, {0}, 0});
    return out;
  }
  void submit(const UtxoTx&) override {}

 private:
  NodeId id_;
  int n_;
  int f_;
  std::vector<std::tuple<NodeId, std::int64_t, std::int64_t>>& log_;
};

struct Harness {
  Trace trace;
  World world{3, 1, 1, 3, {}, nullptr};
  std::vector<std::vector<std::tuple<NodeId, std::int64_t, std::int64_t>>> logs{3};

  void run(SimConfig cfg) {
    std::vector<std::unique_ptr<Participant>> parts;
    for (NodeId v = 0; v < 3; ++v) parts.push_back(std::make_unique<Recorder>(v, 3, logs[v], 1));
    Simulator sim(world, std::move(cfg), std::move(parts), trace);
    sim.run();
  }
};

}  // namespace

TEST(Simnet, LockStepDeliversNextRound) {
  Harness h;
  SimConfig cfg;
  cfg.horizon_slots = 3;
  h.run(cfg);
  std::size_t total = 0;
  for (const auto& log : h.logs)
    for (const auto& [from, sent, got] : log) {
      EXPECT_EQ(got, sent + 1);
      ++total;
    }
  EXPECT_EQ(total, 3u * 2u * (3 * 3 - 1));  // last round's sends are never received
}

TEST(Simnet, ElssDelaysCrossPartitionUntilGst) {
  Harness h;
  SimConfig cfg;
  cfg.horizon_slots = 6;
  cfg.net.kind = NetKind::Elss;
  cfg.net.gst_slot = 3;
  cfg.net.delay = partition_policy({{0, 1}, {2}}, 0.0, 1);
  h.run(cfg);
  const std::int64_t gst = global_round({3, 1}, 1);
  for (NodeId v = 0; v < 3; ++v)
    for (const auto& [from, sent, got] : h.logs[v]) {
      const bool cross = (from == 2) != (v == 2);
      if (sent >= gst)
        EXPECT_EQ(got, sent + 1);
      else if (cross)
        EXPECT_EQ(got, gst);
      else
        EXPECT_EQ(got, sent + 1);
      EXPECT_LE(got, std::max(gst, sent + 1));
    }
}

TEST(Simnet, OverlappingGroupsLinkSharedMembers) {
  auto delay = partition_policy({{0, 1, 3}, {2, 3}}, 0.0, 1);
  const std::int64_t gst = 30;
  auto at = [&](NodeId a, NodeId b) { return delay(Message{a, b, {}, 5}, gst); };
  EXPECT_EQ(at(3, 0), 6);
  EXPECT_EQ(at(3, 2), 6);
  EXPECT_EQ(at(2, 3), 6);
  EXPECT_EQ(at(0, 2), gst);
  EXPECT_EQ(at(2, 1), gst);
  EXPECT_EQ(delay(Message{4, 0, {}, 5}, gst), gst);  // unlisted nodes reach nobody early
}

TEST(Simnet, SleepyDropsMessagesToSleepers) {
  Harness h;
  SimConfig cfg;
  cfg.horizon_slots = 4;
  cfg.net.kind = NetKind::SlotSleepy;
  cfg.net.sleep.set_asleep(2, 1);
  h.run(cfg);
  for (const auto& [from, sent, got] : h.logs[1]) {
    EXPECT_NE(time_of_round(got, 1).slot, 2);
    EXPECT_EQ(got, sent + 1);
  }
  for (NodeId v : {NodeId{0}, NodeId{2}})
    for (const auto& [from, sent, got] : h.logs[v])
      if (from == 1) EXPECT_NE(time_of_round(sent, 1).slot, 2);  // asleep: no phases
}

// ---- scenario ----

TEST(Scenario, RejectsInvalidConfigurations) {
  auto expect_invalid = [](Json j) {
    try {
      scenario_from_json(j);
      ADD_FAILURE() << "accepted " << j.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ScenarioInvalid) << j.dump();
    }
  };
  Json base{{"schema_version", 1}, {"n", 4}, {"f", 1}, {"model", "lockstep"}};
  EXPECT_NO_THROW(scenario_from_json(base));
  Json j = base;
  j["n"] = 2;
  expect_invalid(j);
  j = base;
  j["schema_version"] = 99;
  expect_invalid(j);
  j = base;
  j["adversary"] = {{{"node", 0}, {"kind", "crash"}}, {{"node", 1}, {"kind", "crash"}}};
  expect_invalid(j);
  j = base;
  j["adversary"] = {{{"node", 0}, {"kind", "teleport"}}};
  expect_invalid(j);
  j = base;
  j["model"] = "elss";
  j["n"] = 3;
  expect_invalid(j);
  // explicit sleep schedule with every correct node asleep in slot 2
  Json ss{{"schema_version", 1}, {"n", 5}, {"f", 2}, {"model", "slot-sleepy"},
          {"horizon_slots", 3},   {"sleep", {{"kind", "explicit"}, {"asleep", {{"2", {0, 1, 2}}}}}},
          {"adversary", {{{"node", 3}, {"kind", "crash"}}}}};
  expect_invalid(ss);
  ss["sleep"]["asleep"]["2"] = {0, 1};
  EXPECT_NO_THROW(scenario_from_json(ss));
}

TEST(Scenario, JsonRoundTrip) {
  Scenario s = load_scenario(std::string(SLIPSTREAM_SCENARIO_DIR) + "/ss-adversarial-sleep.json");
  Scenario t = scenario_from_json(scenario_to_json(s));
  EXPECT_EQ(scenario_to_json(s), scenario_to_json(t));
  EXPECT_EQ(s.byzantine(), (std::set<NodeId>{3, 4}));
}

TEST(Scenario, AdversarialSleepAwakeCounts) {
  Scenario s = load_scenario(std::string(SLIPSTREAM_SCENARIO_DIR) + "/ss-adversarial-sleep.json");
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    s.seed = seed;
    auto sched = resolve_sleep(s);
    for (std::int64_t slot = 1; slot <= s.horizon_slots; ++slot) {
      int byz = 0, cor = 0;
      for (NodeId v = 0; v < 5; ++v) {
        if (!sched.awake(slot, v)) continue;
        (v >= 3 ? byz : cor) += 1;
      }
      EXPECT_EQ(cor, byz + 1) << "slot " << slot;
    }
  }
}

// ---- trace ----

TEST(Trace, JsonlRoundTripKeepsHash) {
  Scenario s = load_scenario(std::string(SLIPSTREAM_SCENARIO_DIR) + "/payments-fast.json");
  s.horizon_slots = 4;
  auto run = run_scenario(s);
  std::istringstream in(run.trace.to_jsonl());
  Trace back = Trace::from_jsonl(in);
  EXPECT_EQ(hex(back.hash()), run.hash);
  EXPECT_EQ(back.events().size(), run.trace.events().size());
}

TEST(Checkers, PrefixHelper) {
  using V = std::vector<std::string>;
  EXPECT_TRUE(is_prefix(V{}, V{"a"}));
  EXPECT_TRUE(is_prefix(V{"a"}, V{"a", "b"}));
  EXPECT_FALSE(is_prefix(V{"b"}, V{"a", "b"}));
  EXPECT_FALSE(is_prefix(V{"a", "b"}, V{"a"}));
}

TEST(Checkers, MeanStats) {
  auto m = mean_stats({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.std_err, std::sqrt(5.0 / 3.0 / 4.0), 1e-12);
}
