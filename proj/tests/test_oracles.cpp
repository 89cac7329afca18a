#include <gtest/gtest.h>

#include "oracle_suite.hpp"

using namespace slipstream;
using namespace slipstream::testing;

TEST(Oracles, ThousandRandomDagsAgree) {
  auto st = run_oracle_suite(1, 1000);
  EXPECT_EQ(st.dags, 1000u);
  for (const char* what : {"reachability", "reach_number", "tips", "concat_order",
                           "digest_certificate", "tx_certificate"}) {
    EXPECT_GT(st.checks[what], 0u) << what;
    EXPECT_EQ(st.mismatches[what], 0u) << what << ": " << st.first_mismatch;
  }
}

TEST(Oracles, GeneratorProducesInterestingCases) {
  // Guard against a generator that never yields positive certificates.
  std::uint64_t dcs = 0, tcs = 0, equivocations = 0;
  for (std::uint64_t s = 0; s < 300; ++s) {
    auto g = make_random_dag(s);
    TxEngine eng(*g.pool, *g.auth, g.f);
    for (BlockIndex a = 1; a < g.pool->size(); ++a) {
      if (digest_certificate(*g.pool, g.book, a, g.f)) ++dcs;
      for (std::uint32_t p = 0; p < g.pool->block(a).txs.size(); ++p)
        for (BlockIndex c = a; c < g.pool->size(); ++c)
          if (eng.is_tx_certificate(c, TxRef{a, p})) ++tcs;
    }
    BlockSet all;
    for (BlockIndex b = 0; b < g.pool->size(); ++b) all.set(b);
    equivocations += popcount(detect_equivocations(*g.pool, all).mask);
  }
  EXPECT_GT(dcs, 50u);
  EXPECT_GT(tcs, 50u);
  EXPECT_GT(equivocations, 10u);
}

TEST(Oracles, HandBuiltDagReachNumber) {
  // n=4, f=1. Round 1 of slot 1: nodes 0..2 reference genesis. Round 2:
  // node 3 references the blocks of nodes 0 and 1 only.
  Authenticator auth(1, 4, 4);
  BlockPool pool(make_genesis(1, {}));
  auto add = [&](NodeId node, std::int32_t round, std::vector<BlockIndex> refs) {
    Block b;
    b.time = {1, round};
    b.node = node;
    for (auto r : refs) b.refs.push_back(pool.id(r));
    std::sort(b.refs.begin(), b.refs.end());
    auth.sign_block(b);
    return pool.intern(std::move(b));
  };
  BlockIndex a0 = add(0, 1, {0}), a1 = add(1, 1, {0}), a2 = add(2, 1, {0});
  BlockIndex b3 = add(3, 2, {a0, a1});
  EXPECT_EQ(reach_number(pool, a0, b3), 2);  // a0 itself and b3
  EXPECT_EQ(reach_number(pool, a2, b3), 0);
  EXPECT_EQ(reach_number(pool, 0, b3), 3);   // a0, a1, b3
  EXPECT_TRUE(is_reachable(pool, b3, a1));
  EXPECT_FALSE(is_reachable(pool, b3, a2));
  BlockSet all;
  for (BlockIndex b : {BlockIndex{0}, a0, a1, a2, b3}) all.set(b);
  auto t = tips(pool, all);
  std::sort(t.begin(), t.end());
  EXPECT_EQ(t, (std::vector<BlockIndex>{a2, b3}));
  EXPECT_FALSE(is_quorum(pool, {a0, a1}, 1));
  EXPECT_TRUE(is_quorum(pool, {a0, a1, b3}, 1));
}
