#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "slipstream/harness.hpp"

using namespace slipstream;

namespace {

std::vector<Scenario> bundled() {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(SLIPSTREAM_SCENARIO_DIR))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Scenario> out;
  for (const auto& p : files) out.push_back(load_scenario(p.string()));
  return out;
}

std::set<std::int64_t> correct_of(const Trace& t) {
  std::set<std::int64_t> out;
  for (auto v : t.events().front().payload.at("correct")) out.insert(v.get<std::int64_t>());
  return out;
}

}  // namespace

TEST(Properties, BundledScenariosPassEveryChecker) {
  auto all = bundled();
  ASSERT_EQ(all.size(), 7u);
  for (const auto& s : all) {
    auto run = run_scenario(s);
    for (const auto& r : check_all(run.trace))
      EXPECT_TRUE(r.pass) << s.name << " " << r.property << ": "
                          << (r.first ? r.first->detail : std::string());
  }
}

TEST(Properties, CorrectNodesAreNeverFlaggedAsEquivocators) {
  for (const auto& s : bundled()) {
    auto run = run_scenario(s);
    auto correct = correct_of(run.trace);
    for (const auto& e : run.trace.events())
      if (e.type == "eq-detect")
        EXPECT_FALSE(correct.count(e.payload.at("equivocator").get<std::int64_t>())) << s.name;
  }
}

TEST(Properties, SleepyRunsNeverRaiseTheElssIndicator) {
  for (const char* name : {"ss-basic", "ss-adversarial-sleep"}) {
    Scenario s = load_scenario(std::string(SLIPSTREAM_SCENARIO_DIR) + "/" + name + ".json");
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      s.seed = seed;
      auto run = run_scenario(s);
      auto correct = correct_of(run.trace);
      for (const auto& e : run.trace.events()) {
        if (!correct.count(e.node)) continue;
        EXPECT_NE(e.type, "elss-flag") << name << " seed " << seed << " round " << e.round;
        if (e.type == "slot-entry") EXPECT_FALSE(e.payload.at("elss").get<bool>());
      }
    }
  }
}

TEST(Properties, EquivocatorEntersEveryCorrectEqSet) {
  Scenario s = load_scenario(std::string(SLIPSTREAM_SCENARIO_DIR) + "/equivocation-storm.json");
  auto run = run_scenario(s);
  std::set<std::int64_t> detected;
  for (const auto& e : run.trace.events())
    if (e.type == "eq-detect" && e.payload.at("equivocator") == 3) detected.insert(e.node);
  EXPECT_EQ(detected, correct_of(run.trace));
  for (const auto& e : run.trace.events())
    if (e.type == "summary" && e.payload.at("correct").get<bool>())
      EXPECT_TRUE(e.payload.at("eq_mask").get<std::uint64_t>() & (1u << 3));
}

TEST(Properties, DigestSplitFormsTwoCampsAndRaisesIndicator) {
  Scenario s = load_scenario(std::string(SLIPSTREAM_SCENARIO_DIR) + "/elss-digest-split.json");
  auto run = run_scenario(s);
  TraceIndex t(run.trace);
  for (std::int64_t slot = 3; slot < s.gst_slot; ++slot) {
    std::set<std::string> exits;
    for (auto v : t.correct)
      if (auto d = t.slots.at(v).at(slot).exit) exits.insert(*d);
    EXPECT_EQ(exits.size(), 2u) << "slot " << slot;
    EXPECT_EQ(t.slots.at(0).at(slot).exit, t.slots.at(1).at(slot).exit);
  }
  std::set<std::int64_t> flagged;
  for (const auto& e : run.trace.events())
    if (e.type == "elss-flag" && t.is_correct(e.node)) {
      flagged.insert(e.node);
      EXPECT_GE(e.round, t.round_of(s.gst_slot, 1));
    }
  EXPECT_EQ(flagged, t.correct);
}

TEST(Properties, CrashedByzantineStillLetsElssFinalize) {
  Scenario s = load_scenario(std::string(SLIPSTREAM_SCENARIO_DIR) + "/elss-partition.json");
  auto run = run_scenario(s);
  TraceIndex t(run.trace);
  for (auto v : t.correct) {
    ASSERT_TRUE(t.finals.count(v));
    EXPECT_GE(t.finals.at(v).size(), static_cast<std::size_t>(s.horizon_slots - s.gst_slot - 4));
  }
}

TEST(Properties, ConfirmationsAreIdempotent) {
  for (const char* name : {"payments-fast", "payments-doublespend-lock", "equivocation-storm"}) {
    Scenario s = load_scenario(std::string(SLIPSTREAM_SCENARIO_DIR) + "/" + name + ".json");
    auto run = run_scenario(s);
    std::set<std::pair<std::int64_t, std::string>> seen;
    for (const auto& e : run.trace.events())
      if (e.type == "confirm")
        EXPECT_TRUE(seen.emplace(e.node, e.payload.at("tx").get<std::string>()).second) << name;
    EXPECT_FALSE(seen.empty());
  }
}

TEST(Properties, DoubleSpendResolvedByConsensusPathOnly) {
  Scenario s = load_scenario(std::string(SLIPSTREAM_SCENARIO_DIR) + "/payments-doublespend-lock.json");
  auto run = run_scenario(s);
  TraceIndex t(run.trace);
  std::map<std::int64_t, std::set<std::string>> groups;
  for (const auto& [tx, info] : t.txs)
    if (info.group) groups[*info.group].insert(tx);
  ASSERT_EQ(groups.size(), 2u);
  for (const auto& [g, members] : groups)
    for (auto v : t.correct) {
      int held = 0;
      for (const auto& tx : members)
        if (auto it = t.confirms.at(v).find(tx); it != t.confirms.at(v).end()) {
          ++held;
          EXPECT_NE(it->second.path, "fast");  // neither half can be certified
        }
      EXPECT_EQ(held, 1);
    }
}

TEST(Properties, DeterministicTraceHash) {
  for (const auto& s : bundled()) {
    auto a = run_scenario(s);
    auto b = run_scenario(s);
    EXPECT_EQ(a.hash, b.hash) << s.name;
    Scenario other = s;
    other.seed = s.seed + 1;
    EXPECT_NE(run_scenario(other).hash, a.hash) << s.name;
  }
}

TEST(Properties, BytesAreAccounted) {
  Scenario s = load_scenario(std::string(SLIPSTREAM_SCENARIO_DIR) + "/payments-fast.json");
  auto run = run_scenario(s);
  const auto& last = run.trace.events().back();
  ASSERT_EQ(last.type, "run-end");
  EXPECT_GT(last.payload.at("bytes_sent").get<std::uint64_t>(), 0u);
}
