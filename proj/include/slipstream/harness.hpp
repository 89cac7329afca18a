#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "slipstream/adversary.hpp"
#include "slipstream/simnet.hpp"
#include "slipstream/trace.hpp"

namespace slipstream {

inline constexpr int kSchemaVersion = 1;

// ---- scenario ----

struct SleepSpec {
  std::string kind = "none";  // none | random | adversarial | explicit
  double p_sleep = 0.2;       // random
  std::map<std::int64_t, std::set<NodeId>> asleep;  // explicit: slot -> nodes
};

struct AdversarySpec {
  NodeId node = 0;
  std::string kind;  // crash | withhold | selective-send | equivocate | digest-split
  std::int64_t from_round = 1;
  std::int64_t to_round = -1;
  std::vector<NodeId> targets;
  std::vector<std::int64_t> rounds;  // equivocate: explicit rounds
  std::int64_t every = 0;            // equivocate: every k-th round
  std::vector<std::vector<NodeId>> groups;  // digest-split
};

struct WorkloadSpec {
  std::string kind;  // cautious | double-spend | split-broadcast
  std::vector<AccountId> accounts;  // cautious
  std::optional<NodeId> node;       // cautious: tracked node (default: first correct)
  std::int64_t start_round = 1;
  std::int64_t stop_round = -1;     // -1: until horizon
  std::int64_t every = 1;
  AccountId account = 0;            // double spend
  std::int64_t round = 1;
  std::vector<NodeId> targets_a;
  std::vector<NodeId> targets_b;
};

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name = "unnamed";
  int n = 4;
  int f = 1;
  NetKind model = NetKind::LockStep;
  std::int64_t gst_slot = 1;
  std::int64_t horizon_slots = 10;
  std::uint64_t seed = 1;
  LeaderMode leader_mode = LeaderMode::Coin;
  std::uint32_t accounts = 0;  // 0: one per node
  std::uint64_t initial_balance = 1000;
  std::size_t tx_cap = kDefaultTxCap;
  SleepSpec sleep;
  std::vector<std::vector<NodeId>> partition;
  double partition_jitter = 0.0;
  std::vector<AdversarySpec> adversary;
  std::vector<WorkloadSpec> workload;

  std::set<NodeId> byzantine() const;
  std::uint32_t account_count() const { return accounts ? accounts : static_cast<std::uint32_t>(n); }
};

Scenario scenario_from_json(const Json& j);
Json scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::string& path);
// Throws ScenarioInvalid.
void validate(const Scenario& s);
// Sleep schedule for the run; validated against the awake-majority rule.
SleepSchedule resolve_sleep(const Scenario& s);

// ---- runs ----

struct RunResult {
  Trace trace;
  std::string hash;
};

RunResult run_scenario(const Scenario& s);

// Honest payer: only spends outputs its tracked node has confirmed, one
// tx in flight per account.
class CautiousClient : public Client {
 public:
  CautiousClient(WorkloadSpec spec, NodeId tracked);
  void tick(std::int64_t round, Timestamp now, Simulator& sim) override;

 private:
  WorkloadSpec spec_;
  NodeId tracked_;
  std::map<AccountId, Hash32> in_flight_;
};

// ---- checkers ----

struct Violation {
  std::int64_t round = 0;
  std::vector<std::int64_t> nodes;
  std::string detail;
};

struct PropertyReport {
  std::string property;
  bool applicable = true;
  bool pass = true;
  std::uint64_t checked = 0;  // number of individual assertions evaluated
  std::uint64_t violations = 0;
  std::optional<Violation> first;
  Json metrics = Json::object();
  Json reproducer = Json::object();

  void fail(std::int64_t round, std::vector<std::int64_t> nodes, std::string detail);
  Json to_json() const;
};

// Parsed view of a run trace. Everything the checkers need comes from here.
class TraceIndex {
 public:
  explicit TraceIndex(const Trace& t);

  struct BlockInfo {
    std::int64_t node = 0;
    std::int64_t slot = 0;
    std::int64_t round = 0;  // global round
    std::vector<std::string> txs;
  };
  struct RegEntry {
    std::string parent;
    std::int64_t slot = 0;
    std::vector<std::string> fresh;
  };
  struct SlotDigests {
    std::optional<std::string> entry;
    std::optional<std::string> exit;
  };
  struct TxInfo {
    std::string kind;
    std::int64_t round = 0;
    std::vector<std::string> inputs;
    std::optional<std::int64_t> group;
  };
  struct ConfirmInfo {
    std::int64_t round = 0;
    std::string path;
  };

  int n = 0;
  int f = 0;
  std::string model;
  std::int64_t gst_slot = 1;
  std::int64_t horizon_slots = 0;
  std::int64_t last_round = 0;
  std::set<std::int64_t> correct;
  std::map<std::int64_t, std::set<std::int64_t>> asleep;
  Json header;

  std::map<std::string, BlockInfo> blocks;
  std::map<std::string, RegEntry> registry;
  // node -> slot -> digests
  std::map<std::int64_t, std::map<std::int64_t, SlotDigests>> slots;
  // node -> [(round, final digest)]
  std::map<std::int64_t, std::vector<std::pair<std::int64_t, std::string>>> finals;
  // node -> [(round, tau, s_pre)]
  std::map<std::int64_t, std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t>>> final_times;
  // node -> tx -> first confirmation
  std::map<std::int64_t, std::map<std::string, ConfirmInfo>> confirms;
  std::map<std::string, TxInfo> txs;
  std::vector<Event> ledger_violations;
  std::vector<Event> validity_violations;
  std::map<std::int64_t, std::uint64_t> validity_checks;  // node -> count (summary)

  bool is_correct(std::int64_t v) const { return correct.count(v) != 0; }
  bool awake(std::int64_t slot, std::int64_t v) const;
  std::int64_t rounds_per_slot() const { return f + 2; }
  std::int64_t round_of(std::int64_t slot, std::int64_t i) const { return (slot - 1) * (f + 2) + i; }

  // Committed sequence of a digest; zero digest gives the empty sequence.
  const std::vector<std::string>& order_of(const std::string& digest) const;
  bool commits(const std::string& digest, const std::string& block) const;
  // Final digest held by `node` after its update in `round`.
  std::string final_at(std::int64_t node, std::int64_t round) const;
  // First slot >= GST slot where every correct node enters with one digest.
  std::optional<std::int64_t> s_same() const;

 private:
  mutable std::map<std::string, std::vector<std::string>> order_cache_;
  std::map<std::string, std::vector<std::string>> fresh_in_;  // block -> digests listing it fresh
};

bool is_prefix(const std::vector<std::string>& a, const std::vector<std::string>& b);

PropertyReport check_order_own_safety(const TraceIndex& t);
PropertyReport check_order_own_liveness(const TraceIndex& t);
PropertyReport check_same_sc(const TraceIndex& t);
PropertyReport check_order_final_safety(const TraceIndex& t);
PropertyReport check_order_final_liveness(const TraceIndex& t);
PropertyReport check_ledger_safety(const TraceIndex& t);
PropertyReport check_ledger_consistency(const TraceIndex& t);
PropertyReport check_fast_latency(const TraceIndex& t);
PropertyReport check_unlock(const TraceIndex& t);
PropertyReport check_validity(const TraceIndex& t);

// Every checker, keyed by property name.
std::vector<std::string> property_names();
PropertyReport run_checker(const std::string& name, const TraceIndex& t);
std::vector<PropertyReport> check_all(const Trace& t, const std::vector<std::string>& names = {});
bool all_pass(const std::vector<PropertyReport>& reports);

// ---- sweeps ----

struct SweepSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<std::optional<std::int64_t>> s_same_minus_gst;
  std::map<std::string, std::uint64_t> failures;  // property -> failing seeds
  Json to_json() const;
};

SweepSummary sweep(const Scenario& base, std::uint64_t from_seed, std::uint64_t to_seed,
                   const std::vector<std::string>& properties = {});

struct MeanStats {
  std::size_t count = 0;
  double mean = 0;
  double std_err = 0;
};
MeanStats mean_stats(const std::vector<double>& xs);

}  // namespace slipstream
