// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "oracle_suite.hpp"
#include "slipstream/harness.hpp"

using namespace slipstream;

namespace {

Scenario bundled(const std::string& name) {
  return load_scenario(std::string(SLIPSTREAM_SCENARIO_DIR) + "/" + name + ".json");
}

std::vector<std::string> bundled_names() {
  return {"ss-basic",       "ss-adversarial-sleep", "elss-partition",    "elss-digest-split",
          "payments-fast",  "payments-doublespend-lock", "equivocation-storm"};
}

// Tally of one property over many traces.
struct Tally {
  std::uint64_t traces = 0;
  std::uint64_t checks = 0;
  std::uint64_t failing = 0;
  std::string first;

  void add(const PropertyReport& r, const std::string& where) {
    ++traces;
    checks += r.checked;
    if (!r.pass) {
      if (failing++ == 0)
        first = where + ": " + (r.first ? "round " + std::to_string(r.first->round) + " " +
                                              r.first->detail
                                        : std::string("no detail"));
    }
  }
  bool ok() const { return failing == 0 && checks > 0; }
  std::string text() const {
    std::ostringstream o;
    o << traces << " traces, " << checks << " checks, " << failing << " failing";
    if (failing) o << "; first " << first;
    return o.str();
  }
};

bool all_ok = true;

void verdict(int k, bool pass, const std::string& what, const std::string& detail) {
  all_ok = all_ok && pass;
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << k << ": " << what << " (" << detail
            << ")" << std::endl;
}

// ---- trace mutations for the checker self-tests ----

const std::string kForged(64, 'e');

// Index, not pointer: mutations append events afterwards.
std::optional<std::size_t> find_event(const Trace& t, const std::function<bool(const Event&)>& pred) {
  for (std::size_t i = 0; i < t.events().size(); ++i)
    if (pred(t.events()[i])) return i;
  return std::nullopt;
}

// Registers a digest that forks off `base` (same parent, an extra block in front)
// so its ordering is not prefix-comparable with the one of `base`.
std::string forge_fork(Trace& t, const std::string& base, std::int64_t round) {
  TraceIndex idx(t);
  const auto& r = idx.registry.at(base);
  Json fresh = Json::array({std::string(64, 'b')});
  for (const auto& b : r.fresh) fresh.push_back(b);
  t.emit(round, -1, "registry",
         {{"digest", kForged}, {"parent", r.parent}, {"slot", r.slot}, {"fresh", fresh}});
  return kForged;
}

bool mutate_exit_fork(Trace& t, std::int64_t min_slot) {
  TraceIndex idx(t);
  auto i = find_event(t, [&](const Event& ev) {
    return ev.type == "slot-exit" && idx.is_correct(ev.node) &&
           ev.payload.at("slot").get<std::int64_t>() >= min_slot &&
           !idx.registry.at(ev.payload.at("digest")).fresh.empty();
  });
  if (!i) return false;
  Event& e = t.events()[*i];
  std::string base = e.payload.at("digest");
  std::int64_t round = e.round;
  std::string forged = forge_fork(t, base, round);
  t.events()[*i].payload["digest"] = forged;
  return true;
}

bool mutate_finalize_fork(Trace& t) {
  TraceIndex idx(t);
  auto i = find_event(t, [&](const Event& ev) {
    return ev.type == "finalize" && idx.is_correct(ev.node) &&
           idx.registry.count(ev.payload.at("digest")) &&
           !idx.registry.at(ev.payload.at("digest")).fresh.empty();
  });
  if (!i) return false;
  Event& e = t.events()[*i];
  std::string base = e.payload.at("digest");
  std::int64_t round = e.round;
  std::string forged = forge_fork(t, base, round);
  t.events()[*i].payload["digest"] = forged;
  return true;
}

// Removes one correct block of `slot` from every ordering.
bool mutate_drop_block(Trace& t, std::int64_t slot) {
  TraceIndex idx(t);
  std::string victim;
  for (const auto& [id, b] : idx.blocks)
    if (idx.is_correct(b.node) && b.slot == slot) {
      victim = id;
      break;
    }
  if (victim.empty()) return false;
  bool hit = false;
  for (auto& e : t.events()) {
    if (e.type != "registry") continue;
    Json kept = Json::array();
    for (const auto& x : e.payload.at("fresh"))
      if (x != victim) kept.push_back(x);
      else hit = true;
    e.payload["fresh"] = kept;
  }
  return hit;
}

bool mutate_conflicting_confirm(Trace& t) {
  TraceIndex idx(t);
  for (const auto& [node, confs] : idx.confirms) {
    if (!idx.is_correct(node)) continue;
    for (const auto& [tx, info] : confs) {
      auto it = idx.txs.find(tx);
      if (it == idx.txs.end() || it->second.inputs.empty()) continue;
      const std::string twin(64, 'c');
      Json inputs = Json::array();
      for (const auto& in : it->second.inputs) inputs.push_back(in);
      t.emit(info.round, -1, "tx",
             {{"tx", twin}, {"kind", "cautious"}, {"client", 0}, {"inputs", inputs},
              {"targets", Json::array()}});
      t.emit(info.round + 1, node, "confirm", {{"tx", twin}, {"path", "consensus-2"}});
      return true;
    }
  }
  return false;
}

// Drops one correct node's confirmation of an early fast-confirmed tx.
bool mutate_forget_fast_confirm(Trace& t) {
  TraceIndex idx(t);
  auto& ev = t.events();
  for (auto it = ev.begin(); it != ev.end(); ++it)
    if (it->type == "confirm" && idx.is_correct(it->node) && it->payload.at("path") == "fast" &&
        it->round < idx.last_round / 2) {
      ev.erase(it);
      return true;
    }
  return false;
}

bool mutate_delay_confirm(Trace& t) {
  TraceIndex idx(t);
  auto i = find_event(t, [&](const Event& ev) {
    if (ev.type != "confirm" || !idx.is_correct(ev.node)) return false;
    auto it = idx.txs.find(ev.payload.at("tx"));
    return it != idx.txs.end() && it->second.kind == "cautious";
  });
  if (!i) return false;
  t.events()[*i].round += 4;
  return true;
}

bool mutate_forget_group_confirm(Trace& t) {
  TraceIndex idx(t);
  auto& ev = t.events();
  for (auto it = ev.begin(); it != ev.end(); ++it) {
    if (it->type != "confirm" || !idx.is_correct(it->node)) continue;
    auto tx = idx.txs.find(it->payload.at("tx"));
    if (tx != idx.txs.end() && tx->second.group) {
      ev.erase(it);
      return true;
    }
  }
  return false;
}

bool mutate_validity(Trace& t) {
  TraceIndex idx(t);
  std::int64_t v = *idx.correct.begin();
  t.emit(idx.last_round, v, "validity-violation", {{"rule", "DV2"}, {"block", kForged}});
  return true;
}

}  // namespace

int main() {
  Tally same_sc, valid_dag, final_live;

  auto track_common = [&](const TraceIndex& idx, const std::string& where) {
    same_sc.add(check_same_sc(idx), where);
    valid_dag.add(check_validity(idx), where);
  };

  // 1. sleepy model safety and liveness
  {
    Tally safety, liveness;
    for (const char* name : {"ss-basic", "ss-adversarial-sleep"}) {
      Scenario s = bundled(name);
      for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        s.seed = seed;
        auto run = run_scenario(s);
        TraceIndex idx(run.trace);
        std::string where = std::string(name) + " seed " + std::to_string(seed);
        safety.add(check_order_own_safety(idx), where);
        liveness.add(check_order_own_liveness(idx), where);
        track_common(idx, where);
      }
    }
    verdict(1, safety.ok() && liveness.ok(), "optimistic ordering safety and liveness, sleepy model",
            "safety " + safety.text() + "; liveness " + liveness.text());
  }

  // 3 and 5 share the partition traces; 4 sweeps its own 200 seeds.
  Tally final_safety;
  for (const char* name : {"elss-partition", "elss-digest-split"}) {
    Scenario s = bundled(name);
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      s.seed = seed;
      auto run = run_scenario(s);
      TraceIndex idx(run.trace);
      std::string where = std::string(name) + " seed " + std::to_string(seed);
      final_safety.add(check_order_final_safety(idx), where);
      final_live.add(check_order_final_liveness(idx), where);
      track_common(idx, where);
    }
  }

  std::vector<double> gaps;
  std::uint64_t never_synced = 0;
  {
    Scenario s = bundled("elss-partition");
    for (std::uint64_t seed = 1001; seed <= 1200; ++seed) {
      s.seed = seed;
      auto run = run_scenario(s);
      TraceIndex idx(run.trace);
      std::string where = "elss-partition seed " + std::to_string(seed);
      auto same = idx.s_same();
      if (same) gaps.push_back(static_cast<double>(*same - idx.gst_slot));
      else ++never_synced;
      final_safety.add(check_order_final_safety(idx), where);
      final_live.add(check_order_final_liveness(idx), where);
      track_common(idx, where);
    }
  }

  // Bundled payment and storm scenarios feed 2 and 7 as well.
  std::map<std::string, std::vector<PropertyReport>> bundled_reports;
  std::map<std::string, Trace> bundled_traces;
  for (const auto& name : bundled_names()) {
    auto run = run_scenario(bundled(name));
    TraceIndex idx(run.trace);
    track_common(idx, name);
    bundled_reports[name] = check_all(run.trace);
    bundled_traces[name] = run.trace;
  }

  verdict(2, same_sc.ok(), "equal entry digests give equal exit digests after GST", same_sc.text());
  verdict(3, final_safety.ok(), "final ordering prefix safety, partition and digest split",
          final_safety.text());

  {
    const int n = bundled("elss-partition").n;
    auto st = mean_stats(gaps);
    const double p = 1.0 / n;
    const double geo_sd = std::sqrt(2 * (1 - p) / (p * p));
    const double geo_margin = 3 * geo_sd / std::sqrt(static_cast<double>(gaps.size()));
    bool pass = never_synced == 0 && gaps.size() >= 200 && st.mean <= 2 * n + 3 * st.std_err &&
                st.mean <= 2 * n + geo_margin;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%zu seeds, mean %.3f, std err %.3f, bound %d + %.3f, two-geometric margin %.3f, "
                  "unsynced %llu",
                  gaps.size(), st.mean, st.std_err, 2 * n, 3 * st.std_err, geo_margin,
                  static_cast<unsigned long long>(never_synced));
    verdict(4, pass, "expected synchronisation slot after GST", buf);
  }

  verdict(5, final_live.ok(), "final ordering latency after synchronisation", final_live.text());

  {
    auto prop = [&](const std::string& scen, const std::string& name) -> const PropertyReport& {
      for (const auto& r : bundled_reports.at(scen))
        if (r.property == name) return r;
      throw std::runtime_error("missing property " + name);
    };
    Tally fast, safety, consistency, unlock;
    fast.add(prop("payments-fast", "fast-latency"), "payments-fast");
    for (const char* scen : {"payments-fast", "payments-doublespend-lock", "equivocation-storm"}) {
      safety.add(prop(scen, "ledger-safety"), scen);
      consistency.add(prop(scen, "ledger-consistency"), scen);
    }
    unlock.add(prop("payments-doublespend-lock", "double-spend-unlock"), "payments-doublespend-lock");
    verdict(6, fast.ok() && safety.ok() && consistency.ok() && unlock.ok(),
            "payments: fast path latency, ledger safety and consistency, double-spend unlock",
            "latency " + fast.text() + "; safety " + safety.text() + "; consistency " +
                consistency.text() + "; unlock " + unlock.text());
  }

  verdict(7, valid_dag.ok(), "own cone is a valid DAG after every update", valid_dag.text());

  {
    auto st = testing::run_oracle_suite(7, 1000);
    std::uint64_t checks = 0, bad = 0;
    for (const auto& [k, v] : st.checks) checks += v;
    for (const auto& [k, v] : st.mismatches) bad += v;
    bool covered = st.checks.size() == 6;
    for (const auto& [k, v] : st.checks) covered = covered && v > 0;
    verdict(8, st.dags >= 1000 && covered && st.clean(),
            "DAG primitives agree with brute-force oracles",
            std::to_string(st.dags) + " DAGs, " + std::to_string(checks) + " checks, " +
                std::to_string(bad) + " mismatches" +
                (st.first_mismatch.empty() ? "" : "; first " + st.first_mismatch));
  }

  {
    std::uint64_t equal = 0;
    std::string bad;
    for (const auto& name : bundled_names()) {
      auto again = run_scenario(bundled(name));
      std::istringstream text(again.trace.to_jsonl());
      Trace reread = Trace::from_jsonl(text);
      if (hex(bundled_traces.at(name).hash()) == again.hash && hex(reread.hash()) == again.hash)
        ++equal;
      else if (bad.empty())
        bad = name;
    }
    verdict(9, bad.empty(), "same scenario and seed give the same trace hash",
            std::to_string(equal) + "/" + std::to_string(bundled_names().size()) + " scenarios" +
                (bad.empty() ? "" : "; differs: " + bad));
  }

  {
    struct Fixture {
      std::string property;
      std::string scenario;
      std::string mutation;
      std::function<bool(Trace&)> mutate;
    };
    std::vector<Fixture> fixtures{
        {"order-own-safety", "ss-basic", "forked exit digest",
         [](Trace& t) { return mutate_exit_fork(t, 2); }},
        {"order-own-liveness", "ss-basic", "block dropped from orderings",
         [](Trace& t) { return mutate_drop_block(t, 3); }},
        {"same-sc", "elss-partition", "forked exit digest after GST",
         [](Trace& t) { return mutate_exit_fork(t, TraceIndex(t).gst_slot + 1); }},
        {"order-final-safety", "elss-partition", "forked final digest", mutate_finalize_fork},
        {"order-final-liveness", "elss-partition", "post-GST block dropped from orderings",
         [](Trace& t) { return mutate_drop_block(t, TraceIndex(t).gst_slot + 5); }},
        {"ledger-safety", "payments-fast", "conflicting confirmation injected",
         mutate_conflicting_confirm},
        {"ledger-consistency", "payments-fast", "fast confirmation removed at one node",
         mutate_forget_fast_confirm},
        {"fast-latency", "payments-fast", "confirmation delayed", mutate_delay_confirm},
        {"double-spend-unlock", "payments-doublespend-lock", "resolution removed at one node",
         mutate_forget_group_confirm},
        {"valid-dag", "equivocation-storm", "validity violation injected", mutate_validity},
    };
    std::uint64_t caught = 0;
    std::string missed;
    for (const auto& fx : fixtures) {
      Trace t = bundled_traces.at(fx.scenario);
      bool clean = run_checker(fx.property, TraceIndex(t)).pass;
      bool applied = fx.mutate(t);
      bool flagged = applied && !run_checker(fx.property, TraceIndex(t)).pass;
      std::cout << "  self-test " << fx.property << " on " << fx.scenario << " (" << fx.mutation
                << "): original " << (clean ? "passes" : "FAILS") << ", mutated "
                << (!applied ? "NOT APPLIED" : flagged ? "flagged" : "NOT FLAGGED") << "\n";
      if (clean && flagged) ++caught;
      else if (missed.empty()) missed = fx.property;
    }
    verdict(10, caught == fixtures.size(), "every checker flags its injected violation",
            std::to_string(caught) + "/" + std::to_string(fixtures.size()) + " caught" +
                (missed.empty() ? "" : "; missed " + missed));
  }

  return all_ok ? 0 : 1;
}
