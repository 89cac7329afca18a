#include <algorithm>

#include "slipstream/harness.hpp"

namespace slipstream {

CautiousClient::CautiousClient(WorkloadSpec spec, NodeId tracked)
    : spec_(std::move(spec)), tracked_(tracked) {}

void CautiousClient::tick(std::int64_t round, Timestamp, Simulator& sim) {
  if (round < spec_.start_round) return;
  if (spec_.stop_round >= 0 && round > spec_.stop_round) return;
  if ((round - spec_.start_round) % spec_.every != 0) return;
  const Node* view = sim.participant(tracked_).view();
  if (!view) return;
  World& w = sim.world();
  for (AccountId acct : spec_.accounts) {
    if (auto it = in_flight_.find(acct); it != in_flight_.end()) {
      if (!view->ledger().contains(it->second)) continue;
      in_flight_.erase(it);
    }
    // Readiness in the next block needs the creator fast-confirmed in its cone.
    auto outs = view->ledger().unspent_of(acct);
    auto usable = std::find_if(outs.begin(), outs.end(), [&](const auto& o) {
      return o.second.value >= 1 && (w.txs.is_genesis_tx(o.first.tx) ||
                                     w.txs.confirmed_in_cone(o.first.tx, view->own_block()));
    });
    if (usable == outs.end()) continue;
    const auto& [id, out] = *usable;
    AccountId to = (acct + 1) % w.auth.accounts();
    UtxoTx tx = make_payment(w.auth, id, out, to, 1);
    Hash32 h = tx_hash(tx);
    in_flight_[acct] = h;
    sim.submit(tracked_, tx);
    w.emit(-1, "tx",
           {{"tx", hex(h)},
            {"kind", "cautious"},
            {"client", acct},
            {"inputs", {hex(id.tx) + ":" + std::to_string(id.index)}},
            {"targets", {tracked_}}});
  }
}

RunResult run_scenario(const Scenario& s) {
  validate(s);
  RunResult res;
  const auto accounts = s.account_count();
  World w(s.n, s.f, s.seed, accounts, {make_genesis_tx(accounts, s.initial_balance)}, &res.trace);

  SimConfig cfg;
  cfg.net.kind = s.model;
  cfg.net.gst_slot = s.model == NetKind::Elss ? s.gst_slot : 1;
  cfg.net.sleep = resolve_sleep(s);
  if (s.model == NetKind::Elss && !s.partition.empty())
    cfg.net.delay = partition_policy(s.partition, s.partition_jitter, s.seed);
  cfg.horizon_slots = s.horizon_slots;
  cfg.seed = s.seed;
  cfg.leader_mode = s.leader_mode;

  const auto byz = s.byzantine();
  Json correct = Json::array();
  for (NodeId v = 0; v < static_cast<NodeId>(s.n); ++v)
    if (!byz.count(v)) correct.push_back(v);
  Json asleep = Json::object();
  for (const auto& [slot, nodes] : cfg.net.sleep.asleep()) asleep[std::to_string(slot)] = nodes;
  res.trace.emit(0, -1, "header",
                 {{"schema_version", kSchemaVersion},
                  {"scenario", scenario_to_json(s)},
                  {"hash", kHashName},
                  {"mac", Authenticator::kName},
                  {"prng", kPrngName},
                  {"correct", correct},
                  {"byzantine", byz},
                  {"asleep", asleep},
                  {"gst_round", s.model == NetKind::Elss
                                    ? global_round({s.gst_slot, 1}, s.f)
                                    : std::int64_t{0}},
                  {"gst_alignment", "slot"}});

  NodeOptions opts;
  opts.tx_cap = s.tx_cap;
  std::vector<std::unique_ptr<Participant>> parts;
  for (NodeId v = 0; v < static_cast<NodeId>(s.n); ++v) {
    if (!byz.count(v)) {
      parts.push_back(std::make_unique<HonestParticipant>(w, v, opts));
      continue;
    }
    ByzantineSpec spec;
    std::optional<std::vector<std::vector<NodeId>>> split;
    for (const auto& a : s.adversary) {
      if (a.node != v) continue;
      if (a.kind == "digest-split") {
        split = a.groups;
      } else if (a.kind == "crash") {
        spec.crash_from_round = a.from_round;
      } else if (a.kind == "withhold") {
        spec.withhold_targets.insert(a.targets.begin(), a.targets.end());
        spec.withhold_from = a.from_round;
        spec.withhold_to = a.to_round < 0 ? s.horizon_slots * (s.f + 2) : a.to_round;
      } else if (a.kind == "selective-send") {
        spec.exclude.insert(a.targets.begin(), a.targets.end());
      } else if (a.kind == "equivocate") {
        spec.equivocate_rounds.insert(a.rounds.begin(), a.rounds.end());
        if (a.every > 0) {
          std::int64_t last = a.to_round < 0 ? s.horizon_slots * (s.f + 2) : a.to_round;
          for (std::int64_t r = a.from_round; r <= last; r += a.every)
            spec.equivocate_rounds.insert(r);
        }
      }
    }
    if (split)
      parts.push_back(std::make_unique<DigestSplitter>(w, v, *split, opts));
    else
      parts.push_back(std::make_unique<ByzantineNode>(w, v, std::move(spec), opts));
  }

  Simulator sim(w, cfg, std::move(parts), res.trace);
  int group = 0;
  for (const auto& wl : s.workload) {
    if (wl.kind == "cautious") {
      NodeId tracked = wl.node.value_or(correct.front().get<NodeId>());
      sim.add_client(std::make_unique<CautiousClient>(wl, tracked));
    } else if (wl.kind == "double-spend") {
      sim.add_client(
          std::make_unique<DoubleSpender>(wl.account, wl.round, wl.targets_a, wl.targets_b, group++));
    } else if (wl.kind == "split-broadcast") {
      sim.add_client(std::make_unique<DoubleSpender>(wl.account, wl.round, std::vector<NodeId>{},
                                                     std::vector<NodeId>{}, group++));
    }
  }
  sim.run();
  res.hash = hex(res.trace.hash());
  return res;
}

}  // namespace slipstream
