#include <algorithm>
#include <cmath>
#include <functional>

#include "slipstream/harness.hpp"

namespace slipstream {

namespace {

const std::string kZeroHex(64, '0');

std::string short_id(const std::string& h) { return h.substr(0, 12); }

}  // namespace

void PropertyReport::fail(std::int64_t round, std::vector<std::int64_t> nodes, std::string detail) {
  pass = false;
  ++violations;
  if (!first) first = Violation{round, std::move(nodes), std::move(detail)};
}

Json PropertyReport::to_json() const {
  Json j{{"property", property}, {"applicable", applicable}, {"pass", pass},
         {"checked", checked},   {"violations", violations}, {"metrics", metrics}};
  if (first) {
    Json r = reproducer;
    r["round"] = first->round;
    j["first_violation"] = {{"round", first->round}, {"nodes", first->nodes}, {"detail", first->detail}};
    j["reproducer"] = r;
  }
  return j;
}

bool is_prefix(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
}

TraceIndex::TraceIndex(const Trace& t) {
  for (const auto& e : t.events()) {
    last_round = std::max(last_round, e.round);
    const Json& p = e.payload;
    const std::string& ty = e.type;
    if (ty == "header") {
      header = p;
      const Json& sc = p.at("scenario");
      n = sc.at("n");
      f = sc.at("f");
      model = sc.at("model");
      gst_slot = model == "elss" ? sc.at("gst_slot").get<std::int64_t>() : 1;
      horizon_slots = sc.at("horizon_slots");
      for (auto v : p.at("correct")) correct.insert(v.get<std::int64_t>());
      for (const auto& [slot, nodes] : p.at("asleep").items())
        for (auto v : nodes) asleep[std::stoll(slot)].insert(v.get<std::int64_t>());
    } else if (ty == "block") {
      BlockInfo b;
      b.node = e.node;
      b.slot = p.at("slot");
      b.round = e.round;
      for (const auto& x : p.at("txs")) b.txs.push_back(x);
      blocks[p.at("id")] = std::move(b);
    } else if (ty == "registry") {
      RegEntry r;
      r.parent = p.at("parent");
      r.slot = p.at("slot");
      for (const auto& x : p.at("fresh")) r.fresh.push_back(x);
      const std::string d = p.at("digest");
      for (const auto& b : r.fresh) fresh_in_[b].push_back(d);
      registry[d] = std::move(r);
    } else if (ty == "slot-entry") {
      slots[e.node][p.at("slot").get<std::int64_t>()].entry = p.at("digest").get<std::string>();
    } else if (ty == "slot-exit") {
      slots[e.node][p.at("slot").get<std::int64_t>()].exit = p.at("digest").get<std::string>();
    } else if (ty == "finalize") {
      finals[e.node].emplace_back(e.round, p.at("digest").get<std::string>());
    } else if (ty == "final-time") {
      final_times[e.node].emplace_back(e.round, p.at("tau").get<std::int64_t>(),
                                       p.at("s_pre").get<std::int64_t>());
    } else if (ty == "confirm") {
      confirms[e.node].emplace(p.at("tx").get<std::string>(),
                               ConfirmInfo{e.round, p.at("path").get<std::string>()});
    } else if (ty == "tx") {
      const std::string h = p.at("tx");
      if (txs.count(h)) continue;
      TxInfo info;
      info.kind = p.at("kind");
      info.round = e.round;
      for (const auto& x : p.at("inputs")) info.inputs.push_back(x);
      if (p.contains("group")) info.group = p.at("group").get<std::int64_t>();
      txs[h] = std::move(info);
    } else if (ty == "ledger-violation") {
      ledger_violations.push_back(e);
    } else if (ty == "validity-violation") {
      validity_violations.push_back(e);
    } else if (ty == "summary") {
      if (p.contains("validity_checks")) validity_checks[e.node] = p.at("validity_checks");
    }
  }
  if (header.is_null()) throw Error(ErrorCode::Parse, "trace has no header");
}

bool TraceIndex::awake(std::int64_t slot, std::int64_t v) const {
  auto it = asleep.find(slot);
  return it == asleep.end() || it->second.count(v) == 0;
}

const std::vector<std::string>& TraceIndex::order_of(const std::string& digest) const {
  static const std::vector<std::string> kEmpty;
  if (digest == kZeroHex) return kEmpty;
  if (auto it = order_cache_.find(digest); it != order_cache_.end()) return it->second;
  std::vector<std::string> chain;
  for (std::string d = digest; d != kZeroHex && !order_cache_.count(d);) {
    auto it = registry.find(d);
    if (it == registry.end()) throw Error(ErrorCode::UnknownDigest, "trace lacks digest " + d);
    chain.push_back(d);
    d = it->second.parent;
  }
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const auto& e = registry.at(*it);
    std::vector<std::string> seq = e.parent == kZeroHex ? std::vector<std::string>{}
                                                        : order_cache_.at(e.parent);
    seq.insert(seq.end(), e.fresh.begin(), e.fresh.end());
    order_cache_[*it] = std::move(seq);
  }
  return order_cache_.at(digest);
}

bool TraceIndex::commits(const std::string& digest, const std::string& block) const {
  auto it = fresh_in_.find(block);
  if (it == fresh_in_.end()) return false;
  for (std::string d = digest; d != kZeroHex;) {
    if (std::find(it->second.begin(), it->second.end(), d) != it->second.end()) return true;
    auto r = registry.find(d);
    if (r == registry.end()) return false;
    d = r->second.parent;
  }
  return false;
}

std::string TraceIndex::final_at(std::int64_t node, std::int64_t round) const {
  std::string out = kZeroHex;
  auto it = finals.find(node);
  if (it == finals.end()) return out;
  for (const auto& [r, d] : it->second) {
    if (r > round) break;
    out = d;
  }
  return out;
}

std::optional<std::int64_t> TraceIndex::s_same() const {
  for (std::int64_t s = gst_slot; s <= horizon_slots; ++s) {
    std::optional<std::string> common;
    bool ok = true;
    for (auto v : correct) {
      if (!awake(s, v)) continue;
      auto ni = slots.find(v);
      if (ni == slots.end()) { ok = false; break; }
      auto si = ni->second.find(s);
      if (si == ni->second.end() || !si->second.entry) { ok = false; break; }
      if (!common) common = si->second.entry;
      else if (*common != *si->second.entry) { ok = false; break; }
    }
    if (ok && common) return s;
  }
  return std::nullopt;
}

namespace {

PropertyReport make_report(const TraceIndex& t, std::string name) {
  PropertyReport r;
  r.property = std::move(name);
  const Json& sc = t.header.at("scenario");
  r.reproducer = {{"scenario", sc.at("name")}, {"seed", sc.at("seed")}};
  return r;
}

// Every pair of digests in `held` must have prefix-comparable orders.
void check_chain(const TraceIndex& t, const std::map<std::string, std::pair<std::int64_t, std::int64_t>>& held,
                 PropertyReport& rep) {
  std::vector<std::string> ds;
  for (const auto& [d, _] : held) ds.push_back(d);
  std::sort(ds.begin(), ds.end(), [&](const auto& a, const auto& b) {
    auto la = t.order_of(a).size(), lb = t.order_of(b).size();
    return la != lb ? la < lb : a < b;
  });
  for (std::size_t i = 1; i < ds.size(); ++i) {
    ++rep.checked;
    if (!is_prefix(t.order_of(ds[i - 1]), t.order_of(ds[i]))) {
      const auto& a = held.at(ds[i - 1]);
      const auto& b = held.at(ds[i]);
      const auto& oa = t.order_of(ds[i - 1]);
      const auto& ob = t.order_of(ds[i]);
      std::size_t k = 0;
      while (k < oa.size() && oa[k] == ob[k]) ++k;
      rep.fail(std::max(a.first, b.first), {a.second, b.second},
               "orders of " + short_id(ds[i - 1]) + " and " + short_id(ds[i]) +
                   " diverge at position " + std::to_string(k));
    }
  }
  rep.metrics["distinct_digests"] = ds.size();
}

std::vector<std::pair<std::string, const TraceIndex::BlockInfo*>> correct_blocks(const TraceIndex& t) {
  std::vector<std::pair<std::string, const TraceIndex::BlockInfo*>> out;
  for (const auto& [id, b] : t.blocks)
    if (t.is_correct(b.node) && b.slot >= 1) out.emplace_back(id, &b);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.second->round, a.second->node, a.first) <
           std::tie(b.second->round, b.second->node, b.first);
  });
  return out;
}

// Round of first inclusion of each tx in a block by a correct node.
std::map<std::string, std::int64_t> inclusion_rounds(const TraceIndex& t, bool correct_only) {
  std::map<std::string, std::int64_t> out;
  for (const auto& [id, b] : t.blocks) {
    if (correct_only && !t.is_correct(b.node)) continue;
    for (const auto& tx : b.txs) {
      auto [it, fresh] = out.emplace(tx, b.round);
      if (!fresh) it->second = std::min(it->second, b.round);
    }
  }
  return out;
}

bool sleepy_or_lockstep(const TraceIndex& t) { return t.model != "elss"; }

}  // namespace

PropertyReport check_order_own_safety(const TraceIndex& t) {
  auto rep = make_report(t, "order-own-safety");
  if (!sleepy_or_lockstep(t)) {
    rep.applicable = false;
    return rep;
  }
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> held;
  for (const auto& [v, per_slot] : t.slots) {
    if (!t.is_correct(v)) continue;
    for (const auto& [s, d] : per_slot) {
      if (d.entry) held.emplace(*d.entry, std::make_pair(t.round_of(s, 1), v));
      if (d.exit) held.emplace(*d.exit, std::make_pair(t.round_of(s, t.f + 2), v));
    }
  }
  check_chain(t, held, rep);
  return rep;
}

PropertyReport check_order_own_liveness(const TraceIndex& t) {
  auto rep = make_report(t, "order-own-liveness");
  if (!sleepy_or_lockstep(t)) {
    rep.applicable = false;
    return rep;
  }
  for (const auto& [id, b] : correct_blocks(t)) {
    for (auto u : t.correct) {
      auto ni = t.slots.find(u);
      if (ni == t.slots.end()) continue;
      for (auto it = ni->second.lower_bound(b->slot + 2); it != ni->second.end(); ++it) {
        if (!t.awake(it->first, u) || !it->second.entry) continue;
        ++rep.checked;
        if (!t.commits(*it->second.entry, id)) {
          rep.fail(t.round_of(it->first, 1), {b->node, u},
                   "block " + short_id(id) + " from slot " + std::to_string(b->slot) +
                       " missing at slot " + std::to_string(it->first) + " entry");
          break;
        }
      }
    }
  }
  return rep;
}

PropertyReport check_same_sc(const TraceIndex& t) {
  auto rep = make_report(t, "same-sc");
  for (std::int64_t s = t.gst_slot; s <= t.horizon_slots; ++s) {
    std::map<std::string, std::pair<std::string, std::int64_t>> exit_by_entry;
    for (auto v : t.correct) {
      auto ni = t.slots.find(v);
      if (ni == t.slots.end()) continue;
      auto si = ni->second.find(s);
      if (si == ni->second.end() || !si->second.entry || !si->second.exit) continue;
      auto [it, fresh] = exit_by_entry.emplace(*si->second.entry, std::make_pair(*si->second.exit, v));
      if (fresh) continue;
      ++rep.checked;
      if (it->second.first != *si->second.exit)
        rep.fail(t.round_of(s, t.f + 2), {it->second.second, v},
                 "slot " + std::to_string(s) + ": equal entry digests, exits " +
                     short_id(it->second.first) + " vs " + short_id(*si->second.exit));
    }
  }
  return rep;
}

PropertyReport check_order_final_safety(const TraceIndex& t) {
  auto rep = make_report(t, "order-final-safety");
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> held;
  for (const auto& [v, fs] : t.finals) {
    if (!t.is_correct(v)) continue;
    for (const auto& [r, d] : fs) held.emplace(d, std::make_pair(r, v));
  }
  check_chain(t, held, rep);
  return rep;
}

PropertyReport check_order_final_liveness(const TraceIndex& t) {
  auto rep = make_report(t, "order-final-liveness");
  if (t.model == "slot-sleepy") {
    rep.applicable = false;
    return rep;
  }
  auto same = t.s_same();
  if (!same) {
    rep.fail(t.last_round, {}, "correct nodes never entered a slot with one digest");
    return rep;
  }
  rep.metrics["s_same"] = *same;
  for (const auto& [id, b] : correct_blocks(t)) {
    if (b->slot < *same) continue;
    const std::int64_t deadline = t.round_of(b->slot + 2, 3);
    if (deadline > t.last_round) continue;
    for (auto u : t.correct) {
      ++rep.checked;
      if (!t.commits(t.final_at(u, deadline), id))
        rep.fail(deadline, {b->node, u},
                 "block " + short_id(id) + " from slot " + std::to_string(b->slot) +
                     " not final by round " + std::to_string(deadline));
    }
  }
  return rep;
}

PropertyReport check_ledger_safety(const TraceIndex& t) {
  auto rep = make_report(t, "ledger-safety");
  for (const auto& e : t.ledger_violations)
    if (t.is_correct(e.node)) rep.fail(e.round, {e.node}, "node reported " + e.payload.dump());
  for (const auto& [v, cs] : t.confirms) {
    if (!t.is_correct(v)) continue;
    std::map<std::string, std::string> spent_by;
    for (const auto& [tx, c] : cs) {
      auto ti = t.txs.find(tx);
      if (ti == t.txs.end()) continue;
      for (const auto& in : ti->second.inputs) {
        ++rep.checked;
        auto [it, fresh] = spent_by.emplace(in, tx);
        if (!fresh && it->second != tx)
          rep.fail(c.round, {v},
                   "txs " + short_id(it->second) + " and " + short_id(tx) + " both spend " +
                       short_id(in));
      }
    }
  }
  return rep;
}

PropertyReport check_ledger_consistency(const TraceIndex& t) {
  auto rep = make_report(t, "ledger-consistency");
  // A fast confirmation in the last slot may not have reached everyone yet.
  const std::int64_t cutoff = t.last_round - t.rounds_per_slot();
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> fast;
  for (const auto& [v, cs] : t.confirms) {
    if (!t.is_correct(v)) continue;
    for (const auto& [tx, c] : cs)
      if (c.path == "fast" && c.round <= cutoff) fast.emplace(tx, std::make_pair(c.round, v));
  }
  for (const auto& [tx, at] : fast) {
    for (auto u : t.correct) {
      ++rep.checked;
      auto ci = t.confirms.find(u);
      if (ci == t.confirms.end() || !ci->second.count(tx))
        rep.fail(t.last_round, {at.second, u},
                 "fast-confirmed tx " + short_id(tx) + " absent from ledger at horizon");
    }
  }
  rep.metrics["fast_confirmed"] = fast.size();
  return rep;
}

PropertyReport check_fast_latency(const TraceIndex& t) {
  auto rep = make_report(t, "fast-latency");
  std::int64_t sync_slot = 1;
  if (t.model == "slot-sleepy") {
    rep.applicable = false;
    return rep;
  }
  if (t.model == "elss") {
    auto same = t.s_same();
    if (!same) {
      rep.applicable = false;
      return rep;
    }
    sync_slot = *same;
  }
  auto incl = inclusion_rounds(t, true);
  std::map<std::int64_t, std::uint64_t> hist;
  bool any = false;
  for (const auto& [tx, info] : t.txs) {
    if (info.kind != "cautious") continue;
    any = true;
    auto ii = incl.find(tx);
    if (ii == incl.end()) continue;
    const std::int64_t i = ii->second;
    if (time_of_round(i, t.f).slot < sync_slot || i + 3 > t.last_round) continue;
    for (auto u : t.correct) {
      ++rep.checked;
      auto ci = t.confirms.find(u);
      const TraceIndex::ConfirmInfo* c = nullptr;
      if (ci != t.confirms.end())
        if (auto it = ci->second.find(tx); it != ci->second.end()) c = &it->second;
      if (!c || c->round > i + 3) {
        rep.fail(i + 3, {u},
                 "tx " + short_id(tx) + " included at round " + std::to_string(i) +
                     (c ? " confirmed at " + std::to_string(c->round) : " never confirmed"));
        continue;
      }
      ++hist[c->round - i];
    }
  }
  rep.applicable = any;
  Json h = Json::object();
  for (auto [d, k] : hist) h[std::to_string(d)] = k;
  rep.metrics["latency_rounds"] = h;
  return rep;
}

PropertyReport check_unlock(const TraceIndex& t) {
  auto rep = make_report(t, "double-spend-unlock");
  std::map<std::int64_t, std::vector<std::string>> groups;
  for (const auto& [tx, info] : t.txs)
    if (info.group) groups[*info.group].push_back(tx);
  rep.applicable = !groups.empty();
  auto incl = inclusion_rounds(t, false);
  Json resolved = Json::array();
  for (const auto& [g, members] : groups) {
    std::optional<std::int64_t> slot;
    for (const auto& tx : members)
      if (auto it = incl.find(tx); it != incl.end())
        slot = std::max(slot.value_or(0), time_of_round(it->second, t.f).slot);
    if (!slot) continue;
    for (auto u : t.correct) {
      std::optional<std::int64_t> tau;
      if (auto fi = t.final_times.find(u); fi != t.final_times.end())
        for (const auto& [r, ta, s_pre] : fi->second)
          if (s_pre >= *slot) {
            tau = ta;
            break;
          }
      if (!tau) continue;
      const std::int64_t deadline = t.round_of(*tau + 4, t.f + 2);
      if (deadline > t.last_round) continue;
      ++rep.checked;
      int held = 0;
      std::int64_t last = 0;
      if (auto ci = t.confirms.find(u); ci != t.confirms.end())
        for (const auto& tx : members)
          if (auto it = ci->second.find(tx); it != ci->second.end() && it->second.round <= deadline) {
            ++held;
            last = std::max(last, it->second.round);
          }
      if (held != 1)
        rep.fail(deadline, {u},
                 "conflict group " + std::to_string(g) + " (slot " + std::to_string(*slot) +
                     ", final time " + std::to_string(*tau) + ") holds " + std::to_string(held) +
                     " members");
      else
        resolved.push_back({{"group", g}, {"node", u}, {"round", last}, {"tau", *tau}});
    }
  }
  rep.metrics["resolved"] = resolved;
  return rep;
}

PropertyReport check_validity(const TraceIndex& t) {
  auto rep = make_report(t, "valid-dag");
  for (auto v : t.correct)
    if (auto it = t.validity_checks.find(v); it != t.validity_checks.end()) rep.checked += it->second;
  for (const auto& e : t.validity_violations)
    if (t.is_correct(e.node)) rep.fail(e.round, {e.node}, "rule " + e.payload.value("rule", "?"));
  if (rep.checked == 0) rep.fail(t.last_round, {}, "no validity checks recorded");
  return rep;
}

namespace {
const std::vector<std::pair<std::string, std::function<PropertyReport(const TraceIndex&)>>>& registry() {
  static const std::vector<std::pair<std::string, std::function<PropertyReport(const TraceIndex&)>>>
      all{{"order-own-safety", check_order_own_safety},
          {"order-own-liveness", check_order_own_liveness},
          {"same-sc", check_same_sc},
          {"order-final-safety", check_order_final_safety},
          {"order-final-liveness", check_order_final_liveness},
          {"ledger-safety", check_ledger_safety},
          {"ledger-consistency", check_ledger_consistency},
          {"fast-latency", check_fast_latency},
          {"double-spend-unlock", check_unlock},
          {"valid-dag", check_validity}};
  return all;
}
}  // namespace

std::vector<std::string> property_names() {
  std::vector<std::string> out;
  for (const auto& [name, _] : registry()) out.push_back(name);
  return out;
}

PropertyReport run_checker(const std::string& name, const TraceIndex& t) {
  for (const auto& [n, fn] : registry())
    if (n == name) return fn(t);
  throw Error(ErrorCode::ScenarioInvalid, "unknown property '" + name + "'");
}

std::vector<PropertyReport> check_all(const Trace& trace, const std::vector<std::string>& names) {
  TraceIndex t(trace);
  std::vector<PropertyReport> out;
  for (const auto& name : names.empty() ? property_names() : names) out.push_back(run_checker(name, t));
  return out;
}

bool all_pass(const std::vector<PropertyReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.pass; });
}

MeanStats mean_stats(const std::vector<double>& xs) {
  MeanStats m;
  m.count = xs.size();
  if (xs.empty()) return m;
  double sum = 0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.std_err = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return m;
}

Json SweepSummary::to_json() const {
  Json per = Json::array();
  std::vector<double> xs;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    Json row{{"seed", seeds[i]}};
    if (s_same_minus_gst[i]) {
      row["s_same_minus_gst"] = *s_same_minus_gst[i];
      xs.push_back(static_cast<double>(*s_same_minus_gst[i]));
    } else {
      row["s_same_minus_gst"] = nullptr;
    }
    per.push_back(row);
  }
  auto st = mean_stats(xs);
  return {{"runs", seeds.size()},
          {"failures", failures},
          {"s_same_minus_gst", {{"count", st.count}, {"mean", st.mean}, {"std_err", st.std_err}}},
          {"per_seed", per}};
}

SweepSummary sweep(const Scenario& base, std::uint64_t from_seed, std::uint64_t to_seed,
                   const std::vector<std::string>& properties) {
  SweepSummary out;
  for (std::uint64_t seed = from_seed; seed <= to_seed; ++seed) {
    Scenario s = base;
    s.seed = seed;
    auto run = run_scenario(s);
    TraceIndex t(run.trace);
    out.seeds.push_back(seed);
    auto same = t.s_same();
    out.s_same_minus_gst.push_back(same ? std::optional<std::int64_t>(*same - t.gst_slot)
                                        : std::nullopt);
    for (const auto& name : properties.empty() ? property_names() : properties) {
      auto r = run_checker(name, t);
      if (!r.pass) ++out.failures[name];
    }
  }
  return out;
}

}  // namespace slipstream
