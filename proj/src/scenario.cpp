#include <algorithm>
#include <fstream>
#include <sstream>

#include "slipstream/harness.hpp"

namespace slipstream {

namespace {

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::ScenarioInvalid, why); }

NetKind parse_model(const std::string& m) {
  if (m == "lockstep") return NetKind::LockStep;
  if (m == "elss") return NetKind::Elss;
  if (m == "slot-sleepy" || m == "ss") return NetKind::SlotSleepy;
  invalid("unknown model '" + m + "'");
}

LeaderMode parse_leader(const std::string& m) {
  if (m == "coin") return LeaderMode::Coin;
  if (m == "none") return LeaderMode::None;
  if (m == "split") return LeaderMode::Split;
  invalid("unknown leader_mode '" + m + "'");
}

template <class T>
void get_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void shuffle(std::vector<NodeId>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_below(rng, i)]);
}

}  // namespace

std::set<NodeId> Scenario::byzantine() const {
  std::set<NodeId> out;
  for (const auto& a : adversary) out.insert(a.node);
  return out;
}

Scenario scenario_from_json(const Json& j) {
  Scenario s;
  try {
    get_opt(j, "schema_version", s.schema_version);
    if (s.schema_version != kSchemaVersion)
      invalid("unsupported schema_version " + std::to_string(s.schema_version));
    get_opt(j, "name", s.name);
    get_opt(j, "n", s.n);
    get_opt(j, "f", s.f);
    if (j.contains("model")) s.model = parse_model(j.at("model").get<std::string>());
    get_opt(j, "gst_slot", s.gst_slot);
    get_opt(j, "horizon_slots", s.horizon_slots);
    get_opt(j, "seed", s.seed);
    if (j.contains("leader_mode")) s.leader_mode = parse_leader(j.at("leader_mode").get<std::string>());
    get_opt(j, "accounts", s.accounts);
    get_opt(j, "initial_balance", s.initial_balance);
    get_opt(j, "tx_cap", s.tx_cap);
    if (j.contains("sleep")) {
      const Json& sl = j.at("sleep");
      get_opt(sl, "kind", s.sleep.kind);
      get_opt(sl, "p_sleep", s.sleep.p_sleep);
      if (sl.contains("asleep"))
        for (const auto& [slot, nodes] : sl.at("asleep").items())
          for (auto v : nodes) s.sleep.asleep[std::stoll(slot)].insert(v.get<NodeId>());
    }
    if (j.contains("partition")) {
      const Json& p = j.at("partition");
      get_opt(p, "groups", s.partition);
      get_opt(p, "jitter", s.partition_jitter);
    }
    for (const auto& a : j.value("adversary", Json::array())) {
      AdversarySpec spec;
      spec.node = a.at("node").get<NodeId>();
      spec.kind = a.at("kind").get<std::string>();
      get_opt(a, "from_round", spec.from_round);
      get_opt(a, "to_round", spec.to_round);
      get_opt(a, "targets", spec.targets);
      get_opt(a, "rounds", spec.rounds);
      get_opt(a, "every", spec.every);
      get_opt(a, "groups", spec.groups);
      s.adversary.push_back(std::move(spec));
    }
    for (const auto& w : j.value("workload", Json::array())) {
      WorkloadSpec spec;
      spec.kind = w.at("kind").get<std::string>();
      get_opt(w, "accounts", spec.accounts);
      if (w.contains("node")) spec.node = w.at("node").get<NodeId>();
      get_opt(w, "start_round", spec.start_round);
      get_opt(w, "stop_round", spec.stop_round);
      get_opt(w, "every", spec.every);
      get_opt(w, "account", spec.account);
      get_opt(w, "round", spec.round);
      get_opt(w, "targets_a", spec.targets_a);
      get_opt(w, "targets_b", spec.targets_b);
      s.workload.push_back(std::move(spec));
    }
  } catch (const Json::exception& e) {
    invalid(std::string("malformed scenario: ") + e.what());
  }
  validate(s);
  return s;
}

Json scenario_to_json(const Scenario& s) {
  Json j;
  j["schema_version"] = s.schema_version;
  j["name"] = s.name;
  j["n"] = s.n;
  j["f"] = s.f;
  j["model"] = s.model == NetKind::SlotSleepy ? "slot-sleepy" : to_string(s.model);
  j["gst_slot"] = s.gst_slot;
  j["horizon_slots"] = s.horizon_slots;
  j["seed"] = s.seed;
  j["leader_mode"] = to_string(s.leader_mode);
  j["accounts"] = s.account_count();
  j["initial_balance"] = s.initial_balance;
  j["tx_cap"] = s.tx_cap;
  Json sl{{"kind", s.sleep.kind}, {"p_sleep", s.sleep.p_sleep}};
  Json asleep = Json::object();
  for (const auto& [slot, nodes] : s.sleep.asleep) asleep[std::to_string(slot)] = nodes;
  sl["asleep"] = asleep;
  j["sleep"] = sl;
  j["partition"] = {{"groups", s.partition}, {"jitter", s.partition_jitter}};
  Json adv = Json::array();
  for (const auto& a : s.adversary)
    adv.push_back({{"node", a.node},     {"kind", a.kind},     {"from_round", a.from_round},
                   {"to_round", a.to_round}, {"targets", a.targets}, {"rounds", a.rounds},
                   {"every", a.every},   {"groups", a.groups}});
  j["adversary"] = adv;
  Json wl = Json::array();
  for (const auto& w : s.workload) {
    Json x{{"kind", w.kind},   {"accounts", w.accounts},   {"start_round", w.start_round},
           {"stop_round", w.stop_round}, {"every", w.every}, {"account", w.account},
           {"round", w.round}, {"targets_a", w.targets_a}, {"targets_b", w.targets_b}};
    if (w.node) x["node"] = *w.node;
    wl.push_back(x);
  }
  j["workload"] = wl;
  return j;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open scenario " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("scenario json: ") + e.what());
  }
  return scenario_from_json(j);
}

void validate(const Scenario& s) {
  if (s.n < 1 || s.n > 64) invalid("n must be in [1, 64]");
  if (s.f < 0) invalid("f must be >= 0");
  if (s.n < 2 * s.f + 1) invalid("need n >= 2f+1");
  if (s.model == NetKind::Elss && s.n < 3 * s.f + 1) invalid("elss needs n >= 3f+1");
  if (s.horizon_slots < 1) invalid("horizon_slots must be >= 1");
  if (s.gst_slot < 1) invalid("gst_slot must be >= 1");
  if (s.tx_cap == 0) invalid("tx_cap must be positive");
  auto node_ok = [&](NodeId v) { return v < static_cast<NodeId>(s.n); };
  auto byz = s.byzantine();
  if (static_cast<int>(byz.size()) > s.f) invalid("more Byzantine nodes than f");
  for (const auto& a : s.adversary) {
    if (!node_ok(a.node)) invalid("adversary node out of range");
    static const std::set<std::string> kinds{"crash", "withhold", "selective-send", "equivocate",
                                             "digest-split"};
    if (!kinds.count(a.kind)) invalid("unknown adversary kind '" + a.kind + "'");
    for (auto t : a.targets)
      if (!node_ok(t)) invalid("adversary target out of range");
    if (a.kind == "digest-split") {
      if (a.groups.empty()) invalid("digest-split needs groups");
      for (const auto& g : a.groups)
        for (auto v : g)
          if (!node_ok(v)) invalid("digest-split group member out of range");
      for (const auto& b : s.adversary)
        if (&b != &a && b.node == a.node) invalid("digest-split cannot be combined");
    }
    if (a.kind == "equivocate" && a.every < 0) invalid("equivocate every must be >= 0");
  }
  for (const auto& g : s.partition)
    for (auto v : g)
      if (!node_ok(v)) invalid("partition member out of range");
  if (!s.partition.empty() && s.model != NetKind::Elss) invalid("partition only applies to elss");
  const auto accounts = s.account_count();
  for (const auto& w : s.workload) {
    if (w.kind == "cautious") {
      if (w.accounts.empty()) invalid("cautious workload needs accounts");
      for (auto a : w.accounts)
        if (a >= accounts) invalid("workload account out of range");
      if (w.node && (!node_ok(*w.node) || byz.count(*w.node)))
        invalid("cautious client must track a correct node");
      if (w.every < 1) invalid("workload every must be >= 1");
    } else if (w.kind == "double-spend" || w.kind == "split-broadcast") {
      if (w.account >= accounts) invalid("double-spend account out of range");
      for (auto v : w.targets_a)
        if (!node_ok(v)) invalid("double-spend target out of range");
      for (auto v : w.targets_b)
        if (!node_ok(v)) invalid("double-spend target out of range");
      if (w.kind == "double-spend" && (w.targets_a.empty() || w.targets_b.empty()))
        invalid("double-spend needs both target sets");
    } else {
      invalid("unknown workload kind '" + w.kind + "'");
    }
  }
  static const std::set<std::string> sleep_kinds{"none", "random", "adversarial", "explicit"};
  if (!sleep_kinds.count(s.sleep.kind)) invalid("unknown sleep kind '" + s.sleep.kind + "'");
  if (s.sleep.kind != "none" && s.model != NetKind::SlotSleepy)
    invalid("sleep schedules only apply to slot-sleepy");
  if (s.sleep.p_sleep < 0 || s.sleep.p_sleep > 1) invalid("p_sleep must be in [0, 1]");
  if (s.model == NetKind::SlotSleepy) resolve_sleep(s);  // checks awake majority
}

SleepSchedule resolve_sleep(const Scenario& s) {
  SleepSchedule out;
  if (s.model != NetKind::SlotSleepy) return out;
  auto byz = s.byzantine();
  std::vector<NodeId> correct;
  std::vector<NodeId> faulty(byz.begin(), byz.end());
  for (NodeId v = 0; v < static_cast<NodeId>(s.n); ++v)
    if (!byz.count(v)) correct.push_back(v);
  auto rng = keyed_rng(s.seed, 0x736c6570ull);

  for (std::int64_t slot = 1; slot <= s.horizon_slots; ++slot) {
    std::set<NodeId> asleep;
    if (s.sleep.kind == "explicit") {
      if (auto it = s.sleep.asleep.find(slot); it != s.sleep.asleep.end()) asleep = it->second;
    } else if (s.sleep.kind == "random") {
      for (NodeId v = 0; v < static_cast<NodeId>(s.n); ++v) {
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        if (u < s.sleep.p_sleep) asleep.insert(v);
      }
      // restore the awake majority by waking the lowest correct sleepers
      auto count_awake = [&](const std::vector<NodeId>& grp) {
        return std::count_if(grp.begin(), grp.end(), [&](NodeId v) { return !asleep.count(v); });
      };
      for (NodeId v : correct) {
        if (count_awake(correct) > count_awake(faulty)) break;
        asleep.erase(v);
      }
    } else if (s.sleep.kind == "adversarial") {
      // k Byzantine and exactly k+1 correct nodes awake
      std::uint64_t kmax = std::min<std::uint64_t>(faulty.size(), correct.size() - 1);
      std::uint64_t k = uniform_below(rng, kmax + 1);
      auto fz = faulty;
      auto cr = correct;
      shuffle(fz, rng);
      shuffle(cr, rng);
      for (std::size_t i = k; i < fz.size(); ++i) asleep.insert(fz[i]);
      for (std::size_t i = k + 1; i < cr.size(); ++i) asleep.insert(cr[i]);
    }
    std::int64_t awake_c = 0, awake_b = 0;
    for (NodeId v = 0; v < static_cast<NodeId>(s.n); ++v) {
      if (asleep.count(v)) continue;
      (byz.count(v) ? awake_b : awake_c) += 1;
    }
    if (awake_c <= awake_b)
      invalid("slot " + std::to_string(slot) + " violates the awake correct majority");
    for (auto v : asleep) out.set_asleep(slot, v);
  }
  return out;
}

}  // namespace slipstream
