#include "slipstream/simnet.hpp"

#include <algorithm>
#include <limits>

namespace slipstream {

const char* to_string(NetKind k) {
  switch (k) {
    case NetKind::LockStep: return "lockstep";
    case NetKind::Elss: return "elss";
    case NetKind::SlotSleepy: return "slot-sleepy";
  }
  return "?";
}

const char* to_string(LeaderMode m) {
  switch (m) {
    case LeaderMode::Coin: return "coin";
    case LeaderMode::None: return "none";
    case LeaderMode::Split: return "split";
  }
  return "?";
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCode::ScenarioInvalid, "empty range");
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % bound + 1) % bound;
  for (;;) {
    std::uint64_t x = rng();
    if (x <= limit) return x % bound;
  }
}

std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

bool SleepSchedule::awake(std::int64_t slot, NodeId node) const {
  auto it = asleep_.find(slot);
  return it == asleep_.end() || it->second.count(node) == 0;
}

void SleepSchedule::set_asleep(std::int64_t slot, NodeId node) { asleep_[slot].insert(node); }

LeaderOracle::LeaderOracle(std::uint64_t seed, int n, LeaderMode mode, std::int64_t gst_slot)
    : seed_(seed), n_(n), mode_(mode), gst_slot_(gst_slot) {}

NodeId LeaderOracle::coin(std::int64_t slot) const {
  auto rng = keyed_rng(seed_, 0x6c656164ull, static_cast<std::uint64_t>(slot));
  return static_cast<NodeId>(uniform_below(rng, static_cast<std::uint64_t>(n_)));
}

std::optional<NodeId> LeaderOracle::leader(std::int64_t slot, NodeId viewer) const {
  if (slot >= gst_slot_ || mode_ == LeaderMode::Coin) return coin(slot);
  if (mode_ == LeaderMode::None) return std::nullopt;
  auto rng = keyed_rng(seed_, 0x73706c74ull + viewer, static_cast<std::uint64_t>(slot));
  return static_cast<NodeId>(uniform_below(rng, static_cast<std::uint64_t>(n_)));
}

DelayPolicy partition_policy(std::vector<std::vector<NodeId>> groups, double jitter,
                             std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(keyed_rng(seed, 0x6a6974ull));
  // Groups may overlap; a pre-GST message is prompt iff both ends share one.
  auto linked = [groups](NodeId a, NodeId b) {
    for (const auto& g : groups)
      if (std::find(g.begin(), g.end(), a) != g.end() && std::find(g.begin(), g.end(), b) != g.end())
        return true;
    return false;
  };
  return [linked, jitter, rng](const Message& m, std::int64_t gst_round) -> std::int64_t {
    if (!linked(m.from, m.to)) return gst_round;
    if (jitter > 0) {
      double u = static_cast<double>((*rng)() >> 11) * 0x1.0p-53;
      if (u < jitter) {
        std::int64_t span = gst_round - m.sent_round;
        return m.sent_round + 1 + static_cast<std::int64_t>(uniform_below(*rng, span));
      }
    }
    return m.sent_round + 1;
  };
}

HonestParticipant::HonestParticipant(World& w, NodeId id, NodeOptions opts)
    : node_(w, id, opts), n_(w.n) {}

std::vector<Message> HonestParticipant::step(Timestamp now, const std::vector<Message>& inbox,
                                             std::optional<NodeId> leader) {
  for (const auto& m : inbox) node_.receive(m.blocks);
  node_.update(now, leader);
  std::vector<Message> out;
  for (NodeId eta = 0; eta < static_cast<NodeId>(n_); ++eta) {
    if (eta == node_.id()) continue;
    out.push_back({node_.id(), eta, node_.bundle_for(eta, now), 0});
  }
  return out;
}

Simulator::Simulator(World& world, SimConfig cfg,
                     std::vector<std::unique_ptr<Participant>> participants, Trace& trace)
    : w_(world),
      cfg_(std::move(cfg)),
      parts_(std::move(participants)),
      trace_(trace),
      leader_(cfg_.seed, world.n, cfg_.leader_mode,
              cfg_.net.kind == NetKind::Elss ? cfg_.net.gst_slot : 1) {
  std::sort(parts_.begin(), parts_.end(),
            [](const auto& a, const auto& b) { return a->id() < b->id(); });
  for (std::size_t i = 0; i < parts_.size(); ++i)
    if (parts_[i]->id() != i) throw Error(ErrorCode::ScenarioInvalid, "participant ids not dense");
}

bool Simulator::awake(std::int64_t slot, NodeId node) const {
  return cfg_.net.kind != NetKind::SlotSleepy || cfg_.net.sleep.awake(slot, node);
}

std::int64_t Simulator::gst_round() const {
  if (cfg_.net.kind != NetKind::Elss) return 0;
  return global_round({cfg_.net.gst_slot, 1}, w_.f);
}

void Simulator::submit(NodeId node, const UtxoTx& tx) { parts_.at(node)->submit(tx); }

void Simulator::schedule(Message m) {
  if (m.to == m.from || m.to >= parts_.size() || m.blocks.empty()) return;
  std::int64_t at = m.sent_round + 1;
  if (cfg_.net.kind == NetKind::Elss && m.sent_round < gst_round()) {
    std::int64_t g = gst_round();
    std::int64_t want = cfg_.net.delay ? cfg_.net.delay(m, g) : g;
    at = std::clamp<std::int64_t>(want, m.sent_round + 1, g);
  }
  if (cfg_.net.kind == NetKind::SlotSleepy && !awake(time_of_round(at, w_.f).slot, m.to)) return;
  for (auto b : m.blocks) bytes_sent_ += w_.pool.entry(b).bytes;
  in_flight_[at].push_back(std::move(m));
}

bool Simulator::step_round() {
  if (round_ >= cfg_.horizon_slots * (w_.f + 2)) return false;
  ++round_;
  w_.round = round_;
  const Timestamp now = time_of_round(round_, w_.f);
  for (auto& c : clients_) c->tick(round_, now, *this);

  std::vector<std::vector<Message>> inbox(parts_.size());
  if (auto it = in_flight_.find(round_); it != in_flight_.end()) {
    for (auto& m : it->second) inbox[m.to].push_back(std::move(m));
    in_flight_.erase(it);
  }
  for (auto& p : parts_) {
    NodeId id = p->id();
    if (!awake(now.slot, id)) continue;
    auto out = p->step(now, inbox[id], leader_.leader(now.slot, id));
    for (auto& m : out) {
      m.from = id;
      m.sent_round = round_;
      schedule(std::move(m));
    }
  }
  return true;
}

void Simulator::run() {
  while (step_round()) {
  }
  for (auto& p : parts_) {
    Json s = p->summary();
    s["correct"] = p->correct();
    trace_.emit(round_, p->id(), "summary", std::move(s));
  }
  trace_.emit(round_, -1, "run-end", {{"bytes_sent", bytes_sent_}, {"rounds", round_}});
}

}  // namespace slipstream
