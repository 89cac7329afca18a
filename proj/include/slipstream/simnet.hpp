#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "slipstream/node.hpp"

namespace slipstream {

enum class NetKind { LockStep, Elss, SlotSleepy };
const char* to_string(NetKind k);

enum class LeaderMode {
  Coin,   // common coin in every slot
  None,   // bottom before GST, coin afterwards
  Split,  // per-node coins before GST, common coin afterwards
};
const char* to_string(LeaderMode m);

inline constexpr const char* kPrngName = "mt19937_64";

// Uniform draw in [0, bound) by rejection, independent of the standard
// library's distribution implementation.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);
std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

struct Message {
  NodeId from = 0;
  NodeId to = 0;
  std::vector<BlockIndex> blocks;
  std::int64_t sent_round = 0;
};

class SleepSchedule {
 public:
  bool awake(std::int64_t slot, NodeId node) const;
  void set_asleep(std::int64_t slot, NodeId node);
  const std::map<std::int64_t, std::set<NodeId>>& asleep() const { return asleep_; }

 private:
  std::map<std::int64_t, std::set<NodeId>> asleep_;
};

class LeaderOracle {
 public:
  LeaderOracle(std::uint64_t seed, int n, LeaderMode mode, std::int64_t gst_slot);
  std::optional<NodeId> leader(std::int64_t slot, NodeId viewer) const;
  NodeId coin(std::int64_t slot) const;

 private:
  std::uint64_t seed_;
  int n_;
  LeaderMode mode_;
  std::int64_t gst_slot_;
};

// Delivery round for a pre-GST message; the engine clamps it to
// [sent + 1, GST].
using DelayPolicy = std::function<std::int64_t(const Message&, std::int64_t gst_round)>;

// Delays messages between different partition groups until GST.
DelayPolicy partition_policy(std::vector<std::vector<NodeId>> groups, double jitter,
                             std::uint64_t seed);

struct NetModel {
  NetKind kind = NetKind::LockStep;
  std::int64_t gst_slot = 1;  // ELSS only, slot-aligned
  SleepSchedule sleep;        // SlotSleepy only
  DelayPolicy delay;          // ELSS only; null: everything delayed to GST
};

class Participant {
 public:
  virtual ~Participant() = default;
  virtual NodeId id() const = 0;
  virtual bool correct() const { return false; }
  virtual std::vector<Message> step(Timestamp now, const std::vector<Message>& inbox,
                                    std::optional<NodeId> leader) = 0;
  virtual void submit(const UtxoTx& tx) = 0;
  // The replica that holds the ledger clients look at, if any.
  virtual const Node* view() const { return nullptr; }
  virtual Json summary() const { return Json::object(); }
};

class HonestParticipant : public Participant {
 public:
  HonestParticipant(World& w, NodeId id, NodeOptions opts = {});
  NodeId id() const override { return node_.id(); }
  bool correct() const override { return true; }
  std::vector<Message> step(Timestamp now, const std::vector<Message>& inbox,
                            std::optional<NodeId> leader) override;
  void submit(const UtxoTx& tx) override { node_.submit(tx); }
  const Node* view() const override { return &node_; }
  Json summary() const override { return node_.summary(); }
  Node& node() { return node_; }

 private:
  Node node_;
  int n_;
};

class Simulator;

// Workload actor ticked before every round.
class Client {
 public:
  virtual ~Client() = default;
  virtual void tick(std::int64_t round, Timestamp now, Simulator& sim) = 0;
};

struct SimConfig {
  NetModel net;
  std::int64_t horizon_slots = 10;
  std::uint64_t seed = 1;
  LeaderMode leader_mode = LeaderMode::Coin;
};

class Simulator {
 public:
  Simulator(World& world, SimConfig cfg, std::vector<std::unique_ptr<Participant>> participants,
            Trace& trace);

  void add_client(std::unique_ptr<Client> c) { clients_.push_back(std::move(c)); }
  void run();
  // One round; returns false past the horizon.
  bool step_round();

  World& world() { return w_; }
  Trace& trace() { return trace_; }
  std::int64_t round() const { return round_; }
  const SimConfig& config() const { return cfg_; }
  Participant& participant(NodeId id) { return *parts_.at(id); }
  std::size_t size() const { return parts_.size(); }
  bool awake(std::int64_t slot, NodeId node) const;
  std::int64_t gst_round() const;
  std::uint64_t bytes_sent() const { return bytes_sent_; }

  // Client-side submission to a node's mempool (effective before its next step).
  void submit(NodeId node, const UtxoTx& tx);

 private:
  void schedule(Message m);

  World& w_;
  SimConfig cfg_;
  std::vector<std::unique_ptr<Participant>> parts_;
  std::vector<std::unique_ptr<Client>> clients_;
  Trace& trace_;
  LeaderOracle leader_;
  std::map<std::int64_t, std::vector<Message>> in_flight_;
  std::int64_t round_ = 0;
  std::uint64_t bytes_sent_ = 0;
};

}  // namespace slipstream
