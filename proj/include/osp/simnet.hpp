// Copyright 2026 The OSP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// @file simnet.hpp
/// Deterministic discrete-event network. A message is routed hop by hop over
/// the topology's shortest paths; the delivery point (and so the hop count)
/// is fixed when it is sent. Ties in time break by insertion order.

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "osp/codec.hpp"
#include "osp/port.hpp"
#include "osp/topology.hpp"
#include "osp/types.hpp"

namespace osp {

struct SimConfig {
  SimDuration hop_latency{10ms};
  /// Per message, applied once at send. The draw is a hash of the message's
  /// identity (endpoints, type, session, occurrence), so the fate of a given
  /// message does not depend on unrelated traffic.
  double loss_probability = 0.0;
  std::uint64_t seed = 1;
  bool trace = false;
  /// Network and transport headers added to every message in the ledger
  /// (IPv4 20 + UDP 8), so byte counts are those seen at the IP layer.
  int ip_overhead = 28;
};

enum class TraceEvent : std::uint8_t { kSend, kDeliver, kDrop, kLoss, kCycle };

std::string_view to_string(TraceEvent e);

struct TraceRecord {
  SimTime time{0};
  NodeId node;
  TraceEvent event = TraceEvent::kSend;
  SessionId session = 0;
  MessageType type = MessageType::kRegistration;
  std::size_t bytes = 0;
  int hops = 0;
  NodeId peer;  // sender for deliver, addressee otherwise
};

/// One whitespace-separated line: time_us node event session type bytes hops
/// peer.
std::string format(const TraceRecord& r);

struct LedgerCell {
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
  std::uint64_t byte_hops = 0;
  std::uint64_t nominal_byte_hops = 0;  // gossip only

  LedgerCell& operator+=(const LedgerCell& o);
};

/// Byte x hop accounting per message type and per session.
class Ledger {
 public:
  void add(MessageType type, SessionId session, std::size_t bytes, int hops,
           std::optional<int> nominal);
  LedgerCell total() const;
  LedgerCell of_type(MessageType type) const;
  LedgerCell of_session(SessionId session) const;
  /// Sum over the gossip message types.
  LedgerCell gossip() const;
  /// Sum over the ST message types.
  LedgerCell signaling() const;
  void clear();

 private:
  std::map<MessageType, LedgerCell> by_type_;
  std::map<SessionId, LedgerCell> by_session_;
};

/// Receiver side of a node.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual void deliver(NodeId from, std::span<const std::uint8_t> bytes, int hops) = 0;
};

struct SendMeta {
  MessageType type = MessageType::kRegistration;
  SessionId session = 0;
  std::optional<int> nominal_size;
  bool lossless = false;  // exempt from the loss model
};

class Network {
 public:
  Network(const Topology& topo, SimConfig config);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const Topology& topology() const { return topo_; }
  const SimConfig& config() const { return config_; }
  void set_loss_probability(double p);
  SimTime now() const { return now_; }

  /// Registers the OSP stack of `node`. Only attached nodes intercept or
  /// receive messages.
  void attach(NodeId node, Endpoint& endpoint);
  bool attached(NodeId node) const { return endpoints_.at(node.value) != nullptr; }

  /// Sends `bytes` from `from` toward `to`. An interceptable message stops at
  /// the first attached node after the sender; otherwise it reaches `to` or
  /// is dropped there when `to` runs no stack.
  void send(NodeId from, Ipv4Address to, Bytes bytes, bool interceptable, const SendMeta& meta);

  TimerId schedule(SimDuration delay, std::function<void()> fire);
  void cancel(TimerId id);

  /// Calls `on_cycle(node)` every `period`, starting at a per-node phase drawn
  /// uniformly from [0, jitter x period).
  void schedule_cycles(std::span<const NodeId> nodes, SimDuration period, double jitter,
                       std::function<void(NodeId)> on_cycle);
  void stop_cycles() { ++cycle_generation_; }
  /// Phase drawn for each node by the last schedule_cycles().
  const std::map<NodeId, SimDuration>& cycle_phases() const { return phases_; }

  /// Processes the next event. Returns false when the queue is empty.
  bool step();
  /// Runs every event due at or before `t`, then advances the clock to `t`.
  void run_until(SimTime t);
  /// Runs until the queue drains, `stop()` returns true, or time passes
  /// `limit`. Returns true if the queue drained.
  bool run(const std::function<bool()>& stop = {}, std::optional<SimTime> limit = std::nullopt);
  std::size_t pending() const { return queue_.size(); }

  Ledger& ledger() { return ledger_; }
  const Ledger& ledger() const { return ledger_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }
  void write_trace(std::ostream& out) const;
  std::uint64_t lost() const { return lost_; }
  std::uint64_t dropped() const { return dropped_; }

 private:
  using Slot = std::pair<SimTime, std::uint64_t>;

  Slot push(SimTime at, std::function<void()> fire);
  void record(NodeId node, TraceEvent event, const SendMeta& meta, std::size_t bytes, int hops,
              NodeId peer);
  bool draw_loss(NodeId from, NodeId to, const SendMeta& meta);
  void cycle(NodeId node, SimDuration period, std::uint64_t generation);

  const Topology& topo_;
  SimConfig config_;
  std::mt19937_64 rng_;
  SimTime now_{0};
  std::uint64_t seq_ = 0;
  std::map<Slot, std::function<void()>> queue_;
  std::map<TimerId, Slot> timers_;
  std::vector<Endpoint*> endpoints_;
  std::function<void(NodeId)> on_cycle_;
  std::uint64_t cycle_generation_ = 0;
  std::map<NodeId, SimDuration> phases_;
  Ledger ledger_;
  std::vector<TraceRecord> trace_;
  std::uint64_t lost_ = 0;
  std::uint64_t dropped_ = 0;
  std::map<std::uint64_t, std::uint32_t> occurrences_;
};

}  // namespace osp
