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

/// @file discovery.hpp
/// Gossip-based peer discovery: the peer table and the per-node engine that
/// runs the Registration / RegResponse / Ack exchange once per cycle.

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "osp/codec.hpp"
#include "osp/port.hpp"
#include "osp/types.hpp"

namespace osp {

enum class PeerClass : std::uint8_t { kNeighbor, kUnreachable, kUnknown };

std::string_view to_string(PeerClass c);

struct PetEntry {
  PeerIdentity peer;
  int ip_hops = -1;               // -1: not significant
  SimDuration latency_rtt{-1};    // -1: not significant
  SimTime timestamp{0};           // last gossip session involving the peer
  bool contacted = false;

  PeerClass peer_class() const {
    if (!contacted) return PeerClass::kUnknown;
    return ip_hops >= 0 ? PeerClass::kNeighbor : PeerClass::kUnreachable;
  }
};

/// Soft-state peer table. Never holds the owner's own pid; one entry per pid.
/// Iteration order is by pid, which keeps random selection reproducible.
class PeerTable {
 public:
  explicit PeerTable(Pid self, std::optional<std::size_t> unreachable_capacity = std::nullopt)
      : self_(self), unreachable_capacity_(unreachable_capacity) {}

  Pid self() const { return self_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const PetEntry* find(Pid pid) const;
  const std::map<Pid, PetEntry>& entries() const { return entries_; }

  /// Adds an uncontacted entry. Returns false for the owner or a known pid.
  bool insert_unknown(const PeerIdentity& peer, SimTime now);
  void mark_neighbor(const PeerIdentity& peer, int ip_hops, SimDuration rtt, SimTime now);
  /// Contacted, metrics not significant (out of scope).
  void mark_unreachable(const PeerIdentity& peer, SimTime now);
  void touch(Pid pid, SimTime now);

  std::vector<PeerIdentity> of_class(PeerClass c) const;
  std::size_t count(PeerClass c) const;

  /// Removes entries idle for longer than `lifetime`; returns them.
  std::vector<PetEntry> evict_idle(SimTime now, SimDuration lifetime);

 private:
  void enforce_unreachable_capacity();

  Pid self_;
  std::optional<std::size_t> unreachable_capacity_;
  std::map<Pid, PetEntry> entries_;
};

struct GossipConfig {
  SimDuration period{5s};
  SimDuration gossip_timer{5s};  // defaults to the period
  std::size_t pts_size = 2;
  double entry_lifetime_factor = 2.0;  // <= 0 disables expiry
  std::optional<std::size_t> unreachable_capacity;
  /// When set, a Registration that gets no answer marks its destination out
  /// of scope; otherwise the table is left untouched.
  bool timeout_marks_out_of_scope = false;
};

/// Per-entry lifetime: factor x |PeT| x period.
SimDuration entry_lifetime(const GossipConfig& config, std::size_t table_size);

using Rng = std::mt19937_64;

/// Uniform over unknown peers if any, otherwise over all contacted peers.
std::optional<PeerIdentity> select_gossip_destination(const PeerTable& pet, Rng& rng);

/// Up to `pts_size` identities, uniform without replacement, excluding
/// `counterpart`.
std::vector<PeerIdentity> select_pts(const PeerTable& pet, Pid counterpart, std::size_t pts_size,
                                     Rng& rng);

/// One node's discovery state machine. Advanced only by the owner's events.
class GossipEngine {
 public:
  struct InitiatorSession {
    SessionId id = 0;
    PeerIdentity destination;
    SimTime started_at{0};
    TimerId timer = 0;
  };

  struct ResponderSession {
    SessionId id = 0;
    PeerIdentity initiator;
    SimTime responded_at{0};
    TimerId timer = 0;
  };

  struct Stats {
    std::uint64_t cycles = 0;
    std::uint64_t registrations_sent = 0;
    std::uint64_t completed = 0;  // RegResponses accepted as initiator
    std::uint64_t aborted = 0;    // initiator sessions that timed out
    std::uint64_t intercepted = 0;
    std::uint64_t discarded = 0;  // unmatched responses/acks
  };

  GossipEngine(PeerIdentity self, std::optional<PeerIdentity> tracker, GossipConfig config,
               Port& port, std::uint64_t seed);

  GossipEngine(const GossipEngine&) = delete;
  GossipEngine& operator=(const GossipEngine&) = delete;

  /// Periodic cycle: expire, abort a pending session, start a new one.
  void on_cycle();
  /// An intercepted Registration; `hops` is the distance it travelled.
  void on_registration(const GossipMessage& reg, int hops);
  void on_reg_response(const GossipMessage& resp, int hops);
  void on_ack(const GossipMessage& ack, int hops);

  const PeerIdentity& self() const { return self_; }
  const PeerTable& table() const { return pet_; }
  const GossipConfig& config() const { return config_; }
  const Stats& stats() const { return stats_; }
  const std::optional<InitiatorSession>& active_session() const { return initiator_; }
  std::size_t responder_sessions() const { return responders_.size(); }
  std::set<NodeId> neighbor_nodes() const;

  /// Called after every change to the neighbor set.
  void set_neighbor_observer(std::function<void()> fn) { observer_ = std::move(fn); }

 private:
  void abort_initiator_session();
  void merge_shared(const std::vector<PeerIdentity>& shared);
  void notify() {
    if (observer_) observer_();
  }

  PeerIdentity self_;
  GossipConfig config_;
  Port& port_;
  Rng rng_;
  PeerTable pet_;
  std::optional<InitiatorSession> initiator_;
  std::map<SessionId, ResponderSession> responders_;
  Stats stats_;
  std::function<void()> observer_;
};

}  // namespace osp
