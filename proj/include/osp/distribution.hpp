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

/// @file distribution.hpp
/// Signaling distribution: the ST transport state machines (initiator,
/// on-path and off-path forwarder) and the SA logic that stacks status
/// elements on the way back.
///
/// Downstream, the initiator sends an on-path Query toward the destination;
/// every OSP node intercepting it answers, receives the SA Data, re-originates
/// the on-path Query and floods off-path Queries to PeT neighbors within the
/// remaining radius. Upstream, each node pushes the stacks it receives (depth
/// incremented) plus its own depth-0 element and returns a DataResponse.
///
/// Reply matching. Messages between two nodes are FIFO, so every reply from a
/// peer belongs to the earliest exchange with that peer still able to accept
/// it. Response and Error echo the Destination IP of the Query they answer,
/// which tells the on-path reply (echo = signaling destination) apart from an
/// off-path one (echo = the responder itself).

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "osp/codec.hpp"
#include "osp/discovery.hpp"
#include "osp/port.hpp"
#include "osp/types.hpp"

namespace osp {

constexpr std::uint8_t kStatusAbsent = 0x00;
constexpr std::uint8_t kStatusAvailable = 0x01;

/// Mock NFV instance: service type -> status code.
class SfRegistry {
 public:
  void set(std::uint16_t service, std::uint8_t status) { services_[service] = status; }
  void erase(std::uint16_t service) { services_.erase(service); }
  std::uint8_t lookup(std::uint16_t service) const {
    auto it = services_.find(service);
    return it == services_.end() ? kStatusAbsent : it->second;
  }

 private:
  std::map<std::uint16_t, std::uint8_t> services_;
};

struct DistributionConfig {
  SimDuration wait_resp_timeout{500ms};
  SimDuration st_session_timeout{2s};
  /// A Query unanswered for this long counts as an error toward n.
  SimDuration query_timeout{300ms};
  /// Data/DataResponse between peered nodes bypass the loss model.
  bool reliable_data_mode = false;
};

enum class StState : std::uint8_t {
  kIdle,
  kActive,  // initiator
  kOnPathForwarder,
  kOffPathForwarder,
  kOnPathActive,
  kOffPathActive,
};

enum class SaState : std::uint8_t { kIdle, kWaitNotification, kWaitResponses };

enum class StRole : std::uint8_t { kInitiator, kOnPathForwarder, kOffPathForwarder };

std::string_view to_string(StState s);
std::string_view to_string(SaState s);
std::string_view to_string(StRole r);

/// Why a session record left a node.
enum class SessionEnd : std::uint8_t {
  kCompleted,     // resp_counter + error_counter reached n
  kLeaf,          // no downstream targets
  kWaitTimeout,   // WaitResp timer fired
  kReplaced,      // aborted by a better query
  kExpired,       // accepted but Data never arrived
};

std::string_view to_string(SessionEnd e);

struct SessionReport {
  SessionId session = 0;
  StRole role = StRole::kOffPathForwarder;
  SessionEnd end = SessionEnd::kCompleted;
  int radius = 0;
  int n = 0;
  int resp_counter = 0;
  int error_counter = 0;
  bool data_received = false;
};

/// What the querying application gets back.
struct ProbeResult {
  SessionId session = 0;
  bool complete = false;  // false: WaitResp fired first
  std::vector<SfStatusElement> stack;     // raw, in push order
  std::vector<SfStatusElement> elements;  // one per node, smallest depth
  SimTime started{0};
  SimTime finished{0};
};

/// Hooks for instrumentation; all optional.
struct DistributionObserver {
  std::function<void(SessionId)> data_processed;
  std::function<void(const SessionReport&)> session_closed;
  std::function<void(StState, StState)> st_transition;
  std::function<void(SaState, SaState)> sa_transition;
};

/// One node's ST + SA distribution logic. Sessions are independent records
/// keyed by (SA identifier, session id).
class DistributionEngine {
 public:
  DistributionEngine(PeerIdentity self, const PeerTable& pet, DistributionConfig config, Port& port,
                     std::uint64_t seed);

  DistributionEngine(const DistributionEngine&) = delete;
  DistributionEngine& operator=(const DistributionEngine&) = delete;

  SfRegistry& registry() { return registry_; }
  const DistributionConfig& config() const { return config_; }
  void set_observer(DistributionObserver o) { observer_ = std::move(o); }

  /// Starts a session as initiator. Throws std::invalid_argument on a
  /// negative radius or an already-active session id.
  SessionId submit(const SaMessage& request, Ipv4Address destination, int radius,
                   std::function<void(const ProbeResult&)> on_done,
                   std::uint16_t sa_identifier = 1, std::optional<SessionId> session = std::nullopt);

  void on_message(const StMessage& m, int hops);

  std::size_t active_sessions() const { return sessions_.size(); }
  /// ST state of a live session, kIdle when none.
  StState st_state(std::uint16_t sa_identifier, SessionId session) const;
  SaState sa_state(std::uint16_t sa_identifier, SessionId session) const;

 private:
  using Key = std::pair<std::uint16_t, SessionId>;

  struct Exchange {
    // kOrphaned: accepted downstream but no Data will follow
    enum class Phase : std::uint8_t { kQueried, kDataSent, kOrphaned, kDone };
    std::uint64_t id = 0;
    std::optional<PeerIdentity> peer;  // unset until an on-path reply binds it
    Ipv4Address query_destination;
    bool on_path = false;
    bool current = true;  // belongs to the live generation
    bool counted = false;  // already added to resp/error counters
    Phase phase = Phase::kQueried;
    TimerId timer = 0;
  };

  struct Session {
    Key key;
    std::uint64_t epoch = 0;
    StRole role = StRole::kOffPathForwarder;
    StState st = StState::kIdle;
    SaState sa = SaState::kIdle;
    std::optional<PeerIdentity> upstream;
    Ipv4Address answered_destination;  // Destination IP of the accepted Query
    Ipv4Address signaling_destination;
    int radius = 0;
    bool data_received = false;
    Bytes request_payload;
    std::uint16_t service_type = 0;
    int n = 0;
    int resp_counter = 0;
    int error_counter = 0;
    std::vector<SfStatusElement> stack;
    std::vector<Exchange> exchanges;  // send order
    TimerId wait_timer = 0;
    TimerId expiry_timer = 0;
    // initiator only
    std::function<void(const ProbeResult&)> on_done;
    SimTime started{0};
  };

  struct Tombstone {
    StRole role;
    int radius;
    SimTime until;
  };

  void on_query(const StMessage& q);
  void on_reply(const StMessage& m);
  void on_data(const StMessage& d);

  void accept(Session& s, StRole role, const StMessage& query);
  void replace_session(Session& s);
  void distribute(Session& s);
  void send_query(Session& s, std::optional<PeerIdentity> peer, Ipv4Address to, int radius,
                  bool on_path);
  void maybe_complete(Session& s);
  void finish(Session& s, SessionEnd end);
  void expire_query(const Key& key, std::uint64_t epoch, std::uint64_t exchange);
  void expire_session(const Key& key, std::uint64_t epoch);
  void report(const Session& s, SessionEnd end);

  Session* find(const Key& key);
  Session* find_by_session(SessionId session);
  const Tombstone* tombstone(const Key& key);

  void set_st(Session& s, StState to);
  void set_sa(Session& s, SaState to);
  void send(const StMessage& m, Ipv4Address to, bool interceptable);
  StMessage make(StMessage::Kind kind, const Session& s, Pid destination,
                 Ipv4Address destination_ip) const;
  void reply(StMessage::Kind kind, const Session& s, const PeerIdentity& to, Ipv4Address echo,
             StErrorCode code = StErrorCode::kRejected);
  void reject(const StMessage& q, StErrorCode code);

  PeerIdentity self_;
  const PeerTable& pet_;
  DistributionConfig config_;
  Port& port_;
  std::mt19937_64 rng_;
  SfRegistry registry_;
  DistributionObserver observer_;
  std::map<Key, Session> sessions_;
  std::map<Key, Tombstone> tombstones_;
  std::uint64_t next_epoch_ = 1;
  std::uint64_t next_exchange_ = 1;
};

}  // namespace osp
