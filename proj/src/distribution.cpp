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

#include "osp/distribution.hpp"

#include <algorithm>
#include <stdexcept>

namespace osp {

std::string_view to_string(StState s) {
  switch (s) {
    case StState::kIdle: return "IDLE";
    case StState::kActive: return "ACTIVE";
    case StState::kOnPathForwarder: return "ON_PATH_FORWARDER";
    case StState::kOffPathForwarder: return "OFF_PATH_FORWARDER";
    case StState::kOnPathActive: return "ON_PATH_ACTIVE";
    case StState::kOffPathActive: return "OFF_PATH_ACTIVE";
  }
  return "?";
}

std::string_view to_string(SaState s) {
  switch (s) {
    case SaState::kIdle: return "IDLE";
    case SaState::kWaitNotification: return "WAIT_NOTIFICATION";
    case SaState::kWaitResponses: return "WAIT_RESPONSES";
  }
  return "?";
}

std::string_view to_string(StRole r) {
  switch (r) {
    case StRole::kInitiator: return "initiator";
    case StRole::kOnPathForwarder: return "on-path";
    case StRole::kOffPathForwarder: return "off-path";
  }
  return "?";
}

std::string_view to_string(SessionEnd e) {
  switch (e) {
    case SessionEnd::kCompleted: return "completed";
    case SessionEnd::kLeaf: return "leaf";
    case SessionEnd::kWaitTimeout: return "wait-timeout";
    case SessionEnd::kReplaced: return "replaced";
    case SessionEnd::kExpired: return "expired";
  }
  return "?";
}

namespace {

enum class ReplyKind { kResponse, kRejected, kAborted, kDataResponse };

bool is_active(StState s) {
  return s == StState::kActive || s == StState::kOnPathActive || s == StState::kOffPathActive;
}

}  // namespace

DistributionEngine::DistributionEngine(PeerIdentity self, const PeerTable& pet,
                                       DistributionConfig config, Port& port, std::uint64_t seed)
    : self_(self), pet_(pet), config_(config), port_(port), rng_(seed) {}

// Lookup ----------------------------------------------------------------------

DistributionEngine::Session* DistributionEngine::find(const Key& key) {
  auto it = sessions_.find(key);
  return it == sessions_.end() ? nullptr : &it->second;
}

DistributionEngine::Session* DistributionEngine::find_by_session(SessionId session) {
  for (auto& [key, s] : sessions_) {
    if (key.second == session) return &s;
  }
  return nullptr;
}

const DistributionEngine::Tombstone* DistributionEngine::tombstone(const Key& key) {
  auto it = tombstones_.find(key);
  if (it == tombstones_.end()) return nullptr;
  if (it->second.until < port_.now()) {
    tombstones_.erase(it);
    return nullptr;
  }
  return &it->second;
}

StState DistributionEngine::st_state(std::uint16_t sa_identifier, SessionId session) const {
  auto it = sessions_.find({sa_identifier, session});
  return it == sessions_.end() ? StState::kIdle : it->second.st;
}

SaState DistributionEngine::sa_state(std::uint16_t sa_identifier, SessionId session) const {
  auto it = sessions_.find({sa_identifier, session});
  return it == sessions_.end() ? SaState::kIdle : it->second.sa;
}

// Plumbing --------------------------------------------------------------------

void DistributionEngine::set_st(Session& s, StState to) {
  if (s.st == to) return;
  if (observer_.st_transition) observer_.st_transition(s.st, to);
  s.st = to;
}

void DistributionEngine::set_sa(Session& s, SaState to) {
  if (s.sa == to) return;
  if (observer_.sa_transition) observer_.sa_transition(s.sa, to);
  s.sa = to;
}

void DistributionEngine::send(const StMessage& m, Ipv4Address to, bool interceptable) {
  port_.transmit(m, to, interceptable);
}

StMessage DistributionEngine::make(StMessage::Kind kind, const Session& s, Pid destination,
                                   Ipv4Address destination_ip) const {
  StMessage m;
  m.kind = kind;
  m.source = self_.pid;
  m.destination = destination;
  m.source_ip = self_.ip;
  m.destination_ip = destination_ip;
  m.session = s.key.second;
  m.sa_identifier = s.key.first;
  return m;
}

void DistributionEngine::reply(StMessage::Kind kind, const Session& s, const PeerIdentity& to,
                               Ipv4Address echo, StErrorCode code) {
  StMessage m = make(kind, s, to.pid, echo);
  if (kind == StMessage::Kind::kError) m.error_code = static_cast<std::uint8_t>(code);
  send(m, to.ip, false);
}

void DistributionEngine::reject(const StMessage& q, StErrorCode code) {
  StMessage m;
  m.kind = StMessage::Kind::kError;
  m.source = self_.pid;
  m.destination = q.source;
  m.source_ip = self_.ip;
  m.destination_ip = q.destination_ip;
  m.session = q.session;
  m.sa_identifier = q.sa_identifier;
  m.error_code = static_cast<std::uint8_t>(code);
  send(m, q.source_ip, false);
}

void DistributionEngine::report(const Session& s, SessionEnd end) {
  if (!observer_.session_closed) return;
  SessionReport r;
  r.session = s.key.second;
  r.role = s.role;
  r.end = end;
  r.radius = s.radius;
  r.n = s.n;
  r.resp_counter = s.resp_counter;
  r.error_counter = s.error_counter;
  r.data_received = s.data_received;
  observer_.session_closed(r);
}

// Initiator -------------------------------------------------------------------

SessionId DistributionEngine::submit(const SaMessage& request, Ipv4Address destination, int radius,
                                     std::function<void(const ProbeResult&)> on_done,
                                     std::uint16_t sa_identifier,
                                     std::optional<SessionId> session) {
  if (radius < 0 || radius > 255) throw std::invalid_argument("radius out of range");
  const Key key{sa_identifier, session.value_or(rng_())};
  if (sessions_.count(key)) throw std::invalid_argument("session already active");
  tombstones_.erase(key);

  Session& s = sessions_[key];
  s.key = key;
  s.epoch = next_epoch_++;
  s.role = StRole::kInitiator;
  s.signaling_destination = destination;
  s.radius = radius;
  s.data_received = true;
  s.request_payload = encode(request);
  s.service_type = request.service_type;
  s.on_done = std::move(on_done);
  s.started = port_.now();
  set_st(s, StState::kActive);
  set_sa(s, SaState::kWaitNotification);
  if (observer_.data_processed) observer_.data_processed(key.second);
  distribute(s);
  return key.second;
}

// Downstream ------------------------------------------------------------------

void DistributionEngine::on_message(const StMessage& m, int /*hops*/) {
  switch (m.kind) {
    case StMessage::Kind::kQuery: on_query(m); break;
    case StMessage::Kind::kData: on_data(m); break;
    case StMessage::Kind::kResponse:
    case StMessage::Kind::kError:
    case StMessage::Kind::kDataResponse: on_reply(m); break;
  }
}

void DistributionEngine::on_query(const StMessage& q) {
  if (q.source == self_.pid) return;
  if (!q.on_path && q.destination != self_.pid) return;
  const Key key{q.sa_identifier, q.session};
  const StRole role = q.on_path ? StRole::kOnPathForwarder : StRole::kOffPathForwarder;

  // Only an off-path record can be displaced: by any on-path query, or by an
  // off-path query with a strictly larger radius.
  auto displaces = [&](StRole held, int held_radius) {
    if (held != StRole::kOffPathForwarder) return false;
    return q.on_path || q.radius > held_radius;
  };

  if (Session* s = find(key)) {
    if (!displaces(s->role, s->radius)) {
      reject(q, StErrorCode::kRejected);
      return;
    }
    replace_session(*s);
    accept(*s, role, q);
    return;
  }
  if (const Tombstone* t = tombstone(key)) {
    if (!displaces(t->role, t->radius)) {
      reject(q, StErrorCode::kRejected);
      return;
    }
    tombstones_.erase(key);
  }
  Session& s = sessions_[key];
  s.key = key;
  accept(s, role, q);
}

void DistributionEngine::accept(Session& s, StRole role, const StMessage& q) {
  s.epoch = next_epoch_++;
  s.role = role;
  set_st(s, role == StRole::kOnPathForwarder ? StState::kOnPathForwarder
                                             : StState::kOffPathForwarder);
  s.upstream = PeerIdentity{q.source, q.source_ip};
  s.answered_destination = q.destination_ip;
  s.signaling_destination = q.on_path ? q.destination_ip : Ipv4Address{};
  s.radius = q.radius;
  s.data_received = false;
  s.request_payload.clear();
  s.service_type = 0;
  s.n = s.resp_counter = s.error_counter = 0;
  s.stack.clear();
  s.expiry_timer = port_.start_timer(config_.st_session_timeout,
                                     [this, key = s.key, epoch = s.epoch] {
                                       expire_session(key, epoch);
                                     });
  reply(StMessage::Kind::kResponse, s, *s.upstream, q.destination_ip);
}

void DistributionEngine::replace_session(Session& s) {
  reply(StMessage::Kind::kError, s, *s.upstream, s.answered_destination, StErrorCode::kAborted);
  report(s, SessionEnd::kReplaced);
  if (s.wait_timer) port_.cancel_timer(s.wait_timer);
  if (s.expiry_timer) port_.cancel_timer(s.expiry_timer);
  s.wait_timer = s.expiry_timer = 0;
  set_sa(s, SaState::kIdle);
  std::erase_if(s.exchanges, [](const Exchange& ex) { return ex.phase == Exchange::Phase::kDone; });
  for (auto& ex : s.exchanges) {
    ex.current = false;
    if (ex.timer) port_.cancel_timer(ex.timer);
    ex.timer = 0;
  }
}

void DistributionEngine::expire_session(const Key& key, std::uint64_t epoch) {
  Session* s = find(key);
  if (!s || s->epoch != epoch || s->data_received) return;
  s->expiry_timer = 0;
  reply(StMessage::Kind::kError, *s, *s->upstream, s->answered_destination, StErrorCode::kAborted);
  report(*s, SessionEnd::kExpired);
  for (auto& ex : s->exchanges) {
    if (ex.timer) port_.cancel_timer(ex.timer);
  }
  set_st(*s, StState::kIdle);
  tombstones_[key] = Tombstone{s->role, s->radius, port_.now() + config_.st_session_timeout};
  sessions_.erase(key);
}

void DistributionEngine::on_data(const StMessage& d) {
  Session* s = find({d.sa_identifier, d.session});
  if (!s || s->role == StRole::kInitiator || s->data_received) return;
  if (d.destination != self_.pid || s->upstream->pid != d.source) return;

  s->data_received = true;
  if (s->expiry_timer) port_.cancel_timer(s->expiry_timer);
  s->expiry_timer = 0;
  s->request_payload = d.sa_payload;
  if (auto req = decode_sa(d.sa_payload); std::holds_alternative<SaMessage>(req)) {
    s->service_type = std::get<SaMessage>(req).service_type;
  }
  set_sa(*s, SaState::kWaitNotification);
  if (observer_.data_processed) observer_.data_processed(d.session);
  distribute(*s);
}

void DistributionEngine::send_query(Session& s, std::optional<PeerIdentity> peer, Ipv4Address to,
                                    int radius, bool on_path) {
  Exchange ex;
  ex.id = next_exchange_++;
  ex.peer = peer;
  ex.query_destination = to;
  ex.on_path = on_path;
  ex.timer = port_.start_timer(config_.query_timeout,
                               [this, key = s.key, epoch = s.epoch, id = ex.id] {
                                 expire_query(key, epoch, id);
                               });
  s.exchanges.push_back(ex);
  ++s.n;

  StMessage q = make(StMessage::Kind::kQuery, s, peer ? peer->pid : Pid{}, to);
  q.on_path = on_path;
  q.radius = radius;
  send(q, to, /*interceptable=*/on_path);
}

void DistributionEngine::distribute(Session& s) {
  const bool on_path = s.role != StRole::kOffPathForwarder;
  if (on_path && s.signaling_destination != self_.ip) {
    send_query(s, std::nullopt, s.signaling_destination, s.radius, true);
  }
  for (const auto& [pid, e] : pet_.entries()) {
    if (e.peer_class() != PeerClass::kNeighbor || e.ip_hops > s.radius) continue;
    if (s.upstream && s.upstream->pid == pid) continue;
    send_query(s, e.peer, e.peer.ip, s.radius - e.ip_hops, false);
  }

  if (s.role == StRole::kOnPathForwarder) set_st(s, StState::kOnPathActive);
  if (s.role == StRole::kOffPathForwarder) set_st(s, StState::kOffPathActive);
  if (s.n == 0) {
    finish(s, SessionEnd::kLeaf);
    return;
  }
  set_sa(s, SaState::kWaitResponses);
  s.wait_timer = port_.start_timer(config_.wait_resp_timeout, [this, key = s.key,
                                                               epoch = s.epoch] {
    Session* cur = find(key);
    if (!cur || cur->epoch != epoch) return;
    cur->wait_timer = 0;
    finish(*cur, SessionEnd::kWaitTimeout);
  });
}

void DistributionEngine::expire_query(const Key& key, std::uint64_t epoch, std::uint64_t exchange) {
  Session* s = find(key);
  if (!s || s->epoch != epoch) return;
  auto it = std::find_if(s->exchanges.begin(), s->exchanges.end(),
                         [&](const Exchange& ex) { return ex.id == exchange; });
  if (it == s->exchanges.end()) return;
  it->timer = 0;
  if (it->phase != Exchange::Phase::kQueried || !it->current || it->counted) return;
  it->counted = true;
  ++s->error_counter;
  maybe_complete(*s);
}

// Upstream --------------------------------------------------------------------

void DistributionEngine::on_reply(const StMessage& m) {
  if (m.destination != self_.pid) return;
  Session* s = m.kind == StMessage::Kind::kError ? find_by_session(m.session)
                                                 : find({m.sa_identifier, m.session});
  if (!s) return;

  ReplyKind kind = ReplyKind::kResponse;
  if (m.kind == StMessage::Kind::kDataResponse) kind = ReplyKind::kDataResponse;
  if (m.kind == StMessage::Kind::kError) {
    kind = m.error_code == static_cast<std::uint8_t>(StErrorCode::kAborted) ? ReplyKind::kAborted
                                                                            : ReplyKind::kRejected;
  }
  using Phase = Exchange::Phase;
  auto accepts = [kind](Phase p, bool strict) {
    switch (p) {
      case Phase::kQueried:
        return kind == ReplyKind::kResponse || kind == ReplyKind::kRejected ||
               (!strict && kind == ReplyKind::kAborted);
      case Phase::kDataSent:
        return kind == ReplyKind::kDataResponse || kind == ReplyKind::kAborted;
      case Phase::kOrphaned:
        return kind == ReplyKind::kAborted || (!strict && kind == ReplyKind::kDataResponse);
      case Phase::kDone: return false;
    }
    return false;
  };
  const bool echoed = kind != ReplyKind::kDataResponse;
  auto candidate = [&](const Exchange& ex) {
    if (ex.peer) return ex.peer->pid == m.source;
    return echoed && ex.on_path && ex.query_destination == m.destination_ip;
  };

  Exchange* ex = nullptr;
  for (bool strict : {true, false}) {
    for (auto& e : s->exchanges) {
      if (candidate(e) && accepts(e.phase, strict)) {
        ex = &e;
        break;
      }
    }
    if (ex) break;
  }
  if (!ex) return;

  if (!ex->peer) ex->peer = PeerIdentity{m.source, m.source_ip};
  if (ex->timer && kind != ReplyKind::kDataResponse) {
    port_.cancel_timer(ex->timer);
    ex->timer = 0;
  }
  const bool counts = ex->current && !ex->counted;

  switch (kind) {
    case ReplyKind::kResponse:
      if (counts && is_active(s->st)) {
        ex->phase = Phase::kDataSent;
        StMessage data = make(StMessage::Kind::kData, *s, ex->peer->pid, ex->peer->ip);
        data.sa_payload = s->request_payload;
        send(data, ex->peer->ip, false);
      } else {
        ex->phase = Phase::kOrphaned;
      }
      return;
    case ReplyKind::kDataResponse:
      ex->phase = Phase::kDone;
      if (!counts) return;
      ex->counted = true;
      ++s->resp_counter;
      if (auto r = decode_sa(m.sa_payload); std::holds_alternative<SaMessage>(r)) {
        for (auto e : std::get<SaMessage>(r).status_elements) {
          e.depth = std::min(e.depth + 1, 255);
          s->stack.push_back(e);
        }
      }
      break;
    case ReplyKind::kRejected:
    case ReplyKind::kAborted:
      ex->phase = Phase::kDone;
      if (!counts) return;
      ex->counted = true;
      ++s->error_counter;
      break;
  }
  maybe_complete(*s);
}

void DistributionEngine::maybe_complete(Session& s) {
  if (!is_active(s.st) || s.sa != SaState::kWaitResponses) return;
  if (s.resp_counter + s.error_counter >= s.n) finish(s, SessionEnd::kCompleted);
}

void DistributionEngine::finish(Session& s, SessionEnd end) {
  for (auto& ex : s.exchanges) {
    if (ex.timer) port_.cancel_timer(ex.timer);
  }
  if (s.wait_timer) port_.cancel_timer(s.wait_timer);
  if (s.expiry_timer) port_.cancel_timer(s.expiry_timer);
  s.stack.push_back(SfStatusElement{self_.node(), registry_.lookup(s.service_type), 0});
  report(s, end);

  std::function<void(const ProbeResult&)> done;
  ProbeResult result;
  if (s.role == StRole::kInitiator) {
    result.session = s.key.second;
    result.complete = end != SessionEnd::kWaitTimeout;
    result.stack = s.stack;
    std::map<NodeId, SfStatusElement> best;
    for (const auto& e : s.stack) {
      auto [it, fresh] = best.emplace(e.node, e);
      if (!fresh && e.depth < it->second.depth) it->second = e;
    }
    for (const auto& [node, e] : best) result.elements.push_back(e);
    result.started = s.started;
    result.finished = port_.now();
    done = std::move(s.on_done);
    set_st(s, StState::kIdle);
  } else {
    SaMessage response;
    response.kind = SaMessage::Kind::kResponse;
    response.status_elements = s.stack;
    StMessage m = make(StMessage::Kind::kDataResponse, s, s.upstream->pid, s.upstream->ip);
    m.sa_payload = encode(response);
    send(m, s.upstream->ip, false);
    if (s.st == StState::kOnPathActive) set_st(s, StState::kOnPathForwarder);
    if (s.st == StState::kOffPathActive) set_st(s, StState::kOffPathForwarder);
    set_st(s, StState::kIdle);
  }
  set_sa(s, SaState::kIdle);
  const Key key = s.key;
  tombstones_[key] = Tombstone{s.role, s.radius, port_.now() + config_.st_session_timeout};
  sessions_.erase(key);
  if (done) done(result);
}

}  // namespace osp
