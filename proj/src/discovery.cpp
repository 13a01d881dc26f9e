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

#include "osp/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

namespace osp {

std::string_view to_string(PeerClass c) {
  switch (c) {
    case PeerClass::kNeighbor: return "neighbor";
    case PeerClass::kUnreachable: return "unreachable";
    case PeerClass::kUnknown: return "unknown";
  }
  return "?";
}

// PeerTable -----------------------------------------------------------------

const PetEntry* PeerTable::find(Pid pid) const {
  auto it = entries_.find(pid);
  return it == entries_.end() ? nullptr : &it->second;
}

bool PeerTable::insert_unknown(const PeerIdentity& peer, SimTime now) {
  if (peer.pid == self_ || entries_.count(peer.pid)) return false;
  PetEntry e;
  e.peer = peer;
  e.timestamp = now;
  entries_.emplace(peer.pid, e);
  return true;
}

void PeerTable::mark_neighbor(const PeerIdentity& peer, int ip_hops, SimDuration rtt, SimTime now) {
  if (peer.pid == self_) return;
  auto& e = entries_[peer.pid];
  e.peer = peer;
  e.ip_hops = ip_hops;
  e.latency_rtt = rtt;
  e.timestamp = now;
  e.contacted = true;
}

void PeerTable::mark_unreachable(const PeerIdentity& peer, SimTime now) {
  if (peer.pid == self_) return;
  auto& e = entries_[peer.pid];
  e.peer = peer;
  e.ip_hops = -1;
  e.latency_rtt = SimDuration{-1};
  e.timestamp = now;
  e.contacted = true;
  enforce_unreachable_capacity();
}

void PeerTable::touch(Pid pid, SimTime now) {
  if (auto it = entries_.find(pid); it != entries_.end()) it->second.timestamp = now;
}

std::vector<PeerIdentity> PeerTable::of_class(PeerClass c) const {
  std::vector<PeerIdentity> out;
  for (const auto& [pid, e] : entries_) {
    if (e.peer_class() == c) out.push_back(e.peer);
  }
  return out;
}

std::size_t PeerTable::count(PeerClass c) const {
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(), [c](const auto& kv) { return kv.second.peer_class() == c; }));
}

std::vector<PetEntry> PeerTable::evict_idle(SimTime now, SimDuration lifetime) {
  std::vector<PetEntry> evicted;
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (now - it->second.timestamp > lifetime) {
      evicted.push_back(it->second);
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
  return evicted;
}

void PeerTable::enforce_unreachable_capacity() {
  if (!unreachable_capacity_) return;
  while (count(PeerClass::kUnreachable) > *unreachable_capacity_) {
    auto oldest = entries_.end();
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
      if (it->second.peer_class() != PeerClass::kUnreachable) continue;
      if (oldest == entries_.end() || it->second.timestamp < oldest->second.timestamp) oldest = it;
    }
    entries_.erase(oldest);
  }
}

// Selection -----------------------------------------------------------------

SimDuration entry_lifetime(const GossipConfig& config, std::size_t table_size) {
  const double periods = config.entry_lifetime_factor * static_cast<double>(table_size);
  return SimDuration{static_cast<std::int64_t>(std::llround(periods * config.period.count()))};
}

std::optional<PeerIdentity> select_gossip_destination(const PeerTable& pet, Rng& rng) {
  auto pool = pet.of_class(PeerClass::kUnknown);
  if (pool.empty()) {
    for (const auto& [pid, e] : pet.entries()) pool.push_back(e.peer);
  }
  if (pool.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

std::vector<PeerIdentity> select_pts(const PeerTable& pet, Pid counterpart, std::size_t pts_size,
                                     Rng& rng) {
  std::vector<PeerIdentity> eligible;
  for (const auto& [pid, e] : pet.entries()) {
    if (pid != counterpart) eligible.push_back(e.peer);
  }
  std::vector<PeerIdentity> out;
  std::sample(eligible.begin(), eligible.end(), std::back_inserter(out), pts_size, rng);
  return out;
}

// GossipEngine --------------------------------------------------------------

GossipEngine::GossipEngine(PeerIdentity self, std::optional<PeerIdentity> tracker,
                           GossipConfig config, Port& port, std::uint64_t seed)
    : self_(self),
      config_(config),
      port_(port),
      rng_(seed),
      pet_(self.pid, config.unreachable_capacity) {
  if (tracker) pet_.insert_unknown(*tracker, port_.now());
}

std::set<NodeId> GossipEngine::neighbor_nodes() const {
  std::set<NodeId> out;
  for (const auto& p : pet_.of_class(PeerClass::kNeighbor)) out.insert(p.node());
  return out;
}

void GossipEngine::on_cycle() {
  ++stats_.cycles;
  const auto now = port_.now();
  if (config_.entry_lifetime_factor > 0) {
    const auto evicted = pet_.evict_idle(now, entry_lifetime(config_, pet_.size()));
    const bool lost_neighbor = std::any_of(evicted.begin(), evicted.end(), [](const PetEntry& e) {
      return e.peer_class() == PeerClass::kNeighbor;
    });
    if (lost_neighbor) notify();
  }
  if (initiator_) abort_initiator_session();

  const auto destination = select_gossip_destination(pet_, rng_);
  if (!destination) return;

  GossipMessage reg;
  reg.kind = GossipMessage::Kind::kRegistration;
  reg.source = self_.pid;
  reg.destination = destination->pid;
  reg.source_ip = self_.ip;
  reg.session = rng_();
  reg.metric = -1;
  reg.pts = select_pts(pet_, destination->pid, config_.pts_size, rng_);

  InitiatorSession s;
  s.id = reg.session;
  s.destination = *destination;
  s.started_at = now;
  s.timer = port_.start_timer(config_.gossip_timer, [this, id = s.id] {
    if (initiator_ && initiator_->id == id) {
      initiator_->timer = 0;
      abort_initiator_session();
    }
  });
  initiator_ = s;
  ++stats_.registrations_sent;
  port_.transmit(reg, destination->ip, /*interceptable=*/true);
}

void GossipEngine::abort_initiator_session() {
  if (initiator_->timer != 0) port_.cancel_timer(initiator_->timer);
  if (config_.timeout_marks_out_of_scope) {
    const bool was_neighbor = [&] {
      const auto* e = pet_.find(initiator_->destination.pid);
      return e != nullptr && e->peer_class() == PeerClass::kNeighbor;
    }();
    pet_.mark_unreachable(initiator_->destination, port_.now());
    if (was_neighbor) notify();
  }
  ++stats_.aborted;
  initiator_.reset();
}

void GossipEngine::merge_shared(const std::vector<PeerIdentity>& shared) {
  for (const auto& p : shared) pet_.insert_unknown(p, port_.now());
}

void GossipEngine::on_registration(const GossipMessage& reg, int hops) {
  if (reg.source == self_.pid) return;
  ++stats_.intercepted;
  const auto now = port_.now();
  const PeerIdentity initiator{reg.source, reg.source_ip};
  pet_.insert_unknown(initiator, now);
  merge_shared(reg.pts);

  GossipMessage resp;
  resp.kind = GossipMessage::Kind::kRegResponse;
  resp.source = self_.pid;
  resp.destination = reg.source;
  resp.source_ip = self_.ip;
  resp.session = reg.session;
  resp.metric = hops;
  resp.pts = select_pts(pet_, reg.source, config_.pts_size, rng_);

  if (auto old = responders_.find(reg.session); old != responders_.end()) {
    port_.cancel_timer(old->second.timer);
    responders_.erase(old);
  }
  ResponderSession s;
  s.id = reg.session;
  s.initiator = initiator;
  s.responded_at = now;
  s.timer = port_.start_timer(config_.gossip_timer, [this, id = s.id] { responders_.erase(id); });
  responders_.emplace(s.id, s);
  port_.transmit(resp, reg.source_ip, /*interceptable=*/false);
}

void GossipEngine::on_reg_response(const GossipMessage& resp, int hops) {
  if (!initiator_ || initiator_->id != resp.session || resp.destination != self_.pid) {
    ++stats_.discarded;
    return;
  }
  const auto now = port_.now();
  const PeerIdentity responder{resp.source, resp.source_ip};
  pet_.mark_neighbor(responder, hops, now - initiator_->started_at, now);
  if (responder.pid != initiator_->destination.pid) {
    pet_.mark_unreachable(initiator_->destination, now);
  }
  merge_shared(resp.pts);

  GossipMessage ack;
  ack.kind = GossipMessage::Kind::kAck;
  ack.source = self_.pid;
  ack.destination = resp.source;
  ack.session = resp.session;

  port_.cancel_timer(initiator_->timer);
  initiator_.reset();
  ++stats_.completed;
  port_.transmit(ack, resp.source_ip, /*interceptable=*/false);
  notify();
}

void GossipEngine::on_ack(const GossipMessage& ack, int hops) {
  auto it = responders_.find(ack.session);
  if (it == responders_.end() || it->second.initiator.pid != ack.source) {
    ++stats_.discarded;
    return;
  }
  const auto now = port_.now();
  const auto& initiator = it->second.initiator;
  if (const auto* e = pet_.find(initiator.pid); e && e->peer_class() == PeerClass::kNeighbor) {
    pet_.mark_neighbor(initiator, hops, now - it->second.responded_at, now);
  } else {
    pet_.touch(initiator.pid, now);
  }
  port_.cancel_timer(it->second.timer);
  responders_.erase(it);
}

}  // namespace osp
