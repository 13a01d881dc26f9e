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

#include "osp/simnet.hpp"

#include <cinttypes>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace osp {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string_view to_string(TraceEvent e) {
  switch (e) {
    case TraceEvent::kSend: return "send";
    case TraceEvent::kDeliver: return "deliver";
    case TraceEvent::kDrop: return "drop";
    case TraceEvent::kLoss: return "loss";
    case TraceEvent::kCycle: return "cycle";
  }
  return "?";
}

std::string format(const TraceRecord& r) {
  char buf[160];
  const auto type = r.event == TraceEvent::kCycle ? std::string_view{"-"} : to_string(r.type);
  std::snprintf(buf, sizeof buf, "%" PRId64 " %" PRIu32 " %.*s %016" PRIx64 " %.*s %zu %d %" PRIu32,
                static_cast<std::int64_t>(r.time.count()), r.node.value,
                static_cast<int>(to_string(r.event).size()), to_string(r.event).data(), r.session,
                static_cast<int>(type.size()), type.data(), r.bytes, r.hops, r.peer.value);
  return buf;
}

// Ledger --------------------------------------------------------------------

LedgerCell& LedgerCell::operator+=(const LedgerCell& o) {
  messages += o.messages;
  bytes += o.bytes;
  byte_hops += o.byte_hops;
  nominal_byte_hops += o.nominal_byte_hops;
  return *this;
}

void Ledger::add(MessageType type, SessionId session, std::size_t bytes, int hops,
                 std::optional<int> nominal) {
  LedgerCell c;
  c.messages = 1;
  c.bytes = bytes;
  c.byte_hops = static_cast<std::uint64_t>(bytes) * static_cast<std::uint64_t>(hops);
  if (nominal) c.nominal_byte_hops = static_cast<std::uint64_t>(*nominal) * hops;
  by_type_[type] += c;
  by_session_[session] += c;
}

LedgerCell Ledger::total() const {
  LedgerCell out;
  for (const auto& [t, c] : by_type_) out += c;
  return out;
}

LedgerCell Ledger::of_type(MessageType type) const {
  auto it = by_type_.find(type);
  return it == by_type_.end() ? LedgerCell{} : it->second;
}

LedgerCell Ledger::of_session(SessionId session) const {
  auto it = by_session_.find(session);
  return it == by_session_.end() ? LedgerCell{} : it->second;
}

LedgerCell Ledger::gossip() const {
  LedgerCell out;
  for (auto t : {MessageType::kRegistration, MessageType::kRegResponse, MessageType::kAck}) {
    out += of_type(t);
  }
  return out;
}

LedgerCell Ledger::signaling() const {
  LedgerCell out;
  for (auto t : {MessageType::kQuery, MessageType::kResponse, MessageType::kError,
                 MessageType::kData, MessageType::kDataResponse}) {
    out += of_type(t);
  }
  return out;
}

void Ledger::clear() {
  by_type_.clear();
  by_session_.clear();
}

// Network -------------------------------------------------------------------

Network::Network(const Topology& topo, SimConfig config)
    : topo_(topo), config_(config), rng_(config.seed), endpoints_(topo.size(), nullptr) {
  if (config.ip_overhead < 0) throw std::invalid_argument("negative ip overhead");
  set_loss_probability(config.loss_probability);
}

void Network::set_loss_probability(double p) {
  if (!(p >= 0 && p <= 1)) throw std::invalid_argument("loss probability outside [0, 1]");
  config_.loss_probability = p;
}

bool Network::draw_loss(NodeId from, NodeId to, const SendMeta& meta) {
  std::uint64_t key = mix(config_.seed ^ 0x6C6F7373ULL);
  key = mix(key ^ (static_cast<std::uint64_t>(from.value) << 32 | to.value));
  key = mix(key ^ static_cast<std::uint64_t>(meta.type));
  key = mix(key ^ meta.session);
  const std::uint32_t k = occurrences_[key]++;
  const double u = static_cast<double>(mix(key ^ k) >> 11) * 0x1.0p-53;
  return u < config_.loss_probability;
}

void Network::attach(NodeId node, Endpoint& endpoint) { endpoints_.at(node.value) = &endpoint; }

Network::Slot Network::push(SimTime at, std::function<void()> fire) {
  const Slot slot{at, seq_++};
  queue_.emplace(slot, std::move(fire));
  return slot;
}

void Network::record(NodeId node, TraceEvent event, const SendMeta& meta, std::size_t bytes,
                     int hops, NodeId peer) {
  if (!config_.trace) return;
  trace_.push_back(TraceRecord{now_, node, event, meta.session, meta.type, bytes, hops, peer});
}

void Network::send(NodeId from, Ipv4Address to, Bytes bytes, bool interceptable,
                   const SendMeta& meta) {
  const std::size_t size = bytes.size();
  if (!to.is_node_address() || to.node().value >= topo_.size()) {
    ++dropped_;
    record(from, TraceEvent::kDrop, meta, size, 0, from);
    return;
  }
  const NodeId dst = to.node();

  // Walk the route to find the delivery point.
  std::optional<NodeId> receiver;
  int hops = 0;
  if (from == dst) {
    if (attached(dst)) receiver = dst;
  } else {
    for (NodeId at = from; at != dst;) {
      at = topo_.next_hop(at, dst);
      ++hops;
      if ((interceptable && attached(at)) || (at == dst && attached(at))) {
        receiver = at;
        break;
      }
    }
  }

  if (config_.loss_probability > 0 && draw_loss(from, dst, meta) && !meta.lossless) {
    ++lost_;
    record(from, TraceEvent::kLoss, meta, size, 0, dst);
    return;
  }
  ledger_.add(meta.type, meta.session, size + static_cast<std::size_t>(config_.ip_overhead), hops,
              meta.nominal_size);
  record(from, TraceEvent::kSend, meta, size, hops, dst);

  const SimTime at = now_ + hops * config_.hop_latency;
  if (!receiver) {
    ++dropped_;
    push(at, [this, from, dst, meta, size, hops] {
      record(dst, TraceEvent::kDrop, meta, size, hops, from);
    });
    return;
  }
  push(at, [this, from, node = *receiver, meta, hops, bytes = std::move(bytes)] {
    record(node, TraceEvent::kDeliver, meta, bytes.size(), hops, from);
    if (Endpoint* e = endpoints_[node.value]) e->deliver(from, bytes, hops);
  });
}

TimerId Network::schedule(SimDuration delay, std::function<void()> fire) {
  if (delay < SimDuration::zero()) delay = SimDuration::zero();
  const TimerId id = seq_ + 1;
  const Slot slot = push(now_ + delay, [this, id, fire = std::move(fire)] {
    timers_.erase(id);
    fire();
  });
  timers_.emplace(id, slot);
  return id;
}

void Network::cancel(TimerId id) {
  auto it = timers_.find(id);
  if (it == timers_.end()) return;
  queue_.erase(it->second);
  timers_.erase(it);
}

void Network::schedule_cycles(std::span<const NodeId> nodes, SimDuration period, double jitter,
                              std::function<void(NodeId)> on_cycle) {
  if (period <= SimDuration::zero()) throw std::invalid_argument("cycle period must be positive");
  on_cycle_ = std::move(on_cycle);
  const std::uint64_t generation = ++cycle_generation_;
  phases_.clear();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (NodeId n : nodes) {
    const auto phase = SimDuration{static_cast<std::int64_t>(
        unit(rng_) * jitter * static_cast<double>(period.count()))};
    phases_[n] = phase;
    push(now_ + phase, [this, n, period, generation] { cycle(n, period, generation); });
  }
}

void Network::cycle(NodeId node, SimDuration period, std::uint64_t generation) {
  if (generation != cycle_generation_) return;
  if (config_.trace) trace_.push_back(TraceRecord{now_, node, TraceEvent::kCycle, 0, {}, 0, 0, node});
  on_cycle_(node);
  push(now_ + period, [this, node, period, generation] { cycle(node, period, generation); });
}

bool Network::step() {
  if (queue_.empty()) return false;
  auto node = queue_.extract(queue_.begin());
  now_ = node.key().first;
  node.mapped()();
  return true;
}

void Network::run_until(SimTime t) {
  while (!queue_.empty() && queue_.begin()->first.first <= t) step();
  if (now_ < t) now_ = t;
}

bool Network::run(const std::function<bool()>& stop, std::optional<SimTime> limit) {
  while (!queue_.empty()) {
    if (stop && stop()) return false;
    if (limit && queue_.begin()->first.first > *limit) return false;
    step();
  }
  return true;
}

void Network::write_trace(std::ostream& out) const {
  for (const auto& r : trace_) out << format(r) << '\n';
}

}  // namespace osp
