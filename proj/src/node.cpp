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

#include "osp/node.hpp"

#include <random>
#include <set>

namespace osp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t node_seed(std::uint64_t seed, NodeId id, std::uint64_t stream) {
  return splitmix64(splitmix64(seed ^ (stream << 32)) + id.value);
}

}  // namespace

OspNode::OspNode(Network& net, NodeId id, Pid pid, std::optional<PeerIdentity> tracker,
                 const NodeConfig& config, std::uint64_t seed)
    : net_(net),
      id_(id),
      pid_(pid),
      nominal_(config.nominal),
      reliable_data_(config.distribution.reliable_data_mode),
      gossip_(identity(), tracker, config.gossip, *this, node_seed(seed, id, 1)),
      distribution_(identity(), gossip_.table(), config.distribution, *this,
                    node_seed(seed, id, 2)) {
  net_.attach(id, *this);
}

void OspNode::deliver(NodeId /*from*/, std::span<const std::uint8_t> bytes, int hops) {
  auto decoded = decode(bytes);
  if (std::holds_alternative<DecodeError>(decoded)) {
    ++decode_errors_;
    return;
  }
  auto& message = std::get<WireMessage>(decoded);
  if (auto* g = std::get_if<GossipMessage>(&message)) {
    switch (g->kind) {
      case GossipMessage::Kind::kRegistration: gossip_.on_registration(*g, hops); break;
      case GossipMessage::Kind::kRegResponse: gossip_.on_reg_response(*g, hops); break;
      case GossipMessage::Kind::kAck: gossip_.on_ack(*g, hops); break;
    }
    return;
  }
  distribution_.on_message(std::get<StMessage>(message), hops);
}

void OspNode::transmit(const WireMessage& message, Ipv4Address to, bool interceptable) {
  SendMeta meta;
  meta.type = wire_type(message);
  if (const auto* g = std::get_if<GossipMessage>(&message)) {
    meta.session = g->session;
    meta.nominal_size = nominal_size(g->kind, nominal_);
  } else {
    const auto& st = std::get<StMessage>(message);
    meta.session = st.session;
    meta.lossless = reliable_data_ && (st.kind == StMessage::Kind::kData ||
                                       st.kind == StMessage::Kind::kDataResponse);
  }
  net_.send(id_, to, encode(message), interceptable, meta);
}

std::vector<Pid> assign_pids(std::size_t count, std::uint64_t seed) {
  std::vector<Pid> out;
  std::set<std::uint64_t> used;
  for (std::size_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(node_seed(seed, NodeId{static_cast<std::uint32_t>(i)}, 0));
    std::uint64_t v = rng();
    while (v == 0 || used.count(v)) v = rng();
    used.insert(v);
    out.push_back(Pid{v});
  }
  return out;
}

Overlay::Overlay(Network& net, std::optional<NodeId> tracker, const NodeConfig& config,
                 std::uint64_t seed)
    : net_(net), nodes_(net.topology().size()), gossip_(config.gossip) {
  const auto& topo = net.topology();
  members_ = topo.members();
  const auto pids = assign_pids(topo.size(), seed);
  std::optional<PeerIdentity> tracker_id;
  if (tracker) {
    if (!topo.is_member(*tracker)) throw TopologyError("tracker is not an OSP member");
    tracker_id = PeerIdentity{pids[tracker->value], Ipv4Address::of(*tracker)};
  }
  for (NodeId n : members_) {
    auto known = (tracker && n == *tracker) ? std::nullopt : tracker_id;
    nodes_[n.value] = std::make_unique<OspNode>(net, n, pids[n.value], known, config, seed);
  }
}

void Overlay::start_discovery(double jitter) {
  net_.schedule_cycles(members_, gossip_.period, jitter,
                       [this](NodeId n) { nodes_[n.value]->gossip().on_cycle(); });
}

}  // namespace osp
