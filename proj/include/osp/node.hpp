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

/// @file node.hpp
/// An OSP node on the simulated network: decodes what arrives, hands it to
/// the discovery or distribution engine, and encodes what they send.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "osp/discovery.hpp"
#include "osp/distribution.hpp"
#include "osp/simnet.hpp"

namespace osp {

struct NodeConfig {
  GossipConfig gossip;
  DistributionConfig distribution;
  NominalSizes nominal;
};

class OspNode final : public Endpoint, public Port {
 public:
  OspNode(Network& net, NodeId id, Pid pid, std::optional<PeerIdentity> tracker,
          const NodeConfig& config, std::uint64_t seed);

  NodeId id() const { return id_; }
  PeerIdentity identity() const { return {pid_, Ipv4Address::of(id_)}; }
  GossipEngine& gossip() { return gossip_; }
  const GossipEngine& gossip() const { return gossip_; }
  DistributionEngine& distribution() { return distribution_; }
  std::uint64_t decode_errors() const { return decode_errors_; }

  // Endpoint
  void deliver(NodeId from, std::span<const std::uint8_t> bytes, int hops) override;

  // Port
  SimTime now() const override { return net_.now(); }
  void transmit(const WireMessage& message, Ipv4Address to, bool interceptable) override;
  TimerId start_timer(SimDuration delay, std::function<void()> fire) override {
    return net_.schedule(delay, std::move(fire));
  }
  void cancel_timer(TimerId id) override { net_.cancel(id); }

 private:
  Network& net_;
  NodeId id_;
  Pid pid_;
  NominalSizes nominal_;
  bool reliable_data_;
  GossipEngine gossip_;
  DistributionEngine distribution_;
  std::uint64_t decode_errors_ = 0;
};

/// Pid of every node, drawn from a per-node generator seeded from `seed`.
/// Distinct and non-zero.
std::vector<Pid> assign_pids(std::size_t count, std::uint64_t seed);

/// All OSP members of a topology, attached to one network.
class Overlay {
 public:
  /// `tracker` is the node every member knows at start (it knows nobody).
  Overlay(Network& net, std::optional<NodeId> tracker, const NodeConfig& config,
          std::uint64_t seed);

  Network& network() { return net_; }
  const std::vector<NodeId>& members() const { return members_; }
  OspNode& node(NodeId id) { return *nodes_.at(id.value); }
  const OspNode& node(NodeId id) const { return *nodes_.at(id.value); }
  bool has(NodeId id) const { return nodes_.at(id.value) != nullptr; }

  /// Starts the periodic gossip cycles.
  void start_discovery(double jitter = 1.0);
  void stop_discovery() { net_.stop_cycles(); }

 private:
  Network& net_;
  std::vector<NodeId> members_;
  std::vector<std::unique_ptr<OspNode>> nodes_;
  GossipConfig gossip_;
};

}  // namespace osp
