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

#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace osp {

/// Index of a node inside a Topology. Dense, 0-based.
struct NodeId {
  std::uint32_t value = 0;

  constexpr auto operator<=>(const NodeId&) const = default;
};

inline std::string to_string(NodeId n) { return std::to_string(n.value); }

/// Simulated time. Integer microseconds so traces are exact.
using SimDuration = std::chrono::duration<std::int64_t, std::micro>;
using SimTime = SimDuration;  // offset from simulation start

using namespace std::chrono_literals;

/// Synthetic IPv4 address. Node i lives at 10.0.0.0 + i + 1.
struct Ipv4Address {
  std::uint32_t value = 0;

  static constexpr std::uint32_t kBase = 0x0A000000U;

  static constexpr Ipv4Address of(NodeId n) { return Ipv4Address{kBase + n.value + 1}; }
  constexpr NodeId node() const { return NodeId{value - kBase - 1}; }
  constexpr bool is_node_address() const { return value > kBase; }

  constexpr auto operator<=>(const Ipv4Address&) const = default;
};

std::string to_string(Ipv4Address a);

/// 8-byte opaque peer identifier.
struct Pid {
  std::uint64_t value = 0;

  constexpr auto operator<=>(const Pid&) const = default;
};

std::string to_string(Pid p);

/// A peer as carried in PeTs and shared peer lists.
struct PeerIdentity {
  Pid pid;
  Ipv4Address ip;

  NodeId node() const { return ip.node(); }
  constexpr auto operator<=>(const PeerIdentity&) const = default;
};

using SessionId = std::uint64_t;

}  // namespace osp

template <>
struct std::hash<osp::NodeId> {
  std::size_t operator()(osp::NodeId n) const noexcept { return std::hash<std::uint32_t>{}(n.value); }
};

template <>
struct std::hash<osp::Pid> {
  std::size_t operator()(osp::Pid p) const noexcept { return std::hash<std::uint64_t>{}(p.value); }
};
