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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "osp/types.hpp"

namespace osp {

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NodeRole : std::uint8_t { kRouter, kServer };

std::string_view to_string(NodeRole r);

/// Mutable description of a graph before validation. Loaders and scenario
/// overlays edit this; Topology is built from it once.
struct GraphDescription {
  struct Node {
    std::string label;
    NodeRole role = NodeRole::kRouter;
    bool osp = true;
  };

  std::vector<Node> nodes;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;

  std::optional<std::uint32_t> find(std::string_view label) const;
  /// Returns the index of `label`, appending a router if it is new.
  std::uint32_t intern(std::string_view label);
  void add_edge(std::uint32_t a, std::uint32_t b) { edges.emplace_back(a, b); }
};

/// Ordered node list from source to destination inclusive.
struct IpPath {
  std::vector<NodeId> hops;

  /// Number of links, the path length L.
  int length() const { return hops.empty() ? 0 : static_cast<int>(hops.size()) - 1; }
  NodeId source() const { return hops.front(); }
  NodeId destination() const { return hops.back(); }
};

/// Immutable undirected network with an OSP-membership subset and a shared,
/// precomputed routing table. Safe to share between readers.
class Topology {
 public:
  /// Validates the description (no self-loops, connected) and computes
  /// routes. Parallel edges are collapsed.
  static Topology build(const GraphDescription& desc);

  std::size_t size() const { return labels_.size(); }
  std::size_t edge_count() const { return edge_count_; }

  const std::string& label(NodeId n) const { return labels_.at(n.value); }
  std::optional<NodeId> find(std::string_view label) const;
  /// Like find(), but throws TopologyError naming the missing label.
  NodeId require(std::string_view label) const;

  NodeRole role(NodeId n) const { return roles_.at(n.value); }
  bool is_member(NodeId n) const { return members_.at(n.value); }
  std::vector<NodeId> members() const;
  std::size_t member_count() const;

  std::span<const NodeId> neighbors(NodeId n) const { return adjacency_.at(n.value); }
  std::size_t degree(NodeId n) const { return adjacency_.at(n.value).size(); }

  /// Minimum-hop route. Routes are unique, symmetric and suffix-consistent:
  /// the route from any intermediate hop to the destination is the tail of
  /// the original route.
  IpPath shortest_path(NodeId src, NodeId dst) const;
  int ip_distance(NodeId a, NodeId b) const { return distance_[index(a, b)]; }
  /// First hop from `from` toward `to`; `from` itself when equal.
  NodeId next_hop(NodeId from, NodeId to) const { return NodeId{next_hop_[index(from, to)]}; }

  /// Same graph with a different OSP-membership set.
  Topology with_members(std::span<const NodeId> members) const;

  /// Pairs whose best routes tie exactly; zero on every shipped topology.
  std::size_t ambiguous_routes() const { return ambiguous_routes_; }

 private:
  Topology() = default;
  std::size_t index(NodeId a, NodeId b) const { return a.value * labels_.size() + b.value; }
  void compute_routes();

  std::vector<std::string> labels_;
  std::vector<NodeRole> roles_;
  std::vector<bool> members_;
  std::vector<std::vector<NodeId>> adjacency_;
  std::size_t edge_count_ = 0;
  std::vector<std::uint16_t> distance_;
  std::vector<std::uint32_t> next_hop_;
  std::size_t ambiguous_routes_ = 0;
};

/// OSP members within `radius` hops of at least one hop of `path`, by
/// multi-source BFS over the raw adjacency (independent of routing tables).
std::set<NodeId> off_path_domain_oracle(const Topology& topo, const IpPath& path, int radius);

/// OSP members m != n whose route from n carries no other OSP member: the
/// neighbor set a converged peer table must hold.
std::set<NodeId> overlay_neighbors(const Topology& topo, NodeId n);

/// Largest overlay_neighbors() size over all members.
std::size_t overlay_max_degree(const Topology& topo);

// Loaders ------------------------------------------------------------------

/// topology-zoo GML: graph [ node [ id label ... ] edge [ source target ] ].
/// Optional node keys `role` ("router"/"server") and `osp` (0/1).
GraphDescription parse_gml(std::istream& in);

/// One `a b` pair per line (or `;`-separated), `#` starts a comment.
GraphDescription parse_edge_list(std::istream& in);

/// Dispatches on extension: `.gml` is GML, anything else an edge list.
GraphDescription read_graph_file(const std::filesystem::path& file);

/// Applies a JSON scenario overlay:
///   { "servers": [ {"label": "...", "attach": "<router>"} ],
///     "roles": { "<label>": "server" },
///     "osp_members": "all" | [ "<label>", ... ] }
void apply_overlay(GraphDescription& desc, std::istream& overlay_json);

/// read_graph_file + optional overlay + build.
Topology load_topology(const std::filesystem::path& file,
                       const std::optional<std::filesystem::path>& overlay = std::nullopt);

}  // namespace osp
