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

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "osp/topology.hpp"

using osp::NodeId;
using osp::Topology;

namespace {

Topology from_edges(const std::string& text) {
  std::istringstream in(text);
  return Topology::build(osp::parse_edge_list(in));
}

std::set<std::string> labels(const Topology& t, const std::set<NodeId>& nodes) {
  std::set<std::string> out;
  for (NodeId n : nodes) out.insert(t.label(n));
  return out;
}

Topology geant() {
  return osp::load_topology(OSP_DATA_DIR "/geant.gml",
                            std::filesystem::path(OSP_DATA_DIR "/geant_overlay.json"));
}

}  // namespace

TEST(Topology, EdgeListLine) {
  const auto t = from_edges("a b\nb c # comment\nc d; d e\n");
  EXPECT_EQ(t.size(), 5u);
  EXPECT_EQ(t.edge_count(), 4u);
  const auto a = t.require("a"), e = t.require("e");
  EXPECT_EQ(t.ip_distance(a, e), 4);
  const auto p = t.shortest_path(a, e);
  ASSERT_EQ(p.length(), 4);
  EXPECT_EQ(t.label(p.hops[2]), "c");
  EXPECT_EQ(t.next_hop(a, e), t.require("b"));
  EXPECT_EQ(t.next_hop(a, a), a);
}

TEST(Topology, RejectsDisconnectedAndSelfLoops) {
  EXPECT_THROW(from_edges("a b\nc d\n"), osp::TopologyError);
  EXPECT_THROW(from_edges("a a\n"), osp::TopologyError);
}

TEST(Topology, ParallelEdgesCollapse) {
  const auto t = from_edges("a b\nb a\na b\n");
  EXPECT_EQ(t.edge_count(), 1u);
}

TEST(Topology, RequireNamesMissingLabel) {
  const auto t = from_edges("a b\n");
  try {
    t.require("zz");
    FAIL();
  } catch (const osp::TopologyError& e) {
    EXPECT_NE(std::string(e.what()).find("zz"), std::string::npos);
  }
}

TEST(Topology, GmlParsesRolesAndMembership) {
  std::istringstream in(R"(graph [
    node [ id 0 label "x" ]
    node [ id 1 label "y" role "server" ]
    node [ id 2 label "z" osp 0 ]
    edge [ source 0 target 1 ]
    edge [ source 0 target 2 ]
  ])");
  const auto t = Topology::build(osp::parse_gml(in));
  EXPECT_EQ(t.role(t.require("y")), osp::NodeRole::kServer);
  EXPECT_FALSE(t.is_member(t.require("z")));
  EXPECT_EQ(t.member_count(), 2u);
}

TEST(Topology, GmlUnknownRoleIsAnError) {
  std::istringstream in(R"(graph [ node [ id 0 label "x" role "switch" ] ])");
  EXPECT_THROW(osp::parse_gml(in), osp::TopologyError);
}

// Hand-computed domains on the 5-node line a-b-c-d-e.
TEST(OffPathOracle, LineByHand) {
  const auto t = osp::load_topology(OSP_DATA_DIR "/line.txt");
  const auto path = t.shortest_path(t.require("a"), t.require("b"));
  EXPECT_EQ(labels(t, osp::off_path_domain_oracle(t, path, 0)), (std::set<std::string>{"a", "b"}));
  EXPECT_EQ(labels(t, osp::off_path_domain_oracle(t, path, 1)),
            (std::set<std::string>{"a", "b", "c"}));
  EXPECT_EQ(labels(t, osp::off_path_domain_oracle(t, path, 3)),
            (std::set<std::string>{"a", "b", "c", "d", "e"}));
}

TEST(OffPathOracle, StarByHand) {
  const auto t = osp::load_topology(OSP_DATA_DIR "/star.txt");
  const auto path = t.shortest_path(t.require("l1"), t.require("c"));
  EXPECT_EQ(labels(t, osp::off_path_domain_oracle(t, path, 0)), (std::set<std::string>{"l1", "c"}));
  EXPECT_EQ(labels(t, osp::off_path_domain_oracle(t, path, 1)),
            (std::set<std::string>{"l1", "l2", "l3", "l4", "c"}));
}

TEST(OffPathOracle, SkipsNonMembers) {
  auto t = osp::load_topology(OSP_DATA_DIR "/line.txt");
  std::vector<NodeId> members{t.require("a"), t.require("b"), t.require("e")};
  const auto sub = t.with_members(members);
  const auto path = sub.shortest_path(sub.require("a"), sub.require("b"));
  EXPECT_EQ(labels(sub, osp::off_path_domain_oracle(sub, path, 3)),
            (std::set<std::string>{"a", "b", "e"}));
}

TEST(OverlayNeighbors, NonMemberIsTransparent) {
  const auto t = osp::load_topology(OSP_DATA_DIR "/line.txt");
  std::vector<NodeId> members{t.require("a"), t.require("c"), t.require("e")};
  const auto sub = t.with_members(members);
  EXPECT_EQ(labels(sub, osp::overlay_neighbors(sub, sub.require("a"))), (std::set<std::string>{"c"}));
  EXPECT_EQ(labels(sub, osp::overlay_neighbors(sub, sub.require("c"))),
            (std::set<std::string>{"a", "e"}));
}

TEST(Geant, ShapeMatchesScenario) {
  const auto t = geant();
  EXPECT_EQ(t.size(), 73u);  // 41 PoPs + 32 data centers
  EXPECT_EQ(t.member_count(), 73u);
  EXPECT_EQ(osp::overlay_max_degree(t), 10u);
  EXPECT_EQ(t.ambiguous_routes(), 0u);
  int servers = 0;
  for (NodeId n : t.members()) servers += t.role(n) == osp::NodeRole::kServer;
  EXPECT_EQ(servers, 32);
}

// Routes must be symmetric and suffix-consistent, or on-path interception
// would disagree with the route walk.
TEST(Geant, RoutesAreSymmetricAndSuffixConsistent) {
  const auto t = geant();
  for (std::uint32_t a = 0; a < t.size(); ++a) {
    for (std::uint32_t b = 0; b < t.size(); ++b) {
      const auto p = t.shortest_path(NodeId{a}, NodeId{b});
      ASSERT_EQ(p.length(), t.ip_distance(NodeId{a}, NodeId{b}));
      auto back = t.shortest_path(NodeId{b}, NodeId{a}).hops;
      std::reverse(back.begin(), back.end());
      ASSERT_EQ(back, p.hops);
      for (std::size_t i = 1; i + 1 < p.hops.size(); ++i) {
        const auto tail = t.shortest_path(p.hops[i], NodeId{b});
        ASSERT_TRUE(std::equal(tail.hops.begin(), tail.hops.end(), p.hops.begin() + i));
      }
    }
  }
}

// Oracle against a brute-force definition: member within r of some path hop.
TEST(Geant, OracleMatchesBruteForce) {
  const auto t = geant();
  for (std::uint32_t a = 0; a < t.size(); a += 7) {
    for (std::uint32_t b = 1; b < t.size(); b += 11) {
      const auto p = t.shortest_path(NodeId{a}, NodeId{b});
      for (int r = 0; r <= 3; ++r) {
        std::set<NodeId> expect;
        for (NodeId m : t.members()) {
          for (NodeId h : p.hops) {
            if (t.ip_distance(m, h) <= r) {
              expect.insert(m);
              break;
            }
          }
        }
        ASSERT_EQ(osp::off_path_domain_oracle(t, p, r), expect);
      }
    }
  }
}

TEST(Overlay, UnknownAttachRouterIsAnError) {
  osp::GraphDescription d;
  d.add_edge(d.intern("a"), d.intern("b"));
  std::istringstream in(R"({"servers": [{"label": "s", "attach": "nowhere"}]})");
  EXPECT_THROW(osp::apply_overlay(d, in), osp::TopologyError);
}

TEST(Overlay, MemberList) {
  osp::GraphDescription d;
  d.add_edge(d.intern("a"), d.intern("b"));
  d.add_edge(d.intern("b"), d.intern("c"));
  std::istringstream in(R"({"osp_members": ["a", "c"]})");
  osp::apply_overlay(d, in);
  const auto t = Topology::build(d);
  EXPECT_EQ(t.member_count(), 2u);
  EXPECT_FALSE(t.is_member(t.require("b")));
}
