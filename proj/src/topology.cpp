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

#include "osp/topology.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <tuple>
#include <variant>

#include <json.hpp>

namespace osp {

std::string_view to_string(NodeRole r) {
  return r == NodeRole::kServer ? "server" : "router";
}

std::optional<std::uint32_t> GraphDescription::find(std::string_view label) const {
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].label == label) return i;
  }
  return std::nullopt;
}

std::uint32_t GraphDescription::intern(std::string_view label) {
  if (auto i = find(label)) return *i;
  nodes.push_back(Node{std::string(label)});
  return static_cast<std::uint32_t>(nodes.size() - 1);
}

// Topology ------------------------------------------------------------------

Topology Topology::build(const GraphDescription& desc) {
  if (desc.nodes.empty()) throw TopologyError("topology has no nodes");

  Topology t;
  const auto n = desc.nodes.size();
  if (n > std::numeric_limits<std::uint16_t>::max()) throw TopologyError("topology too large");
  t.labels_.reserve(n);
  for (const auto& node : desc.nodes) {
    if (t.find(node.label)) throw TopologyError("duplicate node label '" + node.label + "'");
    t.labels_.push_back(node.label);
    t.roles_.push_back(node.role);
    t.members_.push_back(node.osp);
  }

  std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (auto [a, b] : desc.edges) {
    if (a >= n || b >= n) throw TopologyError("edge references unknown node");
    if (a == b) throw TopologyError("self-loop on '" + desc.nodes[a].label + "'");
    edges.emplace(std::min(a, b), std::max(a, b));
  }
  t.adjacency_.resize(n);
  for (auto [a, b] : edges) {
    t.adjacency_[a].push_back(NodeId{b});
    t.adjacency_[b].push_back(NodeId{a});
  }
  for (auto& adj : t.adjacency_) std::sort(adj.begin(), adj.end());
  t.edge_count_ = edges.size();

  t.compute_routes();
  for (std::uint32_t v = 1; v < n; ++v) {
    if (t.distance_[v] == std::numeric_limits<std::uint16_t>::max()) {
      throw TopologyError("graph is disconnected: '" + t.labels_[v] + "' unreachable from '" +
                          t.labels_[0] + "'");
    }
  }
  return t;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Per-edge tie-break weight. 40 bits keeps path sums far from overflow.
std::uint64_t edge_perturbation(NodeId a, NodeId b) {
  const auto lo = std::min(a.value, b.value);
  const auto hi = std::max(a.value, b.value);
  return splitmix64((static_cast<std::uint64_t>(lo) << 32) | hi) & ((1ULL << 40) - 1);
}

}  // namespace

void Topology::compute_routes() {
  const auto n = labels_.size();
  constexpr auto kUnreached = std::numeric_limits<std::uint16_t>::max();
  distance_.assign(n * n, kUnreached);
  next_hop_.assign(n * n, 0);

  using Cost = std::pair<std::uint32_t, std::uint64_t>;  // (hops, perturbation)
  constexpr Cost kInf{std::numeric_limits<std::uint32_t>::max(), 0};

  std::vector<Cost> cost(n);
  std::vector<std::uint32_t> first(n);
  std::vector<bool> done(n);
  for (std::uint32_t s = 0; s < n; ++s) {
    std::fill(cost.begin(), cost.end(), kInf);
    std::fill(done.begin(), done.end(), false);
    using Item = std::tuple<Cost, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    cost[s] = {0, 0};
    first[s] = s;
    pq.emplace(cost[s], s);
    while (!pq.empty()) {
      auto [c, u] = pq.top();
      pq.pop();
      if (done[u]) continue;
      done[u] = true;
      for (NodeId v : adjacency_[u]) {
        Cost nc{c.first + 1, c.second + edge_perturbation(NodeId{u}, v)};
        const auto hop = (u == s) ? v.value : first[u];
        if (nc < cost[v.value]) {
          cost[v.value] = nc;
          first[v.value] = hop;
          pq.emplace(nc, v.value);
        } else if (nc == cost[v.value] && !done[v.value]) {
          ++ambiguous_routes_;
        }
      }
    }
    for (std::uint32_t v = 0; v < n; ++v) {
      if (cost[v] == kInf) continue;
      distance_[s * n + v] = static_cast<std::uint16_t>(cost[v].first);
      next_hop_[s * n + v] = first[v];
    }
  }
}

std::optional<NodeId> Topology::find(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return NodeId{static_cast<std::uint32_t>(it - labels_.begin())};
}

NodeId Topology::require(std::string_view label) const {
  if (auto n = find(label)) return *n;
  throw TopologyError("unknown node '" + std::string(label) + "'");
}

std::vector<NodeId> Topology::members() const {
  std::vector<NodeId> out;
  for (std::uint32_t i = 0; i < members_.size(); ++i) {
    if (members_[i]) out.push_back(NodeId{i});
  }
  return out;
}

std::size_t Topology::member_count() const {
  return static_cast<std::size_t>(std::count(members_.begin(), members_.end(), true));
}

IpPath Topology::shortest_path(NodeId src, NodeId dst) const {
  IpPath p;
  p.hops.push_back(src);
  for (NodeId cur = src; cur != dst;) {
    cur = next_hop(cur, dst);
    p.hops.push_back(cur);
  }
  return p;
}

Topology Topology::with_members(std::span<const NodeId> members) const {
  Topology t = *this;
  std::fill(t.members_.begin(), t.members_.end(), false);
  for (NodeId m : members) t.members_.at(m.value) = true;
  return t;
}

std::set<NodeId> off_path_domain_oracle(const Topology& topo, const IpPath& path, int radius) {
  std::vector<int> dist(topo.size(), -1);
  std::deque<NodeId> frontier;
  for (NodeId h : path.hops) {
    if (dist[h.value] < 0) {
      dist[h.value] = 0;
      frontier.push_back(h);
    }
  }
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop_front();
    if (dist[u.value] == radius) continue;
    for (NodeId v : topo.neighbors(u)) {
      if (dist[v.value] < 0) {
        dist[v.value] = dist[u.value] + 1;
        frontier.push_back(v);
      }
    }
  }
  std::set<NodeId> out;
  for (std::uint32_t i = 0; i < topo.size(); ++i) {
    if (dist[i] >= 0 && topo.is_member(NodeId{i})) out.insert(NodeId{i});
  }
  return out;
}

std::set<NodeId> overlay_neighbors(const Topology& topo, NodeId n) {
  std::set<NodeId> out;
  for (NodeId m : topo.members()) {
    if (m == n) continue;
    const auto path = topo.shortest_path(n, m);
    bool clear = true;
    for (std::size_t i = 1; i + 1 < path.hops.size(); ++i) {
      if (topo.is_member(path.hops[i])) {
        clear = false;
        break;
      }
    }
    if (clear) out.insert(m);
  }
  return out;
}

std::size_t overlay_max_degree(const Topology& topo) {
  std::size_t best = 0;
  for (NodeId m : topo.members()) best = std::max(best, overlay_neighbors(topo, m).size());
  return best;
}

// GML -----------------------------------------------------------------------

namespace {

struct GmlList;
using GmlValue = std::variant<std::string, GmlList>;
struct GmlList {
  std::vector<std::pair<std::string, GmlValue>> items;
};

class GmlReader {
 public:
  explicit GmlReader(std::istream& in) : text_(std::istreambuf_iterator<char>(in), {}) {}

  GmlList parse_top() {
    GmlList top = parse_items(false);
    return top;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw TopologyError("GML parse error at line " + std::to_string(line_) + ": " + what);
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string token() {
    skip_space();
    if (pos_ >= text_.size()) return {};
    char c = text_[pos_];
    if (c == '[' || c == ']') {
      ++pos_;
      return std::string(1, c);
    }
    if (c == '"') {
      auto end = text_.find('"', pos_ + 1);
      if (end == std::string::npos) fail("unterminated string");
      std::string s = text_.substr(pos_, end - pos_ + 1);
      line_ += static_cast<int>(std::count(s.begin(), s.end(), '\n'));
      pos_ = end + 1;
      return s;
    }
    auto start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '[' && text_[pos_] != ']') {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  GmlList parse_items(bool nested) {
    GmlList list;
    for (;;) {
      std::string key = token();
      if (key.empty()) {
        if (nested) fail("missing ']'");
        return list;
      }
      if (key == "]") {
        if (!nested) fail("unbalanced ']'");
        return list;
      }
      if (key == "[" || key.front() == '"') fail("expected key, got " + key);
      std::string value = token();
      if (value.empty()) fail("missing value for key '" + key + "'");
      if (value == "[") {
        list.items.emplace_back(key, parse_items(true));
      } else if (value == "]") {
        fail("missing value for key '" + key + "'");
      } else {
        if (value.front() == '"') value = value.substr(1, value.size() - 2);
        list.items.emplace_back(key, value);
      }
    }
  }

  std::string text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

const std::string* gml_scalar(const GmlList& list, std::string_view key) {
  for (const auto& [k, v] : list.items) {
    if (k == key) {
      if (const auto* s = std::get_if<std::string>(&v)) return s;
    }
  }
  return nullptr;
}

long parse_long(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw TopologyError(std::string("GML: bad ") + what + " '" + s + "'");
  }
}

}  // namespace

GraphDescription parse_gml(std::istream& in) {
  GmlReader reader(in);
  GmlList top = reader.parse_top();
  const GmlList* graph = nullptr;
  for (const auto& [k, v] : top.items) {
    if (k == "graph") graph = std::get_if<GmlList>(&v);
  }
  if (graph == nullptr) throw TopologyError("GML: no graph [ ... ] block");

  GraphDescription desc;
  std::map<long, std::uint32_t> by_id;
  for (const auto& [k, v] : graph->items) {
    if (k != "node") continue;
    const auto* node = std::get_if<GmlList>(&v);
    if (node == nullptr) throw TopologyError("GML: node is not a list");
    const auto* id = gml_scalar(*node, "id");
    if (id == nullptr) throw TopologyError("GML: node without id");
    const long gid = parse_long(*id, "node id");
    if (by_id.count(gid)) throw TopologyError("GML: duplicate node id " + *id);

    GraphDescription::Node n;
    const auto* label = gml_scalar(*node, "label");
    n.label = label ? *label : *id;
    if (desc.find(n.label)) n.label += "_" + *id;
    if (const auto* role = gml_scalar(*node, "role")) {
      if (*role == "server") {
        n.role = NodeRole::kServer;
      } else if (*role != "router") {
        throw TopologyError("GML: unknown role '" + *role + "'");
      }
    }
    if (const auto* osp = gml_scalar(*node, "osp")) n.osp = parse_long(*osp, "osp flag") != 0;
    by_id[gid] = static_cast<std::uint32_t>(desc.nodes.size());
    desc.nodes.push_back(std::move(n));
  }
  for (const auto& [k, v] : graph->items) {
    if (k != "edge") continue;
    const auto* edge = std::get_if<GmlList>(&v);
    if (edge == nullptr) throw TopologyError("GML: edge is not a list");
    const auto* s = gml_scalar(*edge, "source");
    const auto* t = gml_scalar(*edge, "target");
    if (s == nullptr || t == nullptr) throw TopologyError("GML: edge without source/target");
    auto a = by_id.find(parse_long(*s, "edge source"));
    auto b = by_id.find(parse_long(*t, "edge target"));
    if (a == by_id.end() || b == by_id.end()) throw TopologyError("GML: edge to unknown node");
    // topology-zoo carries self-loops and parallel links; neither affects routing.
    if (a->second != b->second) desc.add_edge(a->second, b->second);
  }
  return desc;
}

GraphDescription parse_edge_list(std::istream& in) {
  GraphDescription desc;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ';', '\n');
    std::istringstream parts(line);
    std::string part;
    while (std::getline(parts, part)) {
      std::istringstream fields(part);
      std::string a, b, extra;
      if (!(fields >> a)) continue;
      if (!(fields >> b) || (fields >> extra)) {
        throw TopologyError("edge list line " + std::to_string(lineno) + ": expected 'a b'");
      }
      desc.add_edge(desc.intern(a), desc.intern(b));
    }
  }
  return desc;
}

GraphDescription read_graph_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw TopologyError("cannot open topology file " + file.string());
  if (file.extension() == ".gml") return parse_gml(in);
  return parse_edge_list(in);
}

void apply_overlay(GraphDescription& desc, std::istream& overlay_json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(overlay_json);
  } catch (const nlohmann::json::exception& e) {
    throw TopologyError(std::string("scenario overlay: ") + e.what());
  }
  auto lookup = [&](const std::string& label) {
    auto i = desc.find(label);
    if (!i) throw TopologyError("scenario overlay: unknown node '" + label + "'");
    return *i;
  };

  if (auto it = doc.find("servers"); it != doc.end()) {
    for (const auto& s : *it) {
      const auto label = s.at("label").get<std::string>();
      const auto attach = lookup(s.at("attach").get<std::string>());
      if (desc.find(label)) throw TopologyError("scenario overlay: server '" + label + "' exists");
      desc.nodes.push_back({label, NodeRole::kServer, true});
      desc.add_edge(static_cast<std::uint32_t>(desc.nodes.size() - 1), attach);
    }
  }
  if (auto it = doc.find("roles"); it != doc.end()) {
    for (const auto& [label, role] : it->items()) {
      const auto r = role.get<std::string>();
      if (r != "server" && r != "router") throw TopologyError("scenario overlay: bad role " + r);
      desc.nodes[lookup(label)].role = r == "server" ? NodeRole::kServer : NodeRole::kRouter;
    }
  }
  if (auto it = doc.find("osp_members"); it != doc.end()) {
    if (it->is_string()) {
      if (it->get<std::string>() != "all") throw TopologyError("scenario overlay: osp_members");
      for (auto& n : desc.nodes) n.osp = true;
    } else {
      for (auto& n : desc.nodes) n.osp = false;
      for (const auto& m : *it) desc.nodes[lookup(m.get<std::string>())].osp = true;
    }
  }
}

Topology load_topology(const std::filesystem::path& file,
                       const std::optional<std::filesystem::path>& overlay) {
  GraphDescription desc = read_graph_file(file);
  if (overlay) {
    std::ifstream in(*overlay);
    if (!in) throw TopologyError("cannot open scenario overlay " + overlay->string());
    apply_overlay(desc, in);
  }
  return Topology::build(desc);
}

}  // namespace osp
