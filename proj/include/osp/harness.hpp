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

/// @file harness.hpp
/// Experiment runner: scenarios, a converged testbed to probe, the
/// discovery / distribution / partial-deployment experiments and their CSV
/// output.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "osp/node.hpp"
#include "osp/simnet.hpp"
#include "osp/topology.hpp"

namespace osp {

// Statistics -----------------------------------------------------------------

struct ConfidenceInterval {
  double mean = 0;
  std::optional<double> lo;  // unset for fewer than two samples
  std::optional<double> hi;
};

/// Mean and Student-t 95% interval.
ConfidenceInterval mean_ci95(std::span<const double> values);

// Analytic overhead -----------------------------------------------------------

/// (1/T) x sum_i v_i x (G + R + A) x 8, in bit/s.
double eta_analytic(std::span<const double> v, SimDuration period, const NominalSizes& sizes);

/// Mean IP distance from `node` to its PeT neighbors. Throws std::runtime_error
/// naming the node when it has none.
double mean_neighbor_distance(const Topology& topo, const OspNode& node);

// Scenario -------------------------------------------------------------------

struct RunOptions {
  NodeConfig node;
  SimConfig sim;
  std::optional<std::string> tracker;  // label; default: highest-degree member
  double jitter = 1.0;
  int max_cycles = 400;
};

struct Scenario {
  std::filesystem::path topology;
  std::optional<std::filesystem::path> overlay;
  RunOptions run;
  std::uint64_t seed = 1;
  int repetitions = 20;
  std::vector<int> pts_sweep{1, 2, 3, 4, 8};
  std::vector<int> radii{0, 1, 2, 3};
  std::size_t payload = 1024;
  std::size_t pairs_per_length = 30;
  std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
  int subsets = 5;

  Topology load() const { return load_topology(topology, overlay); }
};

/// Reads a JSON scenario. Relative paths resolve against the file's
/// directory. Unknown keys are ignored.
Scenario load_scenario(const std::filesystem::path& file);
Scenario parse_scenario(std::istream& in, const std::filesystem::path& base_dir);

// Testbed --------------------------------------------------------------------

struct DiscoveryResult {
  std::map<NodeId, int> n_gc;  // gossip sessions started until converged
  int network_n_gc = 0;        // max over nodes
  bool converged = false;
  SimTime converged_at{0};
  std::map<NodeId, double> v;  // mean neighbor distance at convergence
  double eta = 0;              // analytic, from v
};

struct ProbeOutcome {
  SessionId session = 0;
  NodeId source;
  NodeId destination;
  int length = 0;
  int radius = 0;
  std::set<NodeId> covered;  // nodes whose SA processed the Data
  std::set<NodeId> oracle;   // members within `radius` of the IP path
  std::optional<ProbeResult> result;
  LedgerCell traffic;
  SimDuration completion{0};
  std::map<NodeId, int> data_processed;
  std::map<NodeId, std::vector<SessionReport>> reports;
  bool all_idle = true;

  double coverage_ratio() const;
};

/// A network plus its overlay. discover() runs gossip until every member
/// knows exactly its overlay neighbors, then freezes discovery.
class Testbed {
 public:
  Testbed(const Topology& topo, const RunOptions& options, std::uint64_t seed);

  const Topology& topology() const { return topo_; }
  Network& network() { return *net_; }
  Overlay& overlay() { return *overlay_; }
  NodeId tracker() const { return tracker_; }

  DiscoveryResult discover();
  ProbeOutcome probe(NodeId source, NodeId destination, int radius, std::size_t payload,
                     std::uint16_t service = 1);

  /// Every (from, to) ST and SA transition seen so far.
  const std::set<std::pair<StState, StState>>& st_transitions() const { return st_seen_; }
  const std::set<std::pair<SaState, SaState>>& sa_transitions() const { return sa_seen_; }

 private:
  Topology topo_;
  RunOptions options_;
  std::uint64_t seed_;
  NodeId tracker_;
  std::unique_ptr<Network> net_;
  std::unique_ptr<Overlay> overlay_;
  ProbeOutcome* current_ = nullptr;
  std::set<std::pair<StState, StState>> st_seen_;
  std::set<std::pair<SaState, SaState>> sa_seen_;
};

/// Highest-degree member, lowest id on ties.
NodeId default_tracker(const Topology& topo);

/// Probe endpoints: servers when the topology has any, else all members.
std::vector<NodeId> endpoints(const Topology& topo);

// Experiments ----------------------------------------------------------------

struct DiscoveryRow {
  int pts = 0;
  ConfidenceInterval n_gc;
  double t_gd_s = 0;  // mean n_GC x T
  std::vector<int> runs;
  int unconverged = 0;
};

std::vector<DiscoveryRow> run_discovery_sweep(const Topology& topo, const Scenario& s);

struct DistributionRow {
  int length = 0;
  int radius = 0;
  std::size_t pairs = 0;
  ConfidenceInterval bytes;  // byte x hop per session
  double completion_ms = 0;  // mean
  double max_completion_ms = 0;
  std::size_t oracle_mismatches = 0;
  std::size_t partial = 0;
};

std::vector<DistributionRow> run_distribution_experiment(const Topology& topo, const Scenario& s);

struct PartialRow {
  double fraction = 0;
  std::size_t configurations = 0;
  ConfidenceInterval eta;
  double mean_members = 0;
  double mean_v = 0;
  std::size_t unconverged = 0;
};

/// Each fraction picks that share of all nodes, servers and routers alike,
/// uniformly at random.
std::vector<PartialRow> run_partial_deployment(const Topology& topo, const Scenario& s);

// CSV ------------------------------------------------------------------------

void write_csv(std::ostream& out, const std::vector<DiscoveryRow>& rows, SimDuration period);
void write_csv(std::ostream& out, const std::vector<DistributionRow>& rows);
void write_csv(std::ostream& out, const std::vector<PartialRow>& rows);
void write_csv(std::ostream& out, const Topology& topo, const DiscoveryResult& r,
               SimDuration period);

/// Fixed-precision decimal, empty for an unset value.
std::string fmt(std::optional<double> v, int precision = 3);

}  // namespace osp
