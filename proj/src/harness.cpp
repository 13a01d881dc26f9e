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

#include "osp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

namespace osp {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix(mix(mix(seed) ^ a) ^ b);
}

SimDuration ms(double v) { return SimDuration{static_cast<std::int64_t>(std::llround(v * 1000.0))}; }

}  // namespace

// Statistics -----------------------------------------------------------------

ConfidenceInterval mean_ci95(std::span<const double> values) {
  ConfidenceInterval ci;
  if (values.empty()) return ci;
  const double n = static_cast<double>(values.size());
  ci.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return ci;
  double ss = 0;
  for (double v : values) ss += (v - ci.mean) * (v - ci.mean);
  const double sd = std::sqrt(ss / (n - 1));
  boost::math::students_t dist(n - 1);
  const double half = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(n);
  ci.lo = ci.mean - half;
  ci.hi = ci.mean + half;
  return ci;
}

// Analytic overhead ----------------------------------------------------------

double eta_analytic(std::span<const double> v, SimDuration period, const NominalSizes& sizes) {
  const double per_session = 8.0 * (sizes.registration + sizes.response + sizes.ack);
  const double seconds = std::chrono::duration<double>(period).count();
  return std::accumulate(v.begin(), v.end(), 0.0) * per_session / seconds;
}

double mean_neighbor_distance(const Topology& topo, const OspNode& node) {
  double sum = 0;
  int count = 0;
  for (const auto& [pid, e] : node.gossip().table().entries()) {
    if (e.peer_class() != PeerClass::kNeighbor) continue;
    sum += e.ip_hops;
    ++count;
  }
  if (count == 0) {
    throw std::runtime_error("peer table of " + topo.label(node.id()) + " has no neighbors");
  }
  return sum / count;
}

// Scenario -------------------------------------------------------------------

Scenario parse_scenario(std::istream& in, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("scenario: ") + e.what());
  }
  Scenario s;
  auto path = [&](const std::string& p) {
    std::filesystem::path f(p);
    return f.is_absolute() ? f : base_dir / f;
  };
  if (j.contains("topology")) s.topology = path(j["topology"].get<std::string>());
  if (j.contains("overlay")) s.overlay = path(j["overlay"].get<std::string>());
  if (j.contains("tracker")) s.run.tracker = j["tracker"].get<std::string>();
  s.seed = j.value("seed", s.seed);
  s.repetitions = j.value("repetitions", s.repetitions);
  s.pts_sweep = j.value("pts_sweep", s.pts_sweep);
  s.radii = j.value("radii", s.radii);
  s.payload = j.value("payload", s.payload);
  s.pairs_per_length = j.value("pairs_per_length", s.pairs_per_length);
  s.fractions = j.value("fractions", s.fractions);
  s.subsets = j.value("subsets", s.subsets);

  auto& g = s.run.node.gossip;
  if (auto it = j.find("gossip"); it != j.end()) {
    g.period = ms(it->value("period_s", 5.0) * 1000.0);
    g.gossip_timer = ms(it->value("gossip_timer_s", 5.0) * 1000.0);
    g.pts_size = it->value("pts_size", g.pts_size);
    g.entry_lifetime_factor = it->value("entry_lifetime_factor", g.entry_lifetime_factor);
    g.timeout_marks_out_of_scope = it->value("timeout_marks_out_of_scope", false);
    if (it->contains("unreachable_capacity")) {
      g.unreachable_capacity = (*it)["unreachable_capacity"].get<std::size_t>();
    }
  }
  auto& d = s.run.node.distribution;
  if (auto it = j.find("distribution"); it != j.end()) {
    d.wait_resp_timeout = ms(it->value("wait_resp_ms", 500.0));
    d.st_session_timeout = ms(it->value("st_session_timeout_ms", 2000.0));
    d.query_timeout = ms(it->value("query_timeout_ms", 300.0));
    d.reliable_data_mode = it->value("reliable_data_mode", false);
  }
  if (auto it = j.find("sim"); it != j.end()) {
    s.run.sim.hop_latency = ms(it->value("hop_latency_ms", 10.0));
    s.run.sim.loss_probability = it->value("loss_probability", 0.0);
    s.run.sim.trace = it->value("trace", false);
    s.run.sim.ip_overhead = it->value("ip_overhead", s.run.sim.ip_overhead);
    s.run.jitter = it->value("jitter", 1.0);
    s.run.max_cycles = it->value("max_cycles", s.run.max_cycles);
  }
  if (auto it = j.find("nominal"); it != j.end()) {
    auto& n = s.run.node.nominal;
    n.registration = it->value("registration", n.registration);
    n.response = it->value("response", n.response);
    n.ack = it->value("ack", n.ack);
  }
  if (s.repetitions < 1) throw std::runtime_error("scenario: repetitions must be >= 1");
  if (g.period <= SimDuration::zero()) throw std::runtime_error("scenario: period must be > 0");
  return s;
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open scenario " + file.string());
  return parse_scenario(in, file.parent_path());
}

// Testbed --------------------------------------------------------------------

NodeId default_tracker(const Topology& topo) {
  std::optional<NodeId> best;
  for (NodeId n : topo.members()) {
    if (!best || topo.degree(n) > topo.degree(*best)) best = n;
  }
  if (!best) throw TopologyError("topology has no OSP members");
  return *best;
}

std::vector<NodeId> endpoints(const Topology& topo) {
  std::vector<NodeId> servers;
  for (NodeId n : topo.members()) {
    if (topo.role(n) == NodeRole::kServer) servers.push_back(n);
  }
  return servers.empty() ? topo.members() : servers;
}

double ProbeOutcome::coverage_ratio() const {
  if (oracle.empty()) return 1.0;
  std::size_t hit = 0;
  for (NodeId n : oracle) hit += covered.count(n);
  return static_cast<double>(hit) / static_cast<double>(oracle.size());
}

Testbed::Testbed(const Topology& topo, const RunOptions& options, std::uint64_t seed)
    : topo_(topo), options_(options), seed_(seed) {
  tracker_ = options.tracker ? topo_.require(*options.tracker) : default_tracker(topo_);
  SimConfig sim = options.sim;
  sim.seed = derive(seed, 0x51);
  net_ = std::make_unique<Network>(topo_, sim);
  overlay_ = std::make_unique<Overlay>(*net_, tracker_, options.node, derive(seed, 0x4E));
  for (NodeId n : overlay_->members()) {
    auto& dist = overlay_->node(n).distribution();
    dist.registry().set(1, kStatusAvailable);
    DistributionObserver o;
    o.data_processed = [this, n](SessionId s) {
      if (current_ && (current_->session == 0 || current_->session == s)) {
        ++current_->data_processed[n];
      }
    };
    o.session_closed = [this, n](const SessionReport& r) {
      if (current_) current_->reports[n].push_back(r);
    };
    o.st_transition = [this](StState a, StState b) { st_seen_.emplace(a, b); };
    o.sa_transition = [this](SaState a, SaState b) { sa_seen_.emplace(a, b); };
    dist.set_observer(std::move(o));
  }
}

DiscoveryResult Testbed::discover() {
  DiscoveryResult out;
  std::map<NodeId, std::set<NodeId>> want;
  for (NodeId n : overlay_->members()) want[n] = overlay_neighbors(topo_, n);

  for (NodeId n : overlay_->members()) {
    auto& g = overlay_->node(n).gossip();
    g.set_neighbor_observer([&out, &want, &g, n] {
      if (out.n_gc.count(n) || g.neighbor_nodes() != want[n]) return;
      out.n_gc[n] = static_cast<int>(g.stats().registrations_sent);
    });
  }
  const auto members = overlay_->members().size();
  overlay_->start_discovery(options_.jitter);
  const auto period = options_.node.gossip.period;
  net_->run([&] { return out.n_gc.size() == members; },
            SimTime{period * (options_.max_cycles + 1)});
  out.converged = out.n_gc.size() == members;
  out.converged_at = net_->now();
  for (const auto& [n, c] : out.n_gc) out.network_n_gc = std::max(out.network_n_gc, c);
  if (!out.converged) out.network_n_gc = options_.max_cycles;

  std::vector<double> v;
  for (NodeId n : overlay_->members()) {
    overlay_->node(n).gossip().set_neighbor_observer({});
    const auto& table = overlay_->node(n).gossip().table();
    if (table.count(PeerClass::kNeighbor) == 0) continue;
    out.v[n] = mean_neighbor_distance(topo_, overlay_->node(n));
    v.push_back(out.v[n]);
  }
  out.eta = eta_analytic(v, period, options_.node.nominal);

  overlay_->stop_discovery();
  net_->run();
  return out;
}

ProbeOutcome Testbed::probe(NodeId source, NodeId destination, int radius, std::size_t payload,
                            std::uint16_t service) {
  if (!overlay_->has(source)) throw std::invalid_argument("probe source is not an OSP member");
  ProbeOutcome out;
  out.source = source;
  out.destination = destination;
  out.radius = radius;
  const IpPath path = topo_.shortest_path(source, destination);
  out.length = path.length();
  for (NodeId n : off_path_domain_oracle(topo_, path, radius)) {
    if (topo_.is_member(n)) out.oracle.insert(n);
  }

  SaMessage request;
  request.kind = SaMessage::Kind::kProbe;
  request.service_type = service;
  request.sf_payload = Bytes(payload, 0x5A);

  current_ = &out;
  out.session = overlay_->node(source).distribution().submit(
      request, Ipv4Address::of(destination), radius,
      [&out](const ProbeResult& r) { out.result = r; });
  net_->run();
  current_ = nullptr;

  for (const auto& [n, count] : out.data_processed) out.covered.insert(n);
  if (out.result) out.completion = out.result->finished - out.result->started;
  out.traffic = net_->ledger().of_session(out.session);
  for (NodeId n : overlay_->members()) {
    if (overlay_->node(n).distribution().active_sessions() != 0) out.all_idle = false;
  }
  return out;
}

// Experiments ----------------------------------------------------------------

std::vector<DiscoveryRow> run_discovery_sweep(const Topology& topo, const Scenario& s) {
  std::vector<DiscoveryRow> rows;
  const double period_s = std::chrono::duration<double>(s.run.node.gossip.period).count();
  for (int pts : s.pts_sweep) {
    DiscoveryRow row;
    row.pts = pts;
    std::vector<double> values;
    for (int rep = 0; rep < s.repetitions; ++rep) {
      RunOptions opts = s.run;
      opts.node.gossip.pts_size = static_cast<std::size_t>(pts);
      Testbed tb(topo, opts, derive(s.seed, 0xD15C + static_cast<std::uint64_t>(pts), rep));
      const auto r = tb.discover();
      row.runs.push_back(r.network_n_gc);
      if (!r.converged) ++row.unconverged;
      values.push_back(r.network_n_gc);
    }
    row.n_gc = mean_ci95(values);
    row.t_gd_s = row.n_gc.mean * period_s;
    rows.push_back(row);
  }
  return rows;
}

std::vector<DistributionRow> run_distribution_experiment(const Topology& topo, const Scenario& s) {
  Testbed tb(topo, s.run, s.seed);
  tb.discover();
  if (s.run.sim.loss_probability > 0) tb.network().set_loss_probability(s.run.sim.loss_probability);

  std::map<int, std::vector<std::pair<NodeId, NodeId>>> groups;
  const auto ends = endpoints(topo);
  for (std::size_t i = 0; i < ends.size(); ++i) {
    for (std::size_t j = i + 1; j < ends.size(); ++j) {
      groups[topo.ip_distance(ends[i], ends[j])].emplace_back(ends[i], ends[j]);
    }
  }
  std::mt19937_64 rng(derive(s.seed, 0x9A12));
  std::vector<DistributionRow> rows;
  for (auto& [length, pairs] : groups) {
    std::vector<std::pair<NodeId, NodeId>> chosen;
    if (pairs.size() <= s.pairs_per_length) {
      chosen = pairs;
    } else {
      std::sample(pairs.begin(), pairs.end(), std::back_inserter(chosen), s.pairs_per_length, rng);
    }
    for (int r : s.radii) {
      DistributionRow row;
      row.length = length;
      row.radius = r;
      row.pairs = chosen.size();
      std::vector<double> bytes;
      double completion = 0;
      for (const auto& [a, b] : chosen) {
        const auto o = tb.probe(a, b, r, s.payload);
        bytes.push_back(static_cast<double>(o.traffic.byte_hops));
        const double c = std::chrono::duration<double, std::milli>(o.completion).count();
        completion += c;
        row.max_completion_ms = std::max(row.max_completion_ms, c);
        if (o.covered != o.oracle) ++row.oracle_mismatches;
        if (!o.result || !o.result->complete) ++row.partial;
      }
      row.bytes = mean_ci95(bytes);
      row.completion_ms = chosen.empty() ? 0 : completion / static_cast<double>(chosen.size());
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<PartialRow> run_partial_deployment(const Topology& topo, const Scenario& s) {
  std::vector<NodeId> nodes;
  for (std::uint32_t i = 0; i < topo.size(); ++i) nodes.push_back(NodeId{i});
  std::vector<PartialRow> rows;
  for (double f : s.fractions) {
    PartialRow row;
    row.fraction = f;
    std::vector<double> etas;
    double members = 0, v_sum = 0;
    const auto keep = static_cast<std::size_t>(std::llround(f * static_cast<double>(nodes.size())));
    for (int k = 0; k < s.subsets; ++k) {
      const auto seed = derive(s.seed, 0xFA + static_cast<std::uint64_t>(std::llround(f * 1000)), k);
      std::mt19937_64 rng(seed);
      std::vector<NodeId> chosen;
      std::sample(nodes.begin(), nodes.end(), std::back_inserter(chosen), keep, rng);
      const Topology sub = topo.with_members(chosen);
      RunOptions opts = s.run;
      opts.tracker.reset();
      Testbed tb(sub, opts, seed);
      const auto r = tb.discover();
      etas.push_back(r.eta);
      if (!r.converged) ++row.unconverged;
      members += static_cast<double>(sub.member_count());
      double vs = 0;
      for (const auto& [n, v] : r.v) vs += v;
      v_sum += r.v.empty() ? 0 : vs / static_cast<double>(r.v.size());
    }
    row.configurations = static_cast<std::size_t>(s.subsets);
    row.eta = mean_ci95(etas);
    row.mean_members = members / s.subsets;
    row.mean_v = v_sum / s.subsets;
    rows.push_back(row);
  }
  return rows;
}

// CSV ------------------------------------------------------------------------

std::string fmt(std::optional<double> v, int precision) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, *v);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<DiscoveryRow>& rows, SimDuration period) {
  const double t = std::chrono::duration<double>(period).count();
  out << "pts_size,mean_nGC,ci95_lo,ci95_hi,T_GD\n";
  for (const auto& r : rows) {
    out << r.pts << ',' << fmt(r.n_gc.mean) << ',' << fmt(r.n_gc.lo) << ',' << fmt(r.n_gc.hi)
        << ',' << fmt(r.n_gc.mean * t) << '\n';
  }
}

void write_csv(std::ostream& out, const std::vector<DistributionRow>& rows) {
  out << "L,r,pairs,mean_bytes,ci95_lo,ci95_hi,mean_completion_ms,max_completion_ms,"
         "oracle_mismatches,partial\n";
  for (const auto& r : rows) {
    out << r.length << ',' << r.radius << ',' << r.pairs << ',' << fmt(r.bytes.mean, 1) << ','
        << fmt(r.bytes.lo, 1) << ',' << fmt(r.bytes.hi, 1) << ',' << fmt(r.completion_ms, 1) << ','
        << fmt(r.max_completion_ms, 1) << ',' << r.oracle_mismatches << ',' << r.partial << '\n';
  }
}

void write_csv(std::ostream& out, const std::vector<PartialRow>& rows) {
  out << "fraction,configurations,mean_eta_bps,ci95_lo,ci95_hi,mean_members,mean_v,unconverged\n";
  for (const auto& r : rows) {
    out << fmt(r.fraction, 2) << ',' << r.configurations << ',' << fmt(r.eta.mean, 1) << ','
        << fmt(r.eta.lo, 1) << ',' << fmt(r.eta.hi, 1) << ',' << fmt(r.mean_members, 2) << ','
        << fmt(r.mean_v, 4) << ',' << r.unconverged << '\n';
  }
}

void write_csv(std::ostream& out, const Topology& topo, const DiscoveryResult& r,
               SimDuration period) {
  const double t = std::chrono::duration<double>(period).count();
  out << "node,label,n_GC,T_GD,v\n";
  for (const auto& [n, v] : r.v) {
    auto it = r.n_gc.find(n);
    std::optional<double> c;
    if (it != r.n_gc.end()) c = it->second;
    out << n.value << ',' << topo.label(n) << ',' << fmt(c, 0) << ','
        << fmt(c ? std::optional<double>(*c * t) : std::nullopt, 1) << ',' << fmt(v, 4) << '\n';
  }
}

}  // namespace osp
