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

// osp: runs the discovery, distribution and overhead experiments and writes
// CSV tables.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "osp/harness.hpp"

namespace {

struct Common {
  std::string topology;
  std::string overlay;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string trace;
  std::optional<int> repetitions;
  std::optional<double> loss;
  bool reliable = false;
};

void add_common(CLI::App& app, Common& c) {
  app.add_option("--scenario", c.scenario, "JSON scenario file")->check(CLI::ExistingFile);
  app.add_option("--topology", c.topology,
                 "GML or edge-list topology (overrides the scenario's)")
      ->check(CLI::ExistingFile);
  app.add_option("--overlay", c.overlay, "JSON overlay: servers, roles, members")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", c.seed, "base seed (default: scenario's, else 1)");
  app.add_option("--out", c.out, "CSV destination (default: stdout)");
  app.add_option("--reps", c.repetitions, "repetitions (default 20)")->check(CLI::PositiveNumber);
  app.add_option("--loss", c.loss, "per-message loss probability (default 0)")
      ->check(CLI::Range(0.0, 1.0));
  app.add_flag("--reliable", c.reliable, "exempt Data and DataResponse from loss");
}

osp::Scenario scenario_of(const Common& c) {
  osp::Scenario s;
  if (!c.scenario.empty()) s = osp::load_scenario(c.scenario);
  if (!c.topology.empty()) {
    s.topology = c.topology;
    s.overlay.reset();
  }
  if (!c.overlay.empty()) s.overlay = c.overlay;
  if (s.topology.empty()) throw std::runtime_error("no topology: pass --topology or --scenario");
  if (c.seed) s.seed = *c.seed;
  if (c.repetitions) s.repetitions = *c.repetitions;
  if (c.loss) s.run.sim.loss_probability = *c.loss;
  if (c.reliable) s.run.node.distribution.reliable_data_mode = true;
  if (!c.trace.empty()) s.run.sim.trace = true;
  return s;
}

// Runs `write` against the --out file, or stdout.
template <typename F>
void emit(const Common& c, F&& write) {
  if (c.out.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw std::runtime_error("cannot write " + c.out);
  write(f);
  if (!f) throw std::runtime_error("write failed: " + c.out);
}

void save_trace(const Common& c, osp::Network& net) {
  if (c.trace.empty()) return;
  std::ofstream f(c.trace);
  if (!f) throw std::runtime_error("cannot write " + c.trace);
  net.write_trace(f);
}

double seconds(osp::SimDuration d) { return std::chrono::duration<double>(d).count(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OSP gossip discovery and off-path signaling experiments"};
  app.require_subcommand(1);

  Common discover_opts, sweep_opts, distribute_opts, overhead_opts, partial_opts;

  auto* discover = app.add_subcommand("discover", "one discovery run; per-node n_GC, T_GD and v");
  add_common(*discover, discover_opts);
  std::optional<int> pts;
  discover->add_option("--pts", pts, "PTS size (default: scenario's, else 2)");
  discover->add_option("--trace", discover_opts.trace, "write the event trace here");

  auto* sweep = app.add_subcommand("sweep", "discovery over the PTS sweep; mean n_GC with 95% CI");
  add_common(*sweep, sweep_opts);
  std::vector<int> sweep_pts;
  sweep->add_option("--pts", sweep_pts, "PTS sizes (default 1 2 3 4 8)");

  auto* distribute =
      app.add_subcommand("distribute", "probe sessions grouped by path length L and radius r");
  add_common(*distribute, distribute_opts);
  std::vector<int> radii;
  std::optional<std::size_t> payload, pairs;
  distribute->add_option("--r", radii, "radii (default 0 1 2 3)");
  distribute->add_option("--payload", payload, "SA payload bytes (default 1024)");
  distribute->add_option("--pairs", pairs, "pairs per path length (default 30)");

  auto* overhead = app.add_subcommand("overhead", "analytic gossip overhead from a converged run");
  add_common(*overhead, overhead_opts);

  auto* partial = app.add_subcommand("partial", "gossip overhead vs fraction of nodes running OSP");
  add_common(*partial, partial_opts);
  std::vector<double> fractions;
  std::optional<int> subsets;
  partial->add_option("--fractions", fractions, "node fractions (default 0.25 0.5 0.75 1)");
  partial->add_option("--subsets", subsets, "random member sets per fraction (default 5)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*discover) {
      auto s = scenario_of(discover_opts);
      if (pts) s.run.node.gossip.pts_size = static_cast<std::size_t>(*pts);
      const auto topo = s.load();
      osp::Testbed tb(topo, s.run, s.seed);
      const auto r = tb.discover();
      const auto period = s.run.node.gossip.period;
      emit(discover_opts, [&](std::ostream& o) { osp::write_csv(o, topo, r, period); });
      save_trace(discover_opts, tb.network());
      std::fprintf(stderr, "%s n_GC=%d T_GD=%.1fs eta=%.0fbit/s members=%zu\n",
                   r.converged ? "converged" : "NOT CONVERGED", r.network_n_gc,
                   r.network_n_gc * seconds(period), r.eta, topo.member_count());
      return r.converged ? 0 : 3;
    }
    if (*sweep) {
      auto s = scenario_of(sweep_opts);
      if (!sweep_pts.empty()) s.pts_sweep = sweep_pts;
      const auto topo = s.load();
      const auto rows = osp::run_discovery_sweep(topo, s);
      emit(sweep_opts, [&](std::ostream& o) { osp::write_csv(o, rows, s.run.node.gossip.period); });
      int unconverged = 0;
      for (const auto& row : rows) unconverged += row.unconverged;
      if (unconverged) std::fprintf(stderr, "%d runs did not converge\n", unconverged);
      return unconverged ? 3 : 0;
    }
    if (*distribute) {
      auto s = scenario_of(distribute_opts);
      if (!radii.empty()) s.radii = radii;
      if (payload) s.payload = *payload;
      if (pairs) s.pairs_per_length = *pairs;
      const auto topo = s.load();
      const auto rows = osp::run_distribution_experiment(topo, s);
      emit(distribute_opts, [&](std::ostream& o) { osp::write_csv(o, rows); });
      std::size_t mismatches = 0;
      for (const auto& row : rows) mismatches += row.oracle_mismatches;
      if (mismatches && s.run.sim.loss_probability == 0) {
        std::fprintf(stderr, "coverage differs from the oracle in %zu sessions\n", mismatches);
        return 4;
      }
      return 0;
    }
    if (*overhead) {
      const auto s = scenario_of(overhead_opts);
      const auto topo = s.load();
      osp::Testbed tb(topo, s.run, s.seed);
      const auto r = tb.discover();
      if (!r.converged) throw std::runtime_error("discovery did not converge");
      const auto& nominal = s.run.node.nominal;
      const auto period = s.run.node.gossip.period;
      const std::vector<double> unit(topo.member_count(), 1.0);
      double v_sum = 0;
      for (const auto& [n, v] : r.v) v_sum += v;
      const auto gossip = tb.network().ledger().gossip();
      const double elapsed = seconds(r.converged_at);
      emit(overhead_opts, [&](std::ostream& o) {
        o << "K,T_s,G,R,A,mean_v,eta_unit_v_bps,eta_bps,measured_nominal_bps,measured_wire_bps\n";
        o << topo.member_count() << ',' << osp::fmt(seconds(period)) << ',' << nominal.registration
          << ',' << nominal.response << ',' << nominal.ack << ','
          << osp::fmt(r.v.empty() ? 0.0 : v_sum / static_cast<double>(r.v.size())) << ','
          << osp::fmt(osp::eta_analytic(unit, period, nominal), 1) << ',' << osp::fmt(r.eta, 1)
          << ',' << osp::fmt(elapsed > 0 ? gossip.nominal_byte_hops * 8.0 / elapsed : 0.0, 1)
          << ',' << osp::fmt(elapsed > 0 ? gossip.byte_hops * 8.0 / elapsed : 0.0, 1) << '\n';
      });
      return 0;
    }
    if (*partial) {
      auto s = scenario_of(partial_opts);
      if (!fractions.empty()) s.fractions = fractions;
      if (subsets) s.subsets = *subsets;
      const auto topo = s.load();
      const auto rows = osp::run_partial_deployment(topo, s);
      emit(partial_opts, [&](std::ostream& o) { osp::write_csv(o, rows); });
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "osp: %s\n", e.what());
    return 2;
  }
  return 1;
}
