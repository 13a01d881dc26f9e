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

// Fuzzes the distribution engine with arbitrary event sequences and checks
// that every ST and SA transition it takes is one the state machines allow.

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <utility>

#include "fake_port.hpp"
#include "osp/distribution.hpp"
#include "osp/harness.hpp"

using namespace osp;
using osp::testing::FakePort;

namespace {

using StEdge = std::pair<StState, StState>;
using SaEdge = std::pair<SaState, SaState>;

const std::set<StEdge>& allowed_st() {
  static const std::set<StEdge> s{
      // initiator
      {StState::kIdle, StState::kActive},
      {StState::kActive, StState::kIdle},
      // forwarder setup and teardown
      {StState::kIdle, StState::kOnPathForwarder},
      {StState::kIdle, StState::kOffPathForwarder},
      {StState::kOnPathForwarder, StState::kOnPathActive},
      {StState::kOffPathForwarder, StState::kOffPathActive},
      {StState::kOnPathActive, StState::kOnPathForwarder},
      {StState::kOffPathActive, StState::kOffPathForwarder},
      {StState::kOnPathForwarder, StState::kIdle},
      {StState::kOffPathForwarder, StState::kIdle},
      // abort and replace
      {StState::kOffPathForwarder, StState::kOnPathForwarder},
      {StState::kOffPathActive, StState::kOnPathForwarder},
  };
  return s;
}

const std::set<SaEdge>& allowed_sa() {
  static const std::set<SaEdge> s{
      {SaState::kIdle, SaState::kWaitNotification},
      {SaState::kWaitNotification, SaState::kWaitResponses},
      {SaState::kWaitNotification, SaState::kIdle},
      {SaState::kWaitResponses, SaState::kIdle},
  };
  return s;
}

PeerIdentity peer(std::uint32_t i) { return PeerIdentity{Pid{100 + i}, Ipv4Address::of(NodeId{i})}; }

struct Seen {
  std::set<StEdge> st;
  std::set<SaEdge> sa;
};

void fuzz(std::uint64_t seed, int steps, Seen& seen) {
  std::mt19937_64 rng(seed);
  const PeerIdentity self = peer(0);
  FakePort port;
  PeerTable pet(self.pid);
  const int neighbors = static_cast<int>(rng() % 5);
  for (int i = 1; i <= neighbors; ++i) pet.mark_neighbor(peer(i), 1 + static_cast<int>(rng() % 3), {}, {});
  DistributionEngine engine(self, pet, DistributionConfig{}, port, seed);
  DistributionObserver o;
  o.st_transition = [&](StState a, StState b) { seen.st.emplace(a, b); };
  o.sa_transition = [&](SaState a, SaState b) { seen.sa.emplace(a, b); };
  engine.set_observer(o);

  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  for (int step = 0; step < steps; ++step) {
    const SessionId session = 1 + pick(3);
    const PeerIdentity from = peer(1 + pick(6));
    StMessage m;
    m.source = from.pid;
    m.source_ip = from.ip;
    m.destination = self.pid;
    m.destination_ip = self.ip;
    m.session = session;
    m.sa_identifier = 1;
    switch (pick(8)) {
      case 0:
        if (engine.st_state(1, session) == StState::kIdle) {
          try {
            engine.submit(SaMessage{}, pick(2) ? self.ip : peer(40).ip, pick(4), {}, 1, session);
          } catch (const std::invalid_argument&) {
          }
        }
        continue;
      case 1:
        m.kind = StMessage::Kind::kQuery;
        m.on_path = pick(2) == 0;
        if (m.on_path) {
          m.destination = Pid{};
          m.destination_ip = pick(3) ? peer(40).ip : self.ip;
        }
        m.radius = pick(4);
        break;
      case 2:
        m.kind = StMessage::Kind::kData;
        m.sa_payload = encode(SaMessage{});
        break;
      case 3:
        m.kind = StMessage::Kind::kResponse;
        m.destination_ip = pick(2) ? from.ip : peer(40).ip;
        break;
      case 4:
        m.kind = StMessage::Kind::kError;
        m.destination_ip = pick(2) ? from.ip : peer(40).ip;
        m.error_code = static_cast<std::uint8_t>(pick(2) ? StErrorCode::kRejected : StErrorCode::kAborted);
        break;
      case 5: {
        m.kind = StMessage::Kind::kDataResponse;
        SaMessage r;
        r.kind = SaMessage::Kind::kResponse;
        r.status_elements.push_back({from.node(), 1, static_cast<std::uint8_t>(pick(3))});
        m.sa_payload = encode(r);
        break;
      }
      default:
        port.run_for(SimDuration{pick(700) * 1000});
        continue;
    }
    engine.on_message(m, 1 + pick(3));
  }
  port.run_for(10s);
  EXPECT_EQ(engine.active_sessions(), 0u) << "seed " << seed;
}

}  // namespace

TEST(Fsm, RandomEventsStayWithinAllowedTransitions) {
  Seen seen;
  for (std::uint64_t seed = 1; seed <= 400; ++seed) fuzz(seed, 300, seen);
  for (const auto& e : seen.st) {
    EXPECT_TRUE(allowed_st().contains(e)) << to_string(e.first) << " -> " << to_string(e.second);
  }
  for (const auto& e : seen.sa) {
    EXPECT_TRUE(allowed_sa().contains(e)) << to_string(e.first) << " -> " << to_string(e.second);
  }
  // The fuzzer should reach nearly every allowed edge; otherwise it is too weak.
  EXPECT_GE(seen.st.size(), allowed_st().size() - 1);
  EXPECT_EQ(seen.sa, allowed_sa());
}

TEST(Fsm, SimulatedSessionsStayWithinAllowedTransitions) {
  const auto topo = load_topology(OSP_DATA_DIR "/geant.gml",
                                  std::filesystem::path(OSP_DATA_DIR "/geant_overlay.json"));
  for (double loss : {0.0, 0.1}) {
    RunOptions opt;
    Testbed bed(topo, opt, 3);
    ASSERT_TRUE(bed.discover().converged);
    bed.network().set_loss_probability(loss);
    const auto ends = endpoints(topo);
    for (int i = 0; i < 30; ++i) {
      bed.probe(ends[(i * 7) % ends.size()], ends[(i * 13 + 5) % ends.size()], i % 4, 256);
    }
    for (const auto& e : bed.st_transitions()) EXPECT_TRUE(allowed_st().contains(e));
    for (const auto& e : bed.sa_transitions()) EXPECT_TRUE(allowed_sa().contains(e));
  }
}
