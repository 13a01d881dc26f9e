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

#include <optional>
#include <set>
#include <vector>

#include "fake_port.hpp"
#include "osp/distribution.hpp"

using osp::DistributionConfig;
using osp::DistributionEngine;
using osp::Ipv4Address;
using osp::NodeId;
using osp::PeerIdentity;
using osp::PeerTable;
using osp::Pid;
using osp::ProbeResult;
using osp::SaMessage;
using osp::SaState;
using osp::SessionEnd;
using osp::SessionReport;
using osp::StErrorCode;
using osp::StMessage;
using osp::StState;
using osp::testing::FakePort;
using namespace std::chrono_literals;

namespace {

PeerIdentity peer(std::uint32_t i) { return PeerIdentity{Pid{100 + i}, Ipv4Address::of(NodeId{i})}; }

constexpr std::uint16_t kSa = 1;
constexpr osp::SessionId kSession = 0xABC;

SaMessage probe(std::uint16_t service = 7) {
  SaMessage m;
  m.kind = SaMessage::Kind::kProbe;
  m.service_type = service;
  return m;
}

// One engine under test at node 0 plus helpers to speak to it as its peers.
struct Rig {
  explicit Rig(DistributionConfig cfg = {}) : pet(self.pid), engine(self, pet, cfg, port, 1) {
    osp::DistributionObserver o;
    o.session_closed = [this](const SessionReport& r) { reports.push_back(r); };
    o.data_processed = [this](osp::SessionId) { ++data_processed; };
    engine.set_observer(o);
  }

  StMessage query(const PeerIdentity& from, int radius, bool on_path,
                  std::optional<Ipv4Address> dest = std::nullopt) const {
    StMessage q;
    q.kind = StMessage::Kind::kQuery;
    q.source = from.pid;
    q.destination = on_path ? Pid{} : self.pid;
    q.source_ip = from.ip;
    q.destination_ip = dest.value_or(on_path ? peer(50).ip : self.ip);
    q.session = kSession;
    q.on_path = on_path;
    q.radius = radius;
    q.sa_identifier = kSa;
    return q;
  }

  StMessage data(const PeerIdentity& from) const {
    StMessage d;
    d.kind = StMessage::Kind::kData;
    d.source = from.pid;
    d.destination = self.pid;
    d.source_ip = from.ip;
    d.destination_ip = self.ip;
    d.session = kSession;
    d.sa_identifier = kSa;
    d.sa_payload = osp::encode(probe());
    return d;
  }

  // Reply from `from` to the query it received, echoing `echo`.
  StMessage answer(StMessage::Kind kind, const PeerIdentity& from, Ipv4Address echo,
                   osp::SessionId session = kSession) const {
    StMessage m;
    m.kind = kind;
    m.source = from.pid;
    m.destination = self.pid;
    m.source_ip = from.ip;
    m.destination_ip = echo;
    m.session = session;
    m.sa_identifier = kSa;
    return m;
  }

  StMessage data_response(const PeerIdentity& from, std::vector<osp::SfStatusElement> stack) const {
    StMessage m = answer(StMessage::Kind::kDataResponse, from, self.ip);
    SaMessage r;
    r.kind = SaMessage::Kind::kResponse;
    r.status_elements = std::move(stack);
    m.sa_payload = osp::encode(r);
    return m;
  }

  std::vector<const StMessage*> sent_of(StMessage::Kind k) const {
    std::vector<const StMessage*> out;
    for (const auto& s : port.sent) {
      const auto& m = std::get<StMessage>(s.message);
      if (m.kind == k) out.push_back(&m);
    }
    return out;
  }

  PeerIdentity self = peer(0);
  FakePort port;
  PeerTable pet;
  DistributionEngine engine;
  std::vector<SessionReport> reports;
  int data_processed = 0;
};

}  // namespace

TEST(Distribution, InitiatorQueriesOnPathAndNeighborsWithinRadius) {
  Rig rig;
  rig.pet.mark_neighbor(peer(1), 1, {}, {});
  rig.pet.mark_neighbor(peer(2), 2, {}, {});
  rig.pet.mark_neighbor(peer(4), 4, {}, {});
  rig.pet.mark_unreachable(peer(5), {});
  rig.engine.submit(probe(), peer(50).ip, 3, {}, kSa, kSession);

  ASSERT_EQ(rig.port.sent.size(), 3u);
  const auto& onq = rig.port.st(0);
  EXPECT_TRUE(onq.on_path);
  EXPECT_EQ(onq.radius, 3);
  EXPECT_EQ(rig.port.sent[0].to, peer(50).ip);
  EXPECT_TRUE(rig.port.sent[0].interceptable);
  std::set<std::pair<std::uint64_t, int>> off;
  for (std::size_t i = 1; i < 3; ++i) {
    EXPECT_FALSE(rig.port.st(i).on_path);
    EXPECT_FALSE(rig.port.sent[i].interceptable);
    off.emplace(rig.port.st(i).destination.value, rig.port.st(i).radius);
  }
  EXPECT_EQ(off, (std::set<std::pair<std::uint64_t, int>>{{101, 2}, {102, 1}}));
  EXPECT_EQ(rig.engine.st_state(kSa, kSession), StState::kActive);
  EXPECT_EQ(rig.engine.sa_state(kSa, kSession), SaState::kWaitResponses);
}

TEST(Distribution, RadiusZeroNeverLeavesPath) {
  Rig rig;
  rig.pet.mark_neighbor(peer(1), 1, {}, {});
  rig.engine.submit(probe(), peer(50).ip, 0, {}, kSa, kSession);
  ASSERT_EQ(rig.port.sent.size(), 1u);
  EXPECT_TRUE(rig.port.st(0).on_path);
}

TEST(Distribution, SelfDestinationIsSingleNodeSession) {
  Rig rig;
  rig.engine.registry().set(7, osp::kStatusAvailable);
  std::optional<ProbeResult> got;
  rig.engine.submit(probe(), rig.self.ip, 2, [&](const ProbeResult& r) { got = r; }, kSa, kSession);
  ASSERT_TRUE(got);
  EXPECT_TRUE(got->complete);
  ASSERT_EQ(got->elements.size(), 1u);
  EXPECT_EQ(got->elements[0], (osp::SfStatusElement{NodeId{0}, osp::kStatusAvailable, 0}));
  EXPECT_EQ(rig.engine.active_sessions(), 0u);
}

TEST(Distribution, SubmitRejectsBadArguments) {
  Rig rig;
  EXPECT_THROW(rig.engine.submit(probe(), peer(9).ip, -1, {}), std::invalid_argument);
  rig.engine.submit(probe(), peer(9).ip, 0, {}, kSa, kSession);
  EXPECT_THROW(rig.engine.submit(probe(), peer(9).ip, 0, {}, kSa, kSession), std::invalid_argument);
}

TEST(Distribution, OnPathQueryAccepted) {
  Rig rig;
  rig.engine.on_message(rig.query(peer(1), 2, true), 1);
  const auto resp = rig.sent_of(StMessage::Kind::kResponse);
  ASSERT_EQ(resp.size(), 1u);
  EXPECT_EQ(resp[0]->destination, peer(1).pid);
  EXPECT_EQ(resp[0]->destination_ip, peer(50).ip);  // echoes the signaling destination
  EXPECT_EQ(rig.engine.st_state(kSa, kSession), StState::kOnPathForwarder);
}

TEST(Distribution, DuplicateOffPathWithSmallerRadiusRejected) {
  Rig rig;
  rig.engine.on_message(rig.query(peer(1), 2, false), 1);
  rig.engine.on_message(rig.query(peer(2), 2, false), 1);
  const auto errs = rig.sent_of(StMessage::Kind::kError);
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_EQ(errs[0]->destination, peer(2).pid);
  EXPECT_EQ(errs[0]->error_code, static_cast<std::uint8_t>(StErrorCode::kRejected));
  EXPECT_EQ(rig.engine.st_state(kSa, kSession), StState::kOffPathForwarder);
}

TEST(Distribution, LargerRadiusAbortsAndReplaces) {
  Rig rig;
  rig.engine.on_message(rig.query(peer(1), 1, false), 1);
  rig.engine.on_message(rig.query(peer(2), 3, false), 1);
  const auto errs = rig.sent_of(StMessage::Kind::kError);
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_EQ(errs[0]->destination, peer(1).pid);
  EXPECT_EQ(errs[0]->error_code, static_cast<std::uint8_t>(StErrorCode::kAborted));
  EXPECT_EQ(rig.sent_of(StMessage::Kind::kResponse).size(), 2u);
  ASSERT_EQ(rig.reports.size(), 1u);
  EXPECT_EQ(rig.reports[0].end, SessionEnd::kReplaced);

  // Data from the displaced upstream is ignored; the new one is served.
  rig.engine.on_message(rig.data(peer(1)), 1);
  EXPECT_EQ(rig.data_processed, 0);
  rig.engine.on_message(rig.data(peer(2)), 1);
  EXPECT_EQ(rig.data_processed, 1);
}

TEST(Distribution, OnPathDisplacesOffPath) {
  Rig rig;
  rig.engine.on_message(rig.query(peer(1), 3, false), 1);
  rig.engine.on_message(rig.query(peer(2), 0, true), 1);
  EXPECT_EQ(rig.engine.st_state(kSa, kSession), StState::kOnPathForwarder);
  EXPECT_EQ(rig.sent_of(StMessage::Kind::kError).size(), 1u);
}

TEST(Distribution, DuplicateOnPathRejected) {
  Rig rig;
  rig.engine.on_message(rig.query(peer(1), 2, true), 1);
  rig.engine.on_message(rig.query(peer(2), 3, true), 1);
  ASSERT_EQ(rig.sent_of(StMessage::Kind::kError).size(), 1u);
  EXPECT_EQ(rig.engine.st_state(kSa, kSession), StState::kOnPathForwarder);
}

TEST(Distribution, LeafAnswersWithOwnElement) {
  Rig rig;
  rig.engine.registry().set(7, osp::kStatusAvailable);
  rig.pet.mark_neighbor(peer(1), 1, {}, {});  // the upstream, never queried back
  rig.engine.on_message(rig.query(peer(1), 2, false), 1);
  rig.engine.on_message(rig.data(peer(1)), 1);
  const auto dr = rig.sent_of(StMessage::Kind::kDataResponse);
  ASSERT_EQ(dr.size(), 1u);
  auto sa = osp::decode_sa(dr[0]->sa_payload);
  ASSERT_TRUE(std::holds_alternative<SaMessage>(sa));
  EXPECT_EQ(std::get<SaMessage>(sa).status_elements,
            (std::vector<osp::SfStatusElement>{{NodeId{0}, osp::kStatusAvailable, 0}}));
  EXPECT_EQ(rig.engine.active_sessions(), 0u);
  ASSERT_EQ(rig.reports.size(), 1u);
  EXPECT_EQ(rig.reports[0].end, SessionEnd::kLeaf);
}

TEST(Distribution, LeafWithoutServiceReportsAbsent) {
  Rig rig;
  rig.engine.on_message(rig.query(peer(1), 0, false), 1);
  rig.engine.on_message(rig.data(peer(1)), 1);
  auto sa = osp::decode_sa(rig.sent_of(StMessage::Kind::kDataResponse)[0]->sa_payload);
  EXPECT_EQ(std::get<SaMessage>(sa).status_elements[0].status, osp::kStatusAbsent);
}

// Forwarder with two downstream peers: one answers with a stack, the other
// rejects. Depths arriving from below are incremented once.
TEST(Distribution, ForwarderStacksAndCompletes) {
  Rig rig;
  rig.pet.mark_neighbor(peer(1), 1, {}, {});
  rig.pet.mark_neighbor(peer(2), 1, {}, {});
  rig.pet.mark_neighbor(peer(3), 1, {}, {});
  rig.engine.on_message(rig.query(peer(1), 2, false), 1);
  rig.engine.on_message(rig.data(peer(1)), 1);
  ASSERT_EQ(rig.sent_of(StMessage::Kind::kQuery).size(), 2u);
  EXPECT_EQ(rig.engine.st_state(kSa, kSession), StState::kOffPathActive);

  rig.engine.on_message(rig.answer(StMessage::Kind::kResponse, peer(2), peer(2).ip), 1);
  ASSERT_EQ(rig.sent_of(StMessage::Kind::kData).size(), 1u);
  rig.engine.on_message(rig.answer(StMessage::Kind::kError, peer(3), peer(3).ip), 1);
  rig.engine.on_message(rig.data_response(peer(2), {{NodeId{9}, 1, 1}, {NodeId{2}, 1, 0}}), 1);

  const auto dr = rig.sent_of(StMessage::Kind::kDataResponse);
  ASSERT_EQ(dr.size(), 1u);
  auto sa = std::get<SaMessage>(osp::decode_sa(dr[0]->sa_payload));
  EXPECT_EQ(sa.status_elements, (std::vector<osp::SfStatusElement>{
                                    {NodeId{9}, 1, 2}, {NodeId{2}, 1, 1}, {NodeId{0}, 0, 0}}));
  ASSERT_EQ(rig.reports.size(), 1u);
  EXPECT_EQ(rig.reports[0].end, SessionEnd::kCompleted);
  EXPECT_EQ(rig.reports[0].resp_counter + rig.reports[0].error_counter, rig.reports[0].n);
}

TEST(Distribution, DuplicateDataResponseNotRecounted) {
  Rig rig;
  rig.pet.mark_neighbor(peer(2), 1, {}, {});
  rig.pet.mark_neighbor(peer(3), 1, {}, {});
  rig.engine.submit(probe(), rig.self.ip, 1, {}, kSa, kSession);
  rig.engine.on_message(rig.answer(StMessage::Kind::kResponse, peer(2), peer(2).ip), 1);
  rig.engine.on_message(rig.data_response(peer(2), {{NodeId{2}, 0, 0}}), 1);
  rig.engine.on_message(rig.data_response(peer(2), {{NodeId{2}, 0, 0}}), 1);
  EXPECT_EQ(rig.engine.st_state(kSa, kSession), StState::kActive);  // peer 3 still owed
}

TEST(Distribution, TwoErrorsCompleteWithOwnElement) {
  Rig rig;
  rig.pet.mark_neighbor(peer(2), 1, {}, {});
  rig.pet.mark_neighbor(peer(3), 1, {}, {});
  std::optional<ProbeResult> got;
  rig.engine.submit(probe(), rig.self.ip, 1, [&](const ProbeResult& r) { got = r; }, kSa, kSession);
  rig.engine.on_message(rig.answer(StMessage::Kind::kError, peer(2), peer(2).ip), 1);
  EXPECT_FALSE(got);
  rig.engine.on_message(rig.answer(StMessage::Kind::kError, peer(3), peer(3).ip), 1);
  ASSERT_TRUE(got);
  EXPECT_TRUE(got->complete);
  EXPECT_EQ(got->stack.size(), 1u);
}

TEST(Distribution, CrossSessionErrorDiscarded) {
  Rig rig;
  rig.pet.mark_neighbor(peer(2), 1, {}, {});
  rig.engine.submit(probe(), rig.self.ip, 1, {}, kSa, kSession);
  rig.engine.on_message(rig.answer(StMessage::Kind::kError, peer(2), peer(2).ip, kSession + 1), 1);
  EXPECT_EQ(rig.engine.st_state(kSa, kSession), StState::kActive);
}

TEST(Distribution, DataWithoutSessionDiscarded) {
  Rig rig;
  rig.engine.on_message(rig.data(peer(1)), 1);
  EXPECT_TRUE(rig.port.sent.empty());
  EXPECT_EQ(rig.data_processed, 0);
}

TEST(Distribution, UnansweredQueryCountsAsError) {
  Rig rig;
  rig.pet.mark_neighbor(peer(2), 1, {}, {});
  std::optional<ProbeResult> got;
  rig.engine.submit(probe(), rig.self.ip, 1, [&](const ProbeResult& r) { got = r; }, kSa, kSession);
  rig.port.run_for(rig.engine.config().query_timeout);
  ASSERT_TRUE(got);
  EXPECT_TRUE(got->complete);
}

TEST(Distribution, WaitRespTimeoutDeliversPartialStack) {
  DistributionConfig cfg;
  cfg.query_timeout = 10s;  // keep the query open past WaitResp
  Rig rig(cfg);
  rig.pet.mark_neighbor(peer(2), 1, {}, {});
  rig.pet.mark_neighbor(peer(3), 1, {}, {});
  std::optional<ProbeResult> got;
  rig.engine.submit(probe(), rig.self.ip, 1, [&](const ProbeResult& r) { got = r; }, kSa, kSession);
  rig.engine.on_message(rig.answer(StMessage::Kind::kResponse, peer(2), peer(2).ip), 1);
  rig.engine.on_message(rig.data_response(peer(2), {{NodeId{2}, 0, 0}}), 1);
  rig.port.run_for(cfg.wait_resp_timeout);
  ASSERT_TRUE(got);
  EXPECT_FALSE(got->complete);
  EXPECT_EQ(got->elements.size(), 2u);
  EXPECT_EQ(got->finished - got->started, cfg.wait_resp_timeout);
}

TEST(Distribution, AcceptedWithoutDataExpires) {
  Rig rig;
  rig.engine.on_message(rig.query(peer(1), 1, false), 1);
  rig.port.run_for(rig.engine.config().st_session_timeout);
  EXPECT_EQ(rig.engine.active_sessions(), 0u);
  const auto errs = rig.sent_of(StMessage::Kind::kError);
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_EQ(errs[0]->error_code, static_cast<std::uint8_t>(StErrorCode::kAborted));
  ASSERT_EQ(rig.reports.size(), 1u);
  EXPECT_EQ(rig.reports[0].end, SessionEnd::kExpired);
}

TEST(Distribution, FinishedSessionSuppressesLateDuplicates) {
  Rig rig;
  rig.engine.on_message(rig.query(peer(1), 1, false), 1);
  rig.engine.on_message(rig.data(peer(1)), 1);  // leaf, done
  rig.engine.on_message(rig.query(peer(2), 1, false), 1);
  EXPECT_EQ(rig.sent_of(StMessage::Kind::kError).size(), 1u);
  EXPECT_EQ(rig.engine.active_sessions(), 0u);
}

TEST(Distribution, OnPathReplyMatchedByEcho) {
  Rig rig;
  rig.engine.submit(probe(), peer(50).ip, 0, {}, kSa, kSession);
  // Whoever intercepts answers; the echo ties it to the on-path query.
  rig.engine.on_message(rig.answer(StMessage::Kind::kResponse, peer(7), peer(50).ip), 1);
  const auto data = rig.sent_of(StMessage::Kind::kData);
  ASSERT_EQ(data.size(), 1u);
  EXPECT_EQ(data[0]->destination, peer(7).pid);
}

TEST(Distribution, DeepStackDepthClamped) {
  Rig rig;
  rig.pet.mark_neighbor(peer(2), 1, {}, {});
  std::optional<ProbeResult> got;
  rig.engine.submit(probe(), rig.self.ip, 1, [&](const ProbeResult& r) { got = r; }, kSa, kSession);
  rig.engine.on_message(rig.answer(StMessage::Kind::kResponse, peer(2), peer(2).ip), 1);
  rig.engine.on_message(rig.data_response(peer(2), {{NodeId{2}, 0, 255}}), 1);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->stack[0].depth, 255);
}
