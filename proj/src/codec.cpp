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

#include "osp/codec.hpp"

#include <cstdio>
#include <limits>

namespace osp {

std::string to_string(Ipv4Address a) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (a.value >> 24) & 0xFF, (a.value >> 16) & 0xFF,
                (a.value >> 8) & 0xFF, a.value & 0xFF);
  return buf;
}

std::string to_string(Pid p) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(p.value));
  return buf;
}

std::string_view to_string(MessageType t) {
  switch (t) {
    case MessageType::kRegistration: return "Registration";
    case MessageType::kRegResponse: return "RegResponse";
    case MessageType::kAck: return "Ack";
    case MessageType::kQuery: return "Query";
    case MessageType::kResponse: return "Response";
    case MessageType::kError: return "Error";
    case MessageType::kData: return "Data";
    case MessageType::kDataResponse: return "DataResponse";
    case MessageType::kSetup: return "Setup";
    case MessageType::kRemove: return "Remove";
    case MessageType::kProbe: return "Probe";
    case MessageType::kSaResponse: return "SaResponse";
  }
  return "?";
}

namespace {

MessageType type_of(GossipMessage::Kind k) {
  switch (k) {
    case GossipMessage::Kind::kRegistration: return MessageType::kRegistration;
    case GossipMessage::Kind::kRegResponse: return MessageType::kRegResponse;
    case GossipMessage::Kind::kAck: return MessageType::kAck;
  }
  return MessageType::kAck;
}

MessageType type_of(StMessage::Kind k) {
  switch (k) {
    case StMessage::Kind::kQuery: return MessageType::kQuery;
    case StMessage::Kind::kResponse: return MessageType::kResponse;
    case StMessage::Kind::kError: return MessageType::kError;
    case StMessage::Kind::kData: return MessageType::kData;
    case StMessage::Kind::kDataResponse: return MessageType::kDataResponse;
  }
  return MessageType::kQuery;
}

MessageType type_of(SaMessage::Kind k) {
  switch (k) {
    case SaMessage::Kind::kSetup: return MessageType::kSetup;
    case SaMessage::Kind::kRemove: return MessageType::kRemove;
    case SaMessage::Kind::kProbe: return MessageType::kProbe;
    case SaMessage::Kind::kResponse: return MessageType::kSaResponse;
  }
  return MessageType::kProbe;
}

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  Bytes take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes out_;
};

// Reader errors are reported by throwing this internal type; decode() turns
// it into a DecodeError so callers never see an exception.
struct Truncated {
  std::size_t offset;
  std::string what;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8(const char* field) { return static_cast<std::uint8_t>(get(1, field)); }
  std::uint16_t u16(const char* field) { return static_cast<std::uint16_t>(get(2, field)); }
  std::uint32_t u32(const char* field) { return static_cast<std::uint32_t>(get(4, field)); }
  std::uint64_t u64(const char* field) { return get(8, field); }

  Bytes bytes(std::size_t n, const char* field) {
    need(n, field);
    Bytes b(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
            in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return b;
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

  [[noreturn]] void fail(std::size_t at, std::string what) const { throw Truncated{at, std::move(what)}; }

  void expect_end() const {
    if (pos_ != in_.size()) fail(pos_, std::to_string(in_.size() - pos_) + " trailing bytes");
  }

 private:
  void need(std::size_t n, const char* field) const {
    if (in_.size() - pos_ < n) fail(pos_, std::string("truncated reading ") + field);
  }

  std::uint64_t get(int width, const char* field) {
    need(static_cast<std::size_t>(width), field);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint8_t checked_u8(int v, const char* field) {
  if (v < 0 || v > 255) throw EncodeError(std::string(field) + " out of range: " + std::to_string(v));
  return static_cast<std::uint8_t>(v);
}

void write_peer(Writer& w, const PeerIdentity& p) {
  w.u64(p.pid.value);
  w.u8(kIpv4AddressType);
  w.u32(p.ip.value);
}

PeerIdentity read_peer(Reader& r) {
  PeerIdentity p;
  p.pid.value = r.u64("shared peer pid");
  const auto at = r.offset();
  if (r.u8("shared peer address type") != kIpv4AddressType) r.fail(at, "unsupported address type");
  p.ip.value = r.u32("shared peer address");
  return p;
}

GossipMessage read_gossip(Reader& r, MessageType t) {
  GossipMessage m;
  m.kind = t == MessageType::kRegistration  ? GossipMessage::Kind::kRegistration
           : t == MessageType::kRegResponse ? GossipMessage::Kind::kRegResponse
                                            : GossipMessage::Kind::kAck;
  m.source.value = r.u64("source pid");
  m.destination.value = r.u64("destination pid");
  if (m.kind == GossipMessage::Kind::kAck) {
    m.session = r.u64("session id");
    return m;
  }
  m.source_ip.value = r.u32("source address");
  m.session = r.u64("session id");
  m.metric = static_cast<std::int32_t>(r.u32("metric value"));
  const auto count_at = r.offset();
  const auto count = r.u8("shared peer count");
  if (r.remaining() < count * kSharedPeerSize) {
    r.fail(count_at, "shared peer count " + std::to_string(count) + " exceeds buffer");
  }
  m.pts.reserve(count);
  for (int i = 0; i < count; ++i) m.pts.push_back(read_peer(r));
  return m;
}

StMessage read_st(Reader& r, MessageType t) {
  StMessage m;
  switch (t) {
    case MessageType::kQuery: m.kind = StMessage::Kind::kQuery; break;
    case MessageType::kResponse: m.kind = StMessage::Kind::kResponse; break;
    case MessageType::kError: m.kind = StMessage::Kind::kError; break;
    case MessageType::kData: m.kind = StMessage::Kind::kData; break;
    default: m.kind = StMessage::Kind::kDataResponse; break;
  }
  m.source.value = r.u64("source pid");
  m.destination.value = r.u64("destination pid");
  if (m.kind == StMessage::Kind::kError) {
    m.session = r.u64("session id");
    m.source_ip.value = r.u32("source address");
    m.destination_ip.value = r.u32("destination address");
    m.error_code = r.u8("error code");
    return m;
  }
  m.source_ip.value = r.u32("source address");
  m.destination_ip.value = r.u32("destination address");
  m.session = r.u64("session id");
  if (m.kind == StMessage::Kind::kQuery) {
    const auto at = r.offset();
    const auto flag = r.u8("on-path flag");
    if (flag > 1) r.fail(at, "on-path flag must be 0 or 1");
    m.on_path = flag == 1;
    const auto mt_at = r.offset();
    const auto mt = r.u8("metric type");
    if (mt != static_cast<std::uint8_t>(MetricType::kIpHops)) r.fail(mt_at, "unknown metric type");
    m.metric_type = MetricType::kIpHops;
    m.radius = r.u8("radius");
  }
  m.sa_identifier = r.u16("SA identifier");
  if (m.kind == StMessage::Kind::kData || m.kind == StMessage::Kind::kDataResponse) {
    const auto len_at = r.offset();
    const auto len = r.u32("payload length");
    if (len > r.remaining()) r.fail(len_at, "payload length " + std::to_string(len) + " exceeds buffer");
    m.sa_payload = r.bytes(len, "SA payload");
  }
  return m;
}

}  // namespace

std::string_view to_string(GossipMessage::Kind k) { return to_string(type_of(k)); }
std::string_view to_string(StMessage::Kind k) { return to_string(type_of(k)); }
std::string_view to_string(SaMessage::Kind k) { return to_string(type_of(k)); }

std::size_t encoded_size(const GossipMessage& m) {
  if (m.kind == GossipMessage::Kind::kAck) return kAckSize;
  return kGossipHeaderSize + kSharedPeerSize * m.pts.size();
}

std::size_t encoded_size(const StMessage& m) {
  switch (m.kind) {
    case StMessage::Kind::kQuery: return kQuerySize;
    case StMessage::Kind::kResponse: return kResponseSize;
    case StMessage::Kind::kError: return kErrorSize;
    case StMessage::Kind::kData:
    case StMessage::Kind::kDataResponse: return kDataHeaderSize + m.sa_payload.size();
  }
  return 0;
}

std::size_t encoded_size(const SaMessage& m) {
  if (m.kind == SaMessage::Kind::kResponse) {
    return kSaResponseHeaderSize + kStatusElementSize * m.status_elements.size();
  }
  return kSaRequestHeaderSize + (m.sf_payload ? 4 + m.sf_payload->size() : 0);
}

Bytes encode(const GossipMessage& m) {
  Writer w(encoded_size(m));
  w.u8(static_cast<std::uint8_t>(type_of(m.kind)));
  w.u64(m.source.value);
  w.u64(m.destination.value);
  if (m.kind == GossipMessage::Kind::kAck) {
    if (!m.pts.empty()) throw EncodeError("Ack carries no shared peers");
    w.u64(m.session);
    return w.take();
  }
  w.u32(m.source_ip.value);
  w.u64(m.session);
  w.u32(static_cast<std::uint32_t>(m.metric));
  if (m.pts.size() > 255) throw EncodeError("too many shared peers: " + std::to_string(m.pts.size()));
  w.u8(static_cast<std::uint8_t>(m.pts.size()));
  for (const auto& p : m.pts) write_peer(w, p);
  return w.take();
}

Bytes encode(const StMessage& m) {
  Writer w(encoded_size(m));
  w.u8(static_cast<std::uint8_t>(type_of(m.kind)));
  w.u64(m.source.value);
  w.u64(m.destination.value);
  if (m.kind == StMessage::Kind::kError) {
    w.u64(m.session);
    w.u32(m.source_ip.value);
    w.u32(m.destination_ip.value);
    w.u8(m.error_code);
    return w.take();
  }
  w.u32(m.source_ip.value);
  w.u32(m.destination_ip.value);
  w.u64(m.session);
  if (m.kind == StMessage::Kind::kQuery) {
    w.u8(m.on_path ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(m.metric_type));
    w.u8(checked_u8(m.radius, "radius"));
  }
  w.u16(m.sa_identifier);
  if (m.kind == StMessage::Kind::kData || m.kind == StMessage::Kind::kDataResponse) {
    if (m.sa_payload.size() > std::numeric_limits<std::uint32_t>::max()) {
      throw EncodeError("SA payload too large");
    }
    w.u32(static_cast<std::uint32_t>(m.sa_payload.size()));
    w.bytes(m.sa_payload);
  }
  return w.take();
}

Bytes encode(const SaMessage& m) {
  Writer w(encoded_size(m));
  w.u8(static_cast<std::uint8_t>(type_of(m.kind)));
  if (m.kind == SaMessage::Kind::kResponse) {
    w.u8(m.response_code);
    if (m.status_elements.size() > 0xFFFF) throw EncodeError("too many status elements");
    w.u16(static_cast<std::uint16_t>(m.status_elements.size()));
    for (const auto& e : m.status_elements) {
      w.u32(Ipv4Address::of(e.node).value);
      w.u8(e.status);
      w.u8(checked_u8(e.depth, "depth"));
    }
    return w.take();
  }
  w.u16(m.service_type);
  w.u8(m.sf_payload ? 1 : 0);
  if (m.sf_payload) {
    if (m.sf_payload->size() > std::numeric_limits<std::uint32_t>::max()) {
      throw EncodeError("SF payload too large");
    }
    w.u32(static_cast<std::uint32_t>(m.sf_payload->size()));
    w.bytes(*m.sf_payload);
  }
  return w.take();
}

Bytes encode(const WireMessage& m) {
  return std::visit([](const auto& x) { return encode(x); }, m);
}

MessageType wire_type(const WireMessage& m) {
  return std::visit([](const auto& x) { return type_of(x.kind); }, m);
}

Decoded<WireMessage> decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  try {
    const auto type = static_cast<MessageType>(r.u8("message type"));
    WireMessage out;
    switch (type) {
      case MessageType::kRegistration:
      case MessageType::kRegResponse:
      case MessageType::kAck: out = read_gossip(r, type); break;
      case MessageType::kQuery:
      case MessageType::kResponse:
      case MessageType::kError:
      case MessageType::kData:
      case MessageType::kDataResponse: out = read_st(r, type); break;
      default:
        return DecodeError{0, "unknown message type " + std::to_string(static_cast<int>(type))};
    }
    r.expect_end();
    return out;
  } catch (const Truncated& t) {
    return DecodeError{t.offset, t.what};
  }
}

Decoded<SaMessage> decode_sa(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  try {
    const auto type = static_cast<MessageType>(r.u8("message type"));
    SaMessage m;
    switch (type) {
      case MessageType::kSetup: m.kind = SaMessage::Kind::kSetup; break;
      case MessageType::kRemove: m.kind = SaMessage::Kind::kRemove; break;
      case MessageType::kProbe: m.kind = SaMessage::Kind::kProbe; break;
      case MessageType::kSaResponse: m.kind = SaMessage::Kind::kResponse; break;
      default:
        return DecodeError{0, "unknown SA message type " + std::to_string(static_cast<int>(type))};
    }
    if (m.kind == SaMessage::Kind::kResponse) {
      m.response_code = r.u8("response code");
      const auto count_at = r.offset();
      const auto count = r.u16("status element count");
      if (r.remaining() < count * kStatusElementSize) {
        r.fail(count_at, "status element count " + std::to_string(count) + " exceeds buffer");
      }
      m.status_elements.reserve(count);
      for (int i = 0; i < count; ++i) {
        SfStatusElement e;
        const auto at = r.offset();
        const Ipv4Address ip{r.u32("node identifier")};
        if (!ip.is_node_address()) r.fail(at, "node identifier outside node address range");
        e.node = ip.node();
        e.status = r.u8("status code");
        e.depth = r.u8("depth");
        m.status_elements.push_back(e);
      }
    } else {
      m.service_type = r.u16("service type");
      const auto at = r.offset();
      const auto present = r.u8("SF payload flag");
      if (present > 1) r.fail(at, "SF payload flag must be 0 or 1");
      if (present == 1) {
        const auto len_at = r.offset();
        const auto len = r.u32("SF payload length");
        if (len > r.remaining()) r.fail(len_at, "SF payload length exceeds buffer");
        m.sf_payload = r.bytes(len, "SF payload");
      }
    }
    r.expect_end();
    return m;
  } catch (const Truncated& t) {
    return DecodeError{t.offset, t.what};
  }
}

int nominal_size(GossipMessage::Kind kind, const NominalSizes& sizes) {
  switch (kind) {
    case GossipMessage::Kind::kRegistration: return sizes.registration;
    case GossipMessage::Kind::kRegResponse: return sizes.response;
    case GossipMessage::Kind::kAck: return sizes.ack;
  }
  return 0;
}

}  // namespace osp
