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

/// @file codec.hpp
/// Binary wire format for gossip, ST and SA messages.
///
/// All integers are big-endian, fixed width. Every message starts with a
/// one-byte type. The byte layout of each message is tabulated in
/// docs/wire-format.md; the constants below give the fixed part of each.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "osp/types.hpp"

namespace osp {

using Bytes = std::vector<std::uint8_t>;

enum class MessageType : std::uint8_t {
  kRegistration = 0x01,
  kRegResponse = 0x02,
  kAck = 0x03,
  kQuery = 0x10,
  kResponse = 0x11,
  kError = 0x12,
  kData = 0x13,
  kDataResponse = 0x14,
  kSetup = 0x20,
  kRemove = 0x21,
  kProbe = 0x22,
  kSaResponse = 0x23,
};

std::string_view to_string(MessageType t);

enum class MetricType : std::uint8_t { kIpHops = 0x01 };

constexpr std::uint8_t kIpv4AddressType = 4;

// Fixed sizes in bytes.
constexpr std::size_t kGossipHeaderSize = 34;   // Registration/RegResponse w/o shared peers
constexpr std::size_t kSharedPeerSize = 13;     // pid + address type + address
constexpr std::size_t kAckSize = 25;
constexpr std::size_t kQuerySize = 38;
constexpr std::size_t kResponseSize = 35;
constexpr std::size_t kErrorSize = 34;
constexpr std::size_t kDataHeaderSize = 39;     // Data/DataResponse w/o payload
constexpr std::size_t kSaRequestHeaderSize = 4; // Setup/Remove/Probe w/o SF payload
constexpr std::size_t kSaResponseHeaderSize = 4;
constexpr std::size_t kStatusElementSize = 6;

struct GossipMessage {
  enum class Kind : std::uint8_t { kRegistration, kRegResponse, kAck };

  Kind kind = Kind::kRegistration;
  Pid source;
  Pid destination;
  Ipv4Address source_ip;  // absent on the wire for Ack
  SessionId session = 0;
  std::int32_t metric = -1;        // absent on the wire for Ack
  std::vector<PeerIdentity> pts;   // absent on the wire for Ack

  bool operator==(const GossipMessage&) const = default;
};

std::string_view to_string(GossipMessage::Kind k);

/// ST error codes.
enum class StErrorCode : std::uint8_t {
  kRejected = 0x01,  // duplicate query with radius not larger than the stored one
  kAborted = 0x02,   // an accepted session was replaced or expired
};

struct StMessage {
  enum class Kind : std::uint8_t { kQuery, kResponse, kError, kData, kDataResponse };

  Kind kind = Kind::kQuery;
  Pid source;
  Pid destination;
  Ipv4Address source_ip;
  Ipv4Address destination_ip;
  SessionId session = 0;
  bool on_path = false;                        // Query only
  MetricType metric_type = MetricType::kIpHops;  // Query only
  int radius = 0;                              // Query only, 0..255
  std::uint16_t sa_identifier = 0;             // not carried by Error
  std::uint8_t error_code = 0;                 // Error only
  Bytes sa_payload;                            // Data/DataResponse only

  bool operator==(const StMessage&) const = default;
};

std::string_view to_string(StMessage::Kind k);

struct SfStatusElement {
  NodeId node;
  std::uint8_t status = 0;
  int depth = 0;  // 0..255 on the wire

  bool operator==(const SfStatusElement&) const = default;
};

struct SaMessage {
  enum class Kind : std::uint8_t { kSetup, kRemove, kProbe, kResponse };

  Kind kind = Kind::kProbe;
  std::uint16_t service_type = 0;             // requests only
  std::optional<Bytes> sf_payload;            // requests only
  std::uint8_t response_code = 0;             // Response only
  std::vector<SfStatusElement> status_elements;  // Response only

  bool operator==(const SaMessage&) const = default;
};

std::string_view to_string(SaMessage::Kind k);

/// Anything carried directly by the network.
using WireMessage = std::variant<GossipMessage, StMessage>;

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecodeError {
  std::size_t offset = 0;
  std::string what;
};

template <typename T>
using Decoded = std::variant<T, DecodeError>;

Bytes encode(const GossipMessage& m);
Bytes encode(const StMessage& m);
Bytes encode(const SaMessage& m);
Bytes encode(const WireMessage& m);

/// Decodes a gossip or ST message. Never reads past `bytes`.
Decoded<WireMessage> decode(std::span<const std::uint8_t> bytes);
Decoded<SaMessage> decode_sa(std::span<const std::uint8_t> bytes);

/// Message type of a wire message, from its first byte.
MessageType wire_type(const WireMessage& m);

/// Encoded length, computed without encoding.
std::size_t encoded_size(const GossipMessage& m);
std::size_t encoded_size(const StMessage& m);
std::size_t encoded_size(const SaMessage& m);

/// Gossip message sizes used by the analytic overhead model. They are
/// configuration, independent of what the codec actually emits.
struct NominalSizes {
  int registration = 184;
  int response = 184;
  int ack = 112;
};

int nominal_size(GossipMessage::Kind kind, const NominalSizes& sizes = {});

}  // namespace osp
