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

#include <cstdint>
#include <functional>

#include "osp/codec.hpp"
#include "osp/types.hpp"

namespace osp {

using TimerId = std::uint64_t;

/// Everything a protocol engine may do to the outside world. The simulator
/// implements it per node; unit tests use a recording fake.
class Port {
 public:
  virtual ~Port() = default;

  virtual SimTime now() const = 0;
  /// Sends toward `to`. Interceptable messages are consumed by the first OSP
  /// node on the route.
  virtual void transmit(const WireMessage& message, Ipv4Address to, bool interceptable) = 0;
  virtual TimerId start_timer(SimDuration delay, std::function<void()> fire) = 0;
  virtual void cancel_timer(TimerId id) = 0;
};

}  // namespace osp
