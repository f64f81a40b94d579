// Copyright 2026 The Gauntlet Authors
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

#include <atomic>
#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace gauntlet {

using Timestamp = std::chrono::time_point<std::chrono::system_clock,
                                          std::chrono::milliseconds>;
using Duration = std::chrono::milliseconds;

// All time-dependent components read time through a Clock so tests can
// drive lease expiry, heartbeats and session ttl deterministically.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override;
};

class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start = Timestamp{Duration{1'700'000'000'000}})
      : now_(start.time_since_epoch().count()) {}

  Timestamp now() const override { return Timestamp{Duration{now_.load()}}; }
  void advance(Duration d) { now_ += d.count(); }
  void set(Timestamp t) { now_ = t.time_since_epoch().count(); }

 private:
  std::atomic<long long> now_;
};

// ISO-8601 UTC, millisecond precision: 2019-06-01T00:00:00.000Z
std::string format_timestamp(Timestamp t);
// Accepts "YYYY-MM-DDTHH:MM:SS[.fff]Z". Returns nullopt on anything else.
std::optional<Timestamp> parse_timestamp(std::string_view text);

// Start of the next UTC day after t.
Timestamp next_utc_midnight(Timestamp t);
// Days since the epoch, UTC.
long long utc_day(Timestamp t);

}  // namespace gauntlet
