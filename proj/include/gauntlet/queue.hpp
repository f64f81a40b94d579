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

// Embedded at-least-once message broker. Each challenge owns one queue,
// addressed by its routing key; consumers take time-limited leases and must
// ack before the visibility deadline or the message is redelivered with its
// attempt counter bumped.

#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gauntlet/clock.hpp"

namespace gauntlet {

enum class Pool { kLocal, kRemote };

struct RoutingKey {
  std::string challenge_id;
  Pool pool = Pool::kLocal;

  std::string str() const;  // "<challenge_id>/local"
  static RoutingKey parse(const std::string& text);
  auto operator<=>(const RoutingKey&) const = default;
};

RoutingKey routing_key_for(const std::string& challenge_id, bool remote_evaluation);

struct QueueMessage {
  std::string message_id;
  RoutingKey routing_key;
  std::string submission_id;
  Timestamp enqueued_at{};
  std::int64_t attempt = 1;
};

struct Lease {
  std::string message_id;
  std::string holder;
  Timestamp expires_at{};
  std::uint64_t sequence = 0;  // distinguishes successive leases of one message
};

struct Delivery {
  QueueMessage message;
  Lease lease;
};

struct BrokerOptions {
  Duration default_visibility = std::chrono::seconds(300);
  std::int64_t max_attempts = 3;
  // Append-only record log. Empty path keeps the broker purely in memory.
  std::filesystem::path log_path;
};

struct BrokerStats {
  std::size_t available = 0;
  std::size_t leased = 0;
  std::size_t dead = 0;
  std::size_t acked = 0;
};

class Broker {
 public:
  Broker(const Clock& clock, BrokerOptions options = {});

  void declare_route(const RoutingKey& key);
  bool has_route(const RoutingKey& key) const;

  // Idempotent on message_id. Throws Error{kUnknownRoute}.
  void publish(QueueMessage msg);

  // Throws Error{kUnknownRoute}, Error{kBadRequest} for non-positive visibility.
  std::optional<Delivery> lease(const RoutingKey& key, const std::string& worker_id,
                                Duration visibility);
  std::optional<Delivery> lease(const RoutingKey& key, const std::string& worker_id) {
    return lease(key, worker_id, options_.default_visibility);
  }

  // Both throw Error{kLeaseExpired} or Error{kLeaseNotHeld}.
  void ack(const Lease& lease);
  // requeue=true makes the message immediately leasable with attempt+1 unless
  // that would exceed max_attempts; requeue=false dead-letters it.
  void nack(const Lease& lease, bool requeue);

  // Messages waiting or leased on the route (not acked, not dead).
  std::size_t depth(const RoutingKey& key) const;
  std::vector<QueueMessage> dead_letters(const std::string& challenge_id) const;
  BrokerStats stats() const;
  bool acked(const std::string& message_id) const;
  const BrokerOptions& options() const { return options_; }

 private:
  enum class State { kAvailable, kLeased, kAcked, kDead };

  struct Entry {
    QueueMessage msg;
    State state = State::kAvailable;
    std::optional<Lease> lease;
    std::uint64_t order = 0;
  };

  void expire_locked(Entry& e);
  Entry& held_entry_locked(const Lease& lease);
  void replay_log();
  void append(const std::string& line);

  const Clock& clock_;
  BrokerOptions options_;
  mutable std::mutex mu_;
  std::map<RoutingKey, std::map<std::uint64_t, std::string>> routes_;  // order -> id
  std::map<std::string, Entry> entries_;
  std::uint64_t next_order_ = 0;
  std::uint64_t next_sequence_ = 0;
  std::ofstream log_;
};

}  // namespace gauntlet
