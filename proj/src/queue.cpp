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

#include "gauntlet/queue.hpp"

#include <nlohmann/json.hpp>

#include "gauntlet/error.hpp"

namespace gauntlet {

using nlohmann::json;

namespace {
constexpr int kLogVersion = 1;
constexpr const char* kLogFormat = "gauntlet-broker-log";
}  // namespace

std::string RoutingKey::str() const {
  return challenge_id + (pool == Pool::kLocal ? "/local" : "/remote");
}

RoutingKey RoutingKey::parse(const std::string& text) {
  const auto slash = text.rfind('/');
  if (slash == std::string::npos) throw Error(ErrorCode::kBadRequest, "bad routing key " + text);
  const auto pool = text.substr(slash + 1);
  if (pool != "local" && pool != "remote") {
    throw Error(ErrorCode::kBadRequest, "bad routing key " + text);
  }
  return {text.substr(0, slash), pool == "local" ? Pool::kLocal : Pool::kRemote};
}

RoutingKey routing_key_for(const std::string& challenge_id, bool remote_evaluation) {
  return {challenge_id, remote_evaluation ? Pool::kRemote : Pool::kLocal};
}

Broker::Broker(const Clock& clock, BrokerOptions options)
    : clock_(clock), options_(std::move(options)) {
  if (options_.max_attempts < 1) options_.max_attempts = 1;
  if (options_.log_path.empty()) return;
  if (std::filesystem::exists(options_.log_path)) replay_log();
  const bool fresh = !std::filesystem::exists(options_.log_path) ||
                     std::filesystem::file_size(options_.log_path) == 0;
  log_.open(options_.log_path, std::ios::app);
  if (!log_) {
    throw Error(ErrorCode::kBrokerUnavailable,
                "cannot open broker log " + options_.log_path.string());
  }
  if (fresh) append(json{{"format", kLogFormat}, {"version", kLogVersion}}.dump());
}

void Broker::append(const std::string& line) {
  if (!log_.is_open()) return;
  log_ << line << '\n';
  log_.flush();
  if (!log_) throw Error(ErrorCode::kBrokerUnavailable, "broker log write failed");
}

void Broker::replay_log() {
  std::ifstream in(options_.log_path);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto rec = json::parse(line, nullptr, false);
    // A torn final line from a crash mid-append is dropped.
    if (rec.is_discarded()) continue;
    if (header) {
      header = false;
      if (rec.value("format", "") != kLogFormat || rec.value("version", 0) != kLogVersion) {
        throw Error(ErrorCode::kBrokerUnavailable, "unsupported broker log format");
      }
      continue;
    }
    const auto op = rec.value("op", "");
    if (op == "route") {
      routes_[RoutingKey::parse(rec["key"])];
      continue;
    }
    const std::string id = rec.value("id", "");
    if (op == "publish") {
      Entry e;
      e.msg.message_id = id;
      e.msg.routing_key = RoutingKey::parse(rec["key"]);
      e.msg.submission_id = rec["submission"];
      e.msg.enqueued_at = Timestamp{Duration{rec["enqueued_at"].get<long long>()}};
      e.msg.attempt = rec["attempt"];
      e.order = next_order_++;
      routes_[e.msg.routing_key][e.order] = id;
      entries_[id] = std::move(e);
      continue;
    }
    auto it = entries_.find(id);
    if (it == entries_.end()) continue;
    Entry& e = it->second;
    if (op == "lease") {
      e.state = State::kLeased;
      e.lease = Lease{id, rec["holder"], Timestamp{Duration{rec["expires_at"].get<long long>()}},
                      rec["seq"].get<std::uint64_t>()};
      next_sequence_ = std::max(next_sequence_, e.lease->sequence + 1);
    } else if (op == "expire" || op == "requeue") {
      e.state = State::kAvailable;
      e.lease.reset();
      ++e.msg.attempt;
    } else if (op == "ack" || op == "dead") {
      e.state = op == "ack" ? State::kAcked : State::kDead;
      e.lease.reset();
      routes_[e.msg.routing_key].erase(e.order);
    }
  }
}

void Broker::declare_route(const RoutingKey& key) {
  std::lock_guard lock(mu_);
  if (routes_.contains(key)) return;
  routes_[key];
  append(json{{"op", "route"}, {"key", key.str()}}.dump());
}

bool Broker::has_route(const RoutingKey& key) const {
  std::lock_guard lock(mu_);
  return routes_.contains(key);
}

void Broker::publish(QueueMessage msg) {
  std::lock_guard lock(mu_);
  auto route = routes_.find(msg.routing_key);
  if (route == routes_.end()) {
    throw Error(ErrorCode::kUnknownRoute, "no route " + msg.routing_key.str());
  }
  if (entries_.contains(msg.message_id)) return;
  if (msg.attempt < 1) msg.attempt = 1;
  append(json{{"op", "publish"},
              {"id", msg.message_id},
              {"key", msg.routing_key.str()},
              {"submission", msg.submission_id},
              {"enqueued_at", msg.enqueued_at.time_since_epoch().count()},
              {"attempt", msg.attempt}}
             .dump());
  Entry e;
  e.order = next_order_++;
  e.msg = std::move(msg);
  route->second[e.order] = e.msg.message_id;
  entries_[e.msg.message_id] = std::move(e);
}

void Broker::expire_locked(Entry& e) {
  append(json{{"op", "expire"}, {"id", e.msg.message_id}}.dump());
  e.state = State::kAvailable;
  e.lease.reset();
  ++e.msg.attempt;
}

std::optional<Delivery> Broker::lease(const RoutingKey& key, const std::string& worker_id,
                                      Duration visibility) {
  if (visibility <= Duration::zero()) {
    throw Error(ErrorCode::kBadRequest, "visibility must be positive");
  }
  std::lock_guard lock(mu_);
  auto route = routes_.find(key);
  if (route == routes_.end()) throw Error(ErrorCode::kUnknownRoute, "no route " + key.str());
  const auto now = clock_.now();
  for (const auto& [order, id] : route->second) {
    Entry& e = entries_.at(id);
    if (e.state == State::kLeased && e.lease->expires_at <= now) expire_locked(e);
    if (e.state != State::kAvailable) continue;
    Lease l{id, worker_id, now + visibility, next_sequence_++};
    append(json{{"op", "lease"},
                {"id", id},
                {"holder", worker_id},
                {"expires_at", l.expires_at.time_since_epoch().count()},
                {"seq", l.sequence}}
               .dump());
    e.state = State::kLeased;
    e.lease = l;
    return Delivery{e.msg, l};
  }
  return std::nullopt;
}

Broker::Entry& Broker::held_entry_locked(const Lease& lease) {
  auto it = entries_.find(lease.message_id);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kLeaseNotHeld, "unknown message " + lease.message_id);
  }
  Entry& e = it->second;
  const auto now = clock_.now();
  const bool current = e.state == State::kLeased && e.lease &&
                       e.lease->sequence == lease.sequence && e.lease->holder == lease.holder;
  if (current && e.lease->expires_at <= now) {
    expire_locked(e);
    throw Error(ErrorCode::kLeaseExpired, "lease on " + lease.message_id + " expired");
  }
  if (!current) {
    if (lease.expires_at <= now) {
      throw Error(ErrorCode::kLeaseExpired, "lease on " + lease.message_id + " expired");
    }
    throw Error(ErrorCode::kLeaseNotHeld, "lease on " + lease.message_id + " not held");
  }
  return e;
}

void Broker::ack(const Lease& lease) {
  std::lock_guard lock(mu_);
  Entry& e = held_entry_locked(lease);
  append(json{{"op", "ack"}, {"id", e.msg.message_id}}.dump());
  e.state = State::kAcked;
  e.lease.reset();
  routes_[e.msg.routing_key].erase(e.order);
}

void Broker::nack(const Lease& lease, bool requeue) {
  std::lock_guard lock(mu_);
  Entry& e = held_entry_locked(lease);
  if (requeue && e.msg.attempt < options_.max_attempts) {
    append(json{{"op", "requeue"}, {"id", e.msg.message_id}}.dump());
    e.state = State::kAvailable;
    e.lease.reset();
    ++e.msg.attempt;
    return;
  }
  append(json{{"op", "dead"}, {"id", e.msg.message_id}}.dump());
  e.state = State::kDead;
  e.lease.reset();
  routes_[e.msg.routing_key].erase(e.order);
}

std::size_t Broker::depth(const RoutingKey& key) const {
  std::lock_guard lock(mu_);
  auto it = routes_.find(key);
  return it == routes_.end() ? 0 : it->second.size();
}

std::vector<QueueMessage> Broker::dead_letters(const std::string& challenge_id) const {
  std::lock_guard lock(mu_);
  std::vector<QueueMessage> out;
  for (const auto& [id, e] : entries_) {
    if (e.state == State::kDead && e.msg.routing_key.challenge_id == challenge_id) {
      out.push_back(e.msg);
    }
  }
  return out;
}

BrokerStats Broker::stats() const {
  std::lock_guard lock(mu_);
  BrokerStats s;
  for (const auto& [id, e] : entries_) {
    switch (e.state) {
      case State::kAvailable:
        ++s.available;
        break;
      case State::kLeased:
        ++s.leased;
        break;
      case State::kAcked:
        ++s.acked;
        break;
      case State::kDead:
        ++s.dead;
        break;
    }
  }
  return s;
}

bool Broker::acked(const std::string& message_id) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(message_id);
  return it != entries_.end() && it->second.state == State::kAcked;
}

}  // namespace gauntlet
