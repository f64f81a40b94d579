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

#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>

#include "gauntlet/error.hpp"
#include "support.hpp"

namespace gauntlet {
namespace {

QueueMessage msg(const std::string& id, const std::string& challenge, bool remote = false) {
  return {id, routing_key_for(challenge, remote), "sub-" + id, {}, 1};
}

class QueueTest : public ::testing::Test {
 protected:
  ManualClock clock;
  Broker broker{clock};
  const RoutingKey c1 = routing_key_for("c1", false);
  const RoutingKey c2 = routing_key_for("c2", false);

  void SetUp() override {
    broker.declare_route(c1);
    broker.declare_route(c2);
  }
};

TEST_F(QueueTest, PublishIsVisibleOnlyToOwnQueue) {
  broker.publish(msg("m1", "c1"));
  EXPECT_FALSE(broker.lease(c2, "w2").has_value());
  auto d = broker.lease(c1, "w1");
  ASSERT_TRUE(d);
  EXPECT_EQ(d->message.message_id, "m1");
}

TEST_F(QueueTest, PublishIsIdempotent) {
  broker.publish(msg("m1", "c1"));
  broker.publish(msg("m1", "c1"));
  EXPECT_EQ(broker.depth(c1), 1u);
}

TEST_F(QueueTest, UnknownRoute) {
  try {
    broker.publish(msg("m1", "nope"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownRoute);
  }
}

TEST(QueuePartitionTest, HundredMessagesTenChallenges) {
  ManualClock clock;
  Broker broker(clock);
  std::map<std::string, int> expected;
  std::mt19937 rng(11);
  std::vector<QueueMessage> all;
  for (int c = 0; c < 10; ++c) {
    broker.declare_route(routing_key_for("c" + std::to_string(c), false));
    for (int i = 0; i < 10; ++i) all.push_back(msg("m" + std::to_string(c) + "-" + std::to_string(i), "c" + std::to_string(c)));
  }
  std::shuffle(all.begin(), all.end(), rng);
  for (const auto& m : all) {
    broker.publish(m);
    ++expected[m.routing_key.challenge_id];
  }
  for (const auto& [challenge, count] : expected) {
    const auto key = routing_key_for(challenge, false);
    EXPECT_EQ(broker.depth(key), static_cast<std::size_t>(count));
    int got = 0;
    while (auto d = broker.lease(key, "w")) {
      EXPECT_EQ(d->message.routing_key, key);
      broker.ack(d->lease);
      ++got;
    }
    EXPECT_EQ(got, count);
  }
}

TEST_F(QueueTest, EmptyLease) { EXPECT_FALSE(broker.lease(c1, "w").has_value()); }

TEST_F(QueueTest, ConcurrentLeaseOfOneMessage) {
  broker.publish(msg("m1", "c1"));
  std::atomic<int> receipts{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      if (broker.lease(c1, "w" + std::to_string(i))) ++receipts;
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(receipts.load(), 1);
}

TEST_F(QueueTest, VisibilityExpiryRedelivers) {
  broker.publish(msg("m1", "c1"));
  auto first = broker.lease(c1, "w1", std::chrono::seconds(30));
  ASSERT_TRUE(first);
  EXPECT_FALSE(broker.lease(c1, "w2", std::chrono::seconds(30)));
  clock.advance(std::chrono::seconds(31));
  auto second = broker.lease(c1, "w2", std::chrono::seconds(30));
  ASSERT_TRUE(second);
  EXPECT_EQ(second->message.message_id, "m1");
  EXPECT_EQ(second->message.attempt, 2);
}

TEST_F(QueueTest, AckedNeverRedelivered) {
  broker.publish(msg("m1", "c1"));
  auto d = broker.lease(c1, "w1", std::chrono::seconds(30));
  broker.ack(d->lease);
  clock.advance(std::chrono::hours(1));
  EXPECT_FALSE(broker.lease(c1, "w1"));
  EXPECT_TRUE(broker.acked("m1"));
}

TEST_F(QueueTest, NackRequeueBumpsAttempt) {
  broker.publish(msg("m1", "c1"));
  auto d = broker.lease(c1, "w1");
  broker.nack(d->lease, true);
  auto again = broker.lease(c1, "w1");
  ASSERT_TRUE(again);
  EXPECT_EQ(again->message.attempt, 2);
}

TEST_F(QueueTest, AckOnExpiredLease) {
  broker.publish(msg("m1", "c1"));
  auto d = broker.lease(c1, "w1", std::chrono::seconds(10));
  clock.advance(std::chrono::seconds(11));
  try {
    broker.ack(d->lease);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLeaseExpired);
  }
  EXPECT_TRUE(broker.lease(c1, "w2").has_value());
}

TEST_F(QueueTest, StaleLeaseIsNotHeld) {
  broker.publish(msg("m1", "c1"));
  auto first = broker.lease(c1, "w1", std::chrono::seconds(10));
  clock.advance(std::chrono::seconds(11));
  auto second = broker.lease(c1, "w2", std::chrono::seconds(10));
  ASSERT_TRUE(second);
  EXPECT_THROW(broker.ack(first->lease), Error);
  broker.ack(second->lease);
}

TEST_F(QueueTest, DeadLetterAfterMaxAttempts) {
  broker.publish(msg("m1", "c1"));
  for (int i = 0; i < broker.options().max_attempts; ++i) {
    auto d = broker.lease(c1, "w");
    ASSERT_TRUE(d) << i;
    broker.nack(d->lease, true);
  }
  EXPECT_FALSE(broker.lease(c1, "w"));
  const auto dead = broker.dead_letters("c1");
  ASSERT_EQ(dead.size(), 1u);
  EXPECT_EQ(dead[0].message_id, "m1");
}

TEST(QueueLogTest, ReplayRestoresPendingWork) {
  testing::TempDir dir;
  ManualClock clock;
  BrokerOptions opts;
  opts.log_path = dir / "broker.log";
  const auto key = routing_key_for("c1", false);
  {
    Broker broker(clock, opts);
    broker.declare_route(key);
    broker.publish(msg("m1", "c1"));
    broker.publish(msg("m2", "c1"));
    auto d = broker.lease(key, "w");
    broker.ack(d->lease);
  }
  Broker again(clock, opts);
  EXPECT_TRUE(again.has_route(key));
  EXPECT_EQ(again.depth(key), 1u);
  auto d = again.lease(key, "w");
  ASSERT_TRUE(d);
  EXPECT_EQ(d->message.message_id, "m2");
}

TEST(QueueRoutingTest, KeysAreDistinctPerChallengeAndPool) {
  EXPECT_EQ(routing_key_for("c1", false).str(), "c1/local");
  EXPECT_EQ(routing_key_for("c1", true).str(), "c1/remote");
  EXPECT_EQ(RoutingKey::parse("c1/remote"), routing_key_for("c1", true));
}

}  // namespace
}  // namespace gauntlet
