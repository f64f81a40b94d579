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

#include "gauntlet/sandbox.hpp"

#include <signal.h>

#include <gtest/gtest.h>

#include "gauntlet/error.hpp"
#include "support.hpp"

namespace gauntlet {
namespace {

using namespace std::chrono_literals;

SandboxPolicy isolated() {
  SandboxPolicy p;
  p.isolation = Isolation::kRequired;
  return p;
}

#define REQUIRE_ISOLATION() \
  if (!isolation_supported()) GTEST_SKIP() << "namespaces unavailable on this host"

TEST(SandboxTest, LineProtocol) {
  SandboxPolicy p;
  p.isolation = Isolation::kNone;
  auto proc = Process::spawn({"/bin/cat"}, p);
  ASSERT_TRUE(proc.write("hello\n", 1s));
  std::string line;
  EXPECT_EQ(proc.read_line(line, 2s, 1024), Process::ReadStatus::kLine);
  EXPECT_EQ(line, "hello");
  proc.close_stdin();
  EXPECT_EQ(proc.read_line(line, 2s, 1024), Process::ReadStatus::kEof);
}

TEST(SandboxTest, ReadTimeoutAndTooLong) {
  SandboxPolicy p;
  p.isolation = Isolation::kNone;
  auto proc = Process::spawn({"/bin/cat"}, p);
  std::string line;
  EXPECT_EQ(proc.read_line(line, 100ms, 1024), Process::ReadStatus::kTimeout);
  ASSERT_TRUE(proc.write(std::string(5000, 'x') + "\n", 1s));
  EXPECT_EQ(proc.read_line(line, 2s, 1024), Process::ReadStatus::kTooLong);
  proc.kill();
  EXPECT_FALSE(proc.running());
}

TEST(SandboxTest, WallTimeoutKills) {
  SandboxPolicy p;
  p.isolation = Isolation::kNone;
  auto proc = Process::spawn({"/bin/sleep", "30"}, p);
  auto done = proc.wait(200ms, 1024, 1024);
  EXPECT_TRUE(done.timed_out);
  EXPECT_NE(done.term_signal, 0);
}

TEST(SandboxTest, StopTokenCancels) {
  SandboxPolicy p;
  p.isolation = Isolation::kNone;
  auto proc = Process::spawn({"/bin/sleep", "30"}, p);
  std::stop_source src;
  std::thread t([&] {
    std::this_thread::sleep_for(100ms);
    src.request_stop();
  });
  auto done = proc.wait(10s, 1024, 1024, src.get_token());
  t.join();
  EXPECT_TRUE(done.cancelled);
}

TEST(SandboxTest, OutputCap) {
  SandboxPolicy p;
  p.isolation = Isolation::kNone;
  auto proc = Process::spawn({"/bin/sh", "-c", "head -c 100000 /dev/zero"}, p);
  auto done = proc.wait(5s, 1000, 1024);
  EXPECT_TRUE(done.output_truncated);
  EXPECT_LE(done.out.size(), 1000u);
}

TEST(SandboxTest, HostFilesystemIsAbsent) {
  REQUIRE_ISOLATION();
  testing::TempDir secret_dir;
  testing::write_file(secret_dir / "secret.txt", "top secret", 0644);
  auto proc = Process::spawn({"/bin/sh", "-c", "cat " + (secret_dir / "secret.txt").string()},
                             isolated());
  EXPECT_TRUE(proc.isolated());
  auto done = proc.wait(5s, 4096, 4096);
  EXPECT_NE(done.exit_code, 0);
  EXPECT_EQ(done.out.find("top secret"), std::string::npos);
}

TEST(SandboxTest, ReadOnlyMount) {
  REQUIRE_ISOLATION();
  testing::TempDir dir;
  testing::write_file(dir / "data.txt", "visible", 0644);
  SandboxPolicy p = isolated();
  p.mounts.push_back({dir.path(), "/data", false});
  auto proc = Process::spawn(
      {"/bin/sh", "-c", "cat /data/data.txt; echo x > /data/new.txt && echo wrote"}, p);
  auto done = proc.wait(5s, 4096, 4096);
  EXPECT_NE(done.out.find("visible"), std::string::npos);
  EXPECT_EQ(done.out.find("wrote"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir / "new.txt"));
}

TEST(SandboxTest, NoNetwork) {
  REQUIRE_ISOLATION();
  auto proc = Process::spawn({"/bin/sh", "-c", "cat /proc/net/dev | wc -l"}, isolated());
  auto done = proc.wait(5s, 4096, 4096);
  // header lines plus loopback only
  EXPECT_EQ(done.out, "3\n");
}

TEST(SandboxTest, ProcessLimit) {
  REQUIRE_ISOLATION();
  SandboxPolicy p = isolated();
  p.limits.max_processes = 8;
  const auto dir = testing::fixture_binary().parent_path();
  p.mounts.push_back({dir, {}, false});
  auto proc = Process::spawn({testing::fixture_binary().string(), "probe-fork"}, p);
  ASSERT_TRUE(proc.write("{}\n", 1s));
  std::string line;
  ASSERT_EQ(proc.read_line(line, 10s, 4096), Process::ReadStatus::kLine);
  const auto reply = nlohmann::json::parse(line);
  EXPECT_LT(reply["answer"].get<int>(), 8);
  proc.kill();
}

TEST(SandboxTest, RequiredIsolationFailsLoudlyWhenUnsupported) {
  if (isolation_supported()) GTEST_SKIP() << "host supports namespaces";
  EXPECT_THROW(Process::spawn({"/bin/true"}, isolated()), Error);
}

}  // namespace
}  // namespace gauntlet
