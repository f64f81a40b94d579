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

// Shared helpers for tests: scratch directories, challenge bundles and
// agent archives built around the gauntlet_fixture binary.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gauntlet/bundle.hpp"
#include "gauntlet/clock.hpp"
#include "gauntlet/model.hpp"
#include "gauntlet/zip.hpp"

namespace gauntlet::testing {

std::filesystem::path fixture_binary();

class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "gauntlet-test-");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& p, const std::string& data, unsigned mode = 0644);
std::string read_file(const std::filesystem::path& p);

// `<dir>/gauntlet_fixture` plus `<dir>/run.sh` that execs it with `role`.
std::map<std::string, zip::Member> fixture_members(const std::string& dir, const std::string& role);

// Writes fixture_members(...) under `dir`; returns the run.sh path.
std::filesystem::path install_fixture(const std::filesystem::path& dir, const std::string& role);

struct SplitDef {
  std::string codename;
  std::int64_t item_count = 10;
  Visibility visibility = Visibility::kPublic;
};

struct ChallengeDef {
  std::string id = "demo";
  std::vector<std::string> phases = {"dev"};
  std::vector<SplitDef> splits = {{"test", 10}};
  std::string evaluator_role = "accuracy";
  bool chunkable = true;
  bool remote = false;
  std::int64_t submission_limit_per_day = 0;
  Timestamp phase_start{};
  std::optional<Timestamp> phase_end;
  std::vector<std::string> schema = {"accuracy", "error_rate"};
};

// One phase-split per (phase, split) pair. Phase ids are "p-<codename>",
// split ids "s-<codename>", annotations "annotations/<split>.json".
ChallengeConfig make_config(const ChallengeDef& def);

// A predictions challenge bundle. `labels` maps split codename to its
// ground-truth labels; remote challenges carry neither annotations nor an
// evaluator.
std::string make_bundle(const ChallengeDef& def,
                        const std::map<std::string, std::vector<int>>& labels);
std::string make_bundle(const ChallengeConfig& config,
                        std::map<std::string, zip::Member> members);

// Deterministic pseudo-random labels in [0, classes).
std::vector<int> random_labels(std::size_t n, std::uint64_t seed, int classes = 4);
// A predictions file: split codename -> labels.
std::string predictions(const std::map<std::string, std::vector<int>>& by_split);

struct AgentDef {
  std::string role = "scripted-agent";
  std::vector<std::string> role_args;  // relative to /agent
  std::map<std::string, std::string> files;
  std::optional<std::pair<std::string, std::string>> snapshot;  // member, content
};

// agent.json + run.sh + gauntlet_fixture (+ files, + snapshot).
std::string make_agent_archive(const AgentDef& def);

struct GridEpisode {
  std::string id;
  int sx = 0, sy = 0, heading = 0, gx = 0, gy = 0;
  std::string question = "what colour is the car?";
  std::string answer = "red";
  std::string secret = "env-secret";
};

// An agent challenge over a grid world with the given episodes and a
// success-rate evaluator.
std::string make_agent_bundle(const std::string& id, const std::vector<GridEpisode>& episodes,
                              std::int64_t max_steps = 20);

// A HITL challenge. The agent is the submission; no evaluator program.
std::string make_hitl_bundle(const std::string& id, std::int64_t rounds,
                             std::vector<std::string> axes, std::int64_t sessions = 1,
                             std::int64_t ttl_seconds = 1800);

}  // namespace gauntlet::testing
