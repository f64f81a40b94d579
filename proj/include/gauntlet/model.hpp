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

// Challenge domain model. A challenge is described by the `challenge.json`
// manifest at the root of its competition bundle; blob references in the
// model are paths of members inside that bundle.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gauntlet/clock.hpp"

namespace gauntlet {

// Path of a member inside the challenge bundle ("annotations/test.json").
using BlobRef = std::string;

inline constexpr int kManifestSchemaVersion = 1;

struct Phase {
  std::string id;
  std::string name;
  std::string codename;
  Timestamp start{};
  std::optional<Timestamp> end;  // open-ended when absent
  std::int64_t submission_limit_per_day = 0;

  bool open_at(Timestamp t) const { return t >= start && (!end || t <= *end); }
};

// Hidden environment an agent submission is evaluated in.
struct EnvironmentSpec {
  std::string env_id;
  BlobRef assets_ref;   // directory prefix inside the bundle
  BlobRef entrypoint;   // organizer-supplied environment program
  std::vector<std::string> episodes;
  std::int64_t max_steps_per_episode = 0;
  std::vector<std::string> action_vocabulary;
};

struct DatasetSplit {
  std::string id;
  std::string name;
  std::string codename;
  std::optional<BlobRef> annotation_ref;
  std::int64_t item_count = 0;
  std::optional<EnvironmentSpec> environment;
};

enum class Visibility { kPublic, kHostOnly, kOwnerOnly };

struct PhaseSplit {
  std::string phase_id;
  std::string split_id;
  Visibility leaderboard_visibility = Visibility::kPublic;
  std::vector<std::string> leaderboard_schema;
};

enum class EvaluatorKind { kPredictions, kAgent, kHitl };

struct EvaluatorSpec {
  EvaluatorKind kind = EvaluatorKind::kPredictions;
  BlobRef entrypoint;
  std::vector<BlobRef> warmup_assets;
  bool chunkable = false;
  // Resource ceilings per evaluator invocation.
  std::int64_t cpu_seconds = 600;
  std::int64_t memory_bytes = 4LL << 30;
  std::int64_t wall_seconds = 1200;
};

struct RatingScale {
  int min = 1;
  int max = 5;
};

struct HitlConfig {
  std::string instructions_html;
  std::vector<std::string> rating_axes;
  std::int64_t rounds_required = 0;
  std::set<std::string> whitelist;
  std::set<std::string> blocklist;
  std::optional<BlobRef> qualification_test_ref;
  RatingScale scale;
  std::int64_t sessions_per_submission = 1;
  std::int64_t ttl_seconds = 1800;
};

struct MetricDirection {
  bool higher_is_better = true;
};

struct ChallengeConfig {
  std::string id;
  std::string title;
  std::string description_html;
  std::vector<Phase> phases;
  std::vector<DatasetSplit> splits;
  std::vector<PhaseSplit> phase_splits;
  EvaluatorSpec evaluator;
  std::string default_metric;
  std::map<std::string, MetricDirection> metrics;
  bool remote_evaluation = false;
  std::optional<HitlConfig> hitl;

  const Phase* find_phase_by_codename(const std::string& codename) const;
  const Phase* find_phase(const std::string& id) const;
  const DatasetSplit* find_split(const std::string& id) const;
  const DatasetSplit* find_split_by_codename(const std::string& codename) const;
  // Phase-splits attached to a phase, in manifest order.
  std::vector<const PhaseSplit*> splits_of_phase(const std::string& phase_id) const;
  bool higher_is_better(const std::string& metric) const;
};

std::string_view to_string(Visibility v);
std::optional<Visibility> parse_visibility(std::string_view s);
std::string_view to_string(EvaluatorKind k);
std::optional<EvaluatorKind> parse_evaluator_kind(std::string_view s);

}  // namespace gauntlet
