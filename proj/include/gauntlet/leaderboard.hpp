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

// Ranked leaderboards, one per (challenge, phase, split).
//
// Every recorded result is kept (the host's raw history); the ranked board
// holds each team's best result by the challenge's default metric. What a
// viewer may read depends on the phase-split's visibility:
//
//   public      everyone sees the whole board
//   host_only   only the host sees it; everyone else gets an empty board
//   owner_only  the host sees everything, a participant sees their own entry

#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "gauntlet/clock.hpp"
#include "gauntlet/model.hpp"

namespace gauntlet {

struct LeaderboardEntry {
  std::string challenge_id;
  std::string phase_codename;
  std::string split_codename;
  std::string team_id;
  std::string submission_id;
  std::map<std::string, double> metrics;
  Timestamp recorded_at{};

  friend bool operator==(const LeaderboardEntry&, const LeaderboardEntry&) = default;
};

nlohmann::json to_json(const LeaderboardEntry& e);

enum class ViewerRole { kPublic, kParticipant, kHost };

struct Viewer {
  ViewerRole role = ViewerRole::kPublic;
  std::string team_id;  // participants only
};

// The submission a result belongs to, as known to the submission store.
struct ResultOrigin {
  std::string challenge_id;
  std::string submission_id;
  std::string team_id;
  std::string phase_codename;
};

struct RankedEntry {
  std::int64_t rank = 0;
  LeaderboardEntry entry;
};

class Leaderboard {
 public:
  explicit Leaderboard(const Clock& clock) : clock_(clock) {}

  void register_challenge(const ChallengeConfig& config);
  bool has_challenge(const std::string& challenge_id) const;

  // Idempotent on (submission_id, split_codename): a repeat returns the
  // first record and changes nothing. Throws Error{kNotFound} for an unknown
  // phase-split, Error{kSchemaMismatch} when a schema metric is missing.
  LeaderboardEntry record_result(const ResultOrigin& origin, const std::string& split_codename,
                                 const std::map<std::string, double>& metrics);

  // Best-per-team board in rank order, filtered for the viewer.
  // Throws Error{kNotFound} for an unknown phase-split.
  std::vector<RankedEntry> rank(const std::string& challenge_id, const std::string& phase_codename,
                                const std::string& split_codename, const Viewer& viewer) const;

  // Every result recorded for the phase-split, in recording order.
  std::vector<LeaderboardEntry> history(const std::string& challenge_id,
                                        const std::string& phase_codename,
                                        const std::string& split_codename) const;

  std::optional<LeaderboardEntry> result(const std::string& submission_id,
                                         const std::string& split_codename) const;
  std::size_t result_count(const std::string& submission_id) const;

  // Whether the viewer may read results of this phase-split at all, and
  // then only their own (owner_only participants).
  bool can_view(const std::string& challenge_id, const std::string& phase_codename,
                const std::string& split_codename, const Viewer& viewer) const;
  Visibility visibility(const std::string& challenge_id, const std::string& phase_codename,
                        const std::string& split_codename) const;

 private:
  struct Board {
    Visibility visibility = Visibility::kPublic;
    std::vector<std::string> schema;
    std::string default_metric;
    bool higher_is_better = true;
    std::vector<LeaderboardEntry> raw;
    std::map<std::string, LeaderboardEntry> best;  // team -> entry
  };
  using BoardKey = std::tuple<std::string, std::string, std::string>;

  const Board& board_locked(const std::string& c, const std::string& p,
                            const std::string& s) const;
  static bool visible_locked(const Board& b, const LeaderboardEntry& e, const Viewer& v);

  const Clock& clock_;
  mutable std::mutex mu_;
  std::map<BoardKey, Board> boards_;
  std::map<std::pair<std::string, std::string>, LeaderboardEntry> by_submission_;
};

}  // namespace gauntlet
