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

#include "gauntlet/leaderboard.hpp"

#include <algorithm>

#include "gauntlet/error.hpp"

namespace gauntlet {

nlohmann::json to_json(const LeaderboardEntry& e) {
  return {{"challenge_id", e.challenge_id},     {"phase", e.phase_codename},
          {"split", e.split_codename},          {"team", e.team_id},
          {"submission_id", e.submission_id},   {"metrics", e.metrics},
          {"recorded_at", format_timestamp(e.recorded_at)}};
}

void Leaderboard::register_challenge(const ChallengeConfig& config) {
  std::lock_guard lock(mu_);
  for (const auto& ps : config.phase_splits) {
    const Phase* phase = config.find_phase(ps.phase_id);
    const DatasetSplit* split = config.find_split(ps.split_id);
    if (!phase || !split) continue;
    Board& b = boards_[{config.id, phase->codename, split->codename}];
    b.visibility = ps.leaderboard_visibility;
    b.schema = ps.leaderboard_schema;
    b.default_metric = config.default_metric;
    b.higher_is_better = config.higher_is_better(config.default_metric);
  }
}

bool Leaderboard::has_challenge(const std::string& challenge_id) const {
  std::lock_guard lock(mu_);
  auto it = boards_.lower_bound({challenge_id, "", ""});
  return it != boards_.end() && std::get<0>(it->first) == challenge_id;
}

const Leaderboard::Board& Leaderboard::board_locked(const std::string& c, const std::string& p,
                                                    const std::string& s) const {
  auto it = boards_.find({c, p, s});
  if (it == boards_.end()) {
    throw Error(ErrorCode::kNotFound, "no leaderboard for phase '" + p + "' split '" + s + "'");
  }
  return it->second;
}

LeaderboardEntry Leaderboard::record_result(const ResultOrigin& origin,
                                            const std::string& split_codename,
                                            const std::map<std::string, double>& metrics) {
  std::lock_guard lock(mu_);
  if (auto it = by_submission_.find({origin.submission_id, split_codename});
      it != by_submission_.end()) {
    return it->second;
  }
  Board& b = const_cast<Board&>(
      board_locked(origin.challenge_id, origin.phase_codename, split_codename));
  for (const auto& m : b.schema) {
    if (!metrics.contains(m)) {
      throw Error(ErrorCode::kSchemaMismatch,
                  "result for split '" + split_codename + "' is missing metric '" + m + "'",
                  {{"metric", m}, {"split", split_codename}});
    }
  }
  LeaderboardEntry e{origin.challenge_id, origin.phase_codename, split_codename, origin.team_id,
                     origin.submission_id, metrics, clock_.now()};
  b.raw.push_back(e);
  by_submission_.emplace(std::make_pair(origin.submission_id, split_codename), e);

  auto [it, inserted] = b.best.try_emplace(origin.team_id, e);
  if (!inserted) {
    const double current = it->second.metrics.at(b.default_metric);
    const double candidate = e.metrics.at(b.default_metric);
    const bool better = b.higher_is_better ? candidate > current : candidate < current;
    if (better) it->second = e;
  }
  return e;
}

bool Leaderboard::visible_locked(const Board& b, const LeaderboardEntry& e, const Viewer& v) {
  if (v.role == ViewerRole::kHost) return true;
  switch (b.visibility) {
    case Visibility::kPublic:
      return true;
    case Visibility::kHostOnly:
      return false;
    case Visibility::kOwnerOnly:
      return v.role == ViewerRole::kParticipant && !v.team_id.empty() && e.team_id == v.team_id;
  }
  return false;
}

std::vector<RankedEntry> Leaderboard::rank(const std::string& challenge_id,
                                           const std::string& phase_codename,
                                           const std::string& split_codename,
                                           const Viewer& viewer) const {
  std::lock_guard lock(mu_);
  const Board& b = board_locked(challenge_id, phase_codename, split_codename);
  std::vector<const LeaderboardEntry*> order;
  for (const auto& [team, e] : b.best) order.push_back(&e);
  std::sort(order.begin(), order.end(), [&b](const LeaderboardEntry* x, const LeaderboardEntry* y) {
    const double vx = x->metrics.at(b.default_metric);
    const double vy = y->metrics.at(b.default_metric);
    if (vx != vy) return b.higher_is_better ? vx > vy : vx < vy;
    if (x->recorded_at != y->recorded_at) return x->recorded_at < y->recorded_at;
    return x->team_id < y->team_id;
  });
  std::vector<RankedEntry> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (visible_locked(b, *order[i], viewer)) {
      out.push_back({static_cast<std::int64_t>(i + 1), *order[i]});
    }
  }
  return out;
}

std::vector<LeaderboardEntry> Leaderboard::history(const std::string& challenge_id,
                                                   const std::string& phase_codename,
                                                   const std::string& split_codename) const {
  std::lock_guard lock(mu_);
  return board_locked(challenge_id, phase_codename, split_codename).raw;
}

std::optional<LeaderboardEntry> Leaderboard::result(const std::string& submission_id,
                                                    const std::string& split_codename) const {
  std::lock_guard lock(mu_);
  auto it = by_submission_.find({submission_id, split_codename});
  if (it == by_submission_.end()) return std::nullopt;
  return it->second;
}

std::size_t Leaderboard::result_count(const std::string& submission_id) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (auto it = by_submission_.lower_bound({submission_id, ""});
       it != by_submission_.end() && it->first.first == submission_id; ++it) {
    ++n;
  }
  return n;
}

bool Leaderboard::can_view(const std::string& challenge_id, const std::string& phase_codename,
                           const std::string& split_codename, const Viewer& viewer) const {
  std::lock_guard lock(mu_);
  const Board& b = board_locked(challenge_id, phase_codename, split_codename);
  if (viewer.role == ViewerRole::kHost || b.visibility == Visibility::kPublic) return true;
  return b.visibility == Visibility::kOwnerOnly && viewer.role == ViewerRole::kParticipant;
}

Visibility Leaderboard::visibility(const std::string& challenge_id,
                                   const std::string& phase_codename,
                                   const std::string& split_codename) const {
  std::lock_guard lock(mu_);
  return board_locked(challenge_id, phase_codename, split_codename).visibility;
}

}  // namespace gauntlet
