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

#include "gauntlet/platform.hpp"

#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <random>

#include "gauntlet/assets.hpp"
#include "gauntlet/error.hpp"

namespace gauntlet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kStatusNames[] = {"Submitted", "Queued",  "Running",
                                             "Finished",  "Failed",  "Cancelled"};

std::string padded(const char* prefix, std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06llu", prefix, static_cast<unsigned long long>(n));
  return buf;
}

json history_json(const std::vector<StatusChange>& h) {
  json a = json::array();
  for (const auto& c : h) {
    a.push_back({{"status", to_string(c.status)}, {"at", format_timestamp(c.at)}});
  }
  return a;
}

}  // namespace

std::string_view to_string(SubmissionStatus s) { return kStatusNames[static_cast<int>(s)]; }

std::optional<SubmissionStatus> parse_submission_status(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kStatusNames); ++i) {
    if (kStatusNames[i] == s) return static_cast<SubmissionStatus>(i);
  }
  return std::nullopt;
}

std::string_view to_string(SubmissionKind k) {
  return k == SubmissionKind::kAgent ? "agent" : "predictions";
}

std::optional<SubmissionKind> parse_submission_kind(std::string_view s) {
  if (s == "predictions") return SubmissionKind::kPredictions;
  if (s == "agent") return SubmissionKind::kAgent;
  return std::nullopt;
}

bool is_terminal(SubmissionStatus s) {
  return s == SubmissionStatus::kFinished || s == SubmissionStatus::kFailed ||
         s == SubmissionStatus::kCancelled;
}

bool legal_transition(SubmissionStatus from, SubmissionStatus to) {
  using S = SubmissionStatus;
  switch (from) {
    case S::kSubmitted: return to == S::kQueued;
    case S::kQueued: return to == S::kRunning || to == S::kCancelled;
    case S::kRunning: return to == S::kFinished || to == S::kFailed || to == S::kCancelled;
    default: return false;
  }
}

Platform::Platform(const Clock& clock, PlatformOptions options)
    : clock_(clock), options_(std::move(options)) {
  if (options_.data_dir.empty()) throw Error(ErrorCode::kBadRequest, "data_dir is required");
  fs::create_directories(options_.data_dir);
  if (options_.broker.log_path.empty()) options_.broker.log_path = options_.data_dir / "broker.log";
  if (options_.worker.work_root.empty()) options_.worker.work_root = options_.data_dir / "work";
  blobs_ = std::make_unique<BlobStore>(options_.data_dir / "blobs");
  broker_ = std::make_unique<Broker>(clock_, options_.broker);
  leaderboard_ = std::make_unique<Leaderboard>(clock_);
  hitl_ = std::make_unique<HitlBroker>(
      clock_, *blobs_, *this,
      HitlOptions{options_.data_dir / "hitl", options_.data_dir / "hitl-agents",
                  options_.hitl_agent});
  hitl_->recover();
  admin_token_ = options_.admin_token.empty() ? new_token() : options_.admin_token;
  tokens_[admin_token_] = {PrincipalKind::kAdmin, "admin", ""};

  if (options_.hitl_sweep_interval.count() > 0) {
    sweeper_ = std::jthread([this](std::stop_token stop) {
      std::mutex m;
      std::condition_variable_any cv;
      while (!stop.stop_requested()) {
        std::unique_lock lock(m);
        if (cv.wait_for(lock, stop, options_.hitl_sweep_interval, [] { return false; })) break;
        lock.unlock();
        try {
          hitl_->sweep();
        } catch (const std::exception&) {
        }
      }
    });
  }
}

Platform::~Platform() {
  stop_workers();
  if (sweeper_.joinable()) {
    sweeper_.request_stop();
    sweeper_.join();
  }
}

void Platform::stop_workers() {
  std::lock_guard lock(workers_mu_);
  for (auto& w : workers_) w.thread.request_stop();
  for (auto& w : workers_) {
    if (w.thread.joinable()) w.thread.join();
  }
  workers_.clear();
}

std::string Platform::new_token() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

std::pair<Team, std::string> Platform::create_team(const std::string& name,
                                                   std::vector<std::string> members) {
  if (name.empty()) throw Error(ErrorCode::kBadRequest, "team name is required");
  std::lock_guard lock(mu_);
  Team t{padded("team-", ++next_id_), name, std::move(members)};
  std::string token = new_token();
  tokens_[token] = {PrincipalKind::kTeam, t.id, ""};
  teams_[t.id] = t;
  return {t, token};
}

std::string Platform::create_evaluator(const Principal& admin, const EvaluatorProfile& profile) {
  if (admin.kind != PrincipalKind::kAdmin) throw Error(ErrorCode::kUnauthorized, "admin only");
  if (profile.evaluator_id.empty()) throw Error(ErrorCode::kBadRequest, "evaluator_id is required");
  hitl_->register_evaluator(profile);
  std::lock_guard lock(mu_);
  std::string token = new_token();
  tokens_[token] = {PrincipalKind::kEvaluator, profile.evaluator_id, ""};
  return token;
}

std::string Platform::create_worker_token(const Principal& admin, const std::string& worker_id) {
  if (admin.kind != PrincipalKind::kAdmin) throw Error(ErrorCode::kUnauthorized, "admin only");
  std::lock_guard lock(mu_);
  std::string token = new_token();
  tokens_[token] = {PrincipalKind::kWorker, worker_id, ""};
  return token;
}

Principal Platform::authenticate(const std::string& token) const {
  std::lock_guard lock(mu_);
  auto it = tokens_.find(token);
  if (token.empty() || it == tokens_.end()) {
    throw Error(ErrorCode::kUnauthorized, "missing or unknown token");
  }
  return it->second;
}

bool Platform::is_host(const Principal& p, const std::string& challenge_id) const {
  if (p.kind != PrincipalKind::kTeam) return false;
  std::lock_guard lock(mu_);
  auto it = challenges_.find(challenge_id);
  return it != challenges_.end() && it->second.host_team == p.id;
}

const Platform::ChallengeRecord& Platform::challenge_locked(const std::string& id) const {
  auto it = challenges_.find(id);
  if (it == challenges_.end()) throw Error(ErrorCode::kNotFound, "no challenge '" + id + "'");
  return it->second;
}

ChallengeConfig Platform::create_challenge(std::string_view bundle_bytes, const Principal& host) {
  if (host.kind != PrincipalKind::kTeam) {
    throw Error(ErrorCode::kUnauthorized, "challenges are created by a host team");
  }
  Bundle bundle;
  try {
    bundle = parse_bundle(bundle_bytes);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSchemaError) throw;
    throw Error(ErrorCode::kValidationFailed, e.what(), e.details());
  }
  const ChallengeConfig& config = bundle.config;
  {
    std::lock_guard lock(mu_);
    if (challenges_.contains(config.id)) {
      throw Error(ErrorCode::kValidationFailed, "challenge '" + config.id + "' already exists",
                  {{"violations", json::array({{{"path", "id"}, {"message", "already exists"}}})}});
    }
    // reserve the id while assets are written
    challenges_[config.id] = {config, host.id};
  }
  try {
    publish_challenge_assets(bundle, *blobs_);
  } catch (...) {
    std::lock_guard lock(mu_);
    challenges_.erase(config.id);
    for (const auto& b : blobs_->list(challenge_prefix(config.id))) blobs_->remove(b.key);
    throw;
  }
  leaderboard_->register_challenge(config);
  broker_->declare_route(routing_key_for(config.id, config.remote_evaluation));
  if (!config.remote_evaluation && options_.start_local_workers) start_local_workers(config);
  return config;
}

void Platform::start_local_workers(const ChallengeConfig& config) {
  std::lock_guard lock(workers_mu_);
  for (std::int64_t i = 0; i < options_.workers_per_challenge; ++i) {
    WorkerOptions o = options_.worker;
    o.worker_id = "local-" + config.id + "-" + std::to_string(i);
    LocalWorker lw;
    lw.worker = std::make_unique<Worker>(config, *blobs_, *broker_, *this, o);
    Worker* w = lw.worker.get();
    lw.thread = std::jthread([w](std::stop_token stop) { w->run_loop(stop); });
    workers_.push_back(std::move(lw));
  }
}

ChallengeConfig Platform::challenge(const std::string& id) const {
  std::lock_guard lock(mu_);
  return challenge_locked(id).config;
}

std::vector<std::string> Platform::challenge_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, c] : challenges_) ids.push_back(id);
  return ids;
}

json Platform::challenge_view(const std::string& id, const std::optional<Principal>& viewer) const {
  std::lock_guard lock(mu_);
  const auto& rec = challenge_locked(id);
  const auto& c = rec.config;
  json phases = json::array();
  for (const auto& p : c.phases) {
    phases.push_back({{"codename", p.codename},
                      {"name", p.name},
                      {"start", format_timestamp(p.start)},
                      {"end", p.end ? json(format_timestamp(*p.end)) : json()},
                      {"submission_limit_per_day", p.submission_limit_per_day}});
  }
  json splits = json::array();
  for (const auto& s : c.splits) {
    splits.push_back({{"codename", s.codename}, {"name", s.name}, {"item_count", s.item_count}});
  }
  json boards = json::array();
  for (const auto& ps : c.phase_splits) {
    boards.push_back({{"phase", c.find_phase(ps.phase_id)->codename},
                      {"split", c.find_split(ps.split_id)->codename},
                      {"visibility", to_string(ps.leaderboard_visibility)},
                      {"schema", ps.leaderboard_schema}});
  }
  json view{{"id", c.id},
            {"title", c.title},
            {"description_html", c.description_html},
            {"phases", phases},
            {"splits", splits},
            {"leaderboards", boards},
            {"default_metric", c.default_metric},
            {"remote_evaluation", c.remote_evaluation},
            {"evaluator_kind", to_string(c.evaluator.kind)},
            {"host_team", rec.host_team}};
  if (c.hitl) {
    view["hitl"] = {{"instructions_html", c.hitl->instructions_html},
                    {"rating_axes", c.hitl->rating_axes},
                    {"rounds_required", c.hitl->rounds_required},
                    {"scale", {{"min", c.hitl->scale.min}, {"max", c.hitl->scale.max}}}};
  }
  if (viewer && viewer->kind == PrincipalKind::kTeam && viewer->id == rec.host_team) {
    view["manifest"] = manifest_to_json(c);
  }
  return view;
}

Submission Platform::create_submission(const std::string& challenge_id,
                                       const std::string& phase_codename, const Principal& team,
                                       SubmissionKind kind, std::string_view artifact) {
  if (team.kind != PrincipalKind::kTeam) {
    throw Error(ErrorCode::kUnauthorized, "submissions are made by participant teams");
  }
  ChallengeConfig config;
  Phase phase;
  {
    std::lock_guard lock(mu_);
    const auto& rec = challenge_locked(challenge_id);
    if (rec.host_team == team.id) {
      throw Error(ErrorCode::kUnauthorized, "the host team cannot submit to its own challenge");
    }
    config = rec.config;
  }
  const Phase* p = config.find_phase_by_codename(phase_codename);
  if (!p) throw Error(ErrorCode::kNotFound, "no phase '" + phase_codename + "'");
  phase = *p;
  const Timestamp now = clock_.now();
  if (!phase.open_at(now)) {
    throw Error(ErrorCode::kPhaseClosed, "phase '" + phase_codename + "' is not open",
                {{"start", format_timestamp(phase.start)},
                 {"end", phase.end ? json(format_timestamp(*phase.end)) : json()}});
  }
  if (artifact.size() > options_.max_artifact_bytes) {
    throw Error(ErrorCode::kPayloadTooLarge,
                "artifact exceeds " + std::to_string(options_.max_artifact_bytes) + " bytes");
  }
  const bool wants_agent = config.evaluator.kind != EvaluatorKind::kPredictions;
  if (wants_agent != (kind == SubmissionKind::kAgent)) {
    throw Error(ErrorCode::kBadRequest, std::string("this challenge takes ") +
                                            (wants_agent ? "agent" : "predictions") +
                                            " submissions");
  }
  std::optional<SplitAgentArchive> agent;
  if (kind == SubmissionKind::kAgent) agent = split_agent_archive(artifact);

  const auto key = std::make_tuple(team.id, challenge_id, phase_codename, utc_day(now));
  auto rate_error = [&] {
    return Error(ErrorCode::kRateLimited,
                 "daily limit of " + std::to_string(phase.submission_limit_per_day) +
                     " submissions reached",
                 {{"limit", phase.submission_limit_per_day},
                  {"reset_at", format_timestamp(next_utc_midnight(now))}});
  };
  const bool limited = phase.submission_limit_per_day > 0;

  std::string id;
  {
    std::lock_guard lock(mu_);
    if (limited && daily_[key] >= phase.submission_limit_per_day) throw rate_error();
    id = padded("sub-", ++next_id_);
  }
  const std::string artifact_ref = "submissions/" + id + "/artifact";
  std::optional<std::string> snapshot_ref;
  if (agent) {
    blobs_->put(artifact_ref, agent->image, BlobKind::kArtifact);
    if (agent->snapshot) {
      snapshot_ref = "submissions/" + id + "/snapshot";
      blobs_->put(*snapshot_ref, *agent->snapshot, BlobKind::kSnapshot);
    }
  } else {
    blobs_->put(artifact_ref, artifact, BlobKind::kArtifact);
  }

  Submission s;
  {
    std::lock_guard lock(mu_);
    if (limited && daily_[key] >= phase.submission_limit_per_day) {
      blobs_->remove(artifact_ref);
      if (snapshot_ref) blobs_->remove(*snapshot_ref);
      throw rate_error();
    }
    ++daily_[key];
    s.id = id;
    s.challenge_id = challenge_id;
    s.team_id = team.id;
    s.phase_codename = phase_codename;
    s.kind = kind;
    s.artifact_ref = artifact_ref;
    s.snapshot_ref = snapshot_ref;
    s.artifact_bytes = artifact.size();
    s.created_at = now;
    s.status_history.push_back({SubmissionStatus::kSubmitted, now});
    s.message_id = "msg-" + id;
    broker_->publish({s.message_id, routing_key_for(challenge_id, config.remote_evaluation), id,
                      now, 1});
    transition_locked(s, SubmissionStatus::kQueued);
    submissions_[id] = s;
  }
  return s;
}

Submission& Platform::submission_locked(const std::string& id) {
  auto it = submissions_.find(id);
  if (it == submissions_.end()) throw Error(ErrorCode::kNotFound, "no submission '" + id + "'");
  return it->second;
}

const Submission& Platform::submission_locked(const std::string& id) const {
  auto it = submissions_.find(id);
  if (it == submissions_.end()) throw Error(ErrorCode::kNotFound, "no submission '" + id + "'");
  return it->second;
}

Submission Platform::submission(const std::string& id) const {
  std::lock_guard lock(mu_);
  return submission_locked(id);
}

std::string Platform::submission_log(const std::string& id) const {
  std::lock_guard lock(mu_);
  return submission_locked(id).log;
}

void Platform::transition_locked(Submission& s, SubmissionStatus to) {
  if (!legal_transition(s.status, to)) {
    throw Error(ErrorCode::kIllegalTransition,
                std::string(to_string(s.status)) + " -> " + std::string(to_string(to)) +
                    " is not allowed",
                {{"from", to_string(s.status)}, {"to", to_string(to)}});
  }
  s.status = to;
  s.status_history.push_back({to, clock_.now()});
}

json Platform::submission_view(const std::string& id, const Principal& caller) const {
  std::lock_guard lock(mu_);
  const auto& s = submission_locked(id);
  const auto& rec = challenge_locked(s.challenge_id);
  const bool host = caller.kind == PrincipalKind::kTeam && caller.id == rec.host_team;
  const bool owner = caller.kind == PrincipalKind::kTeam && caller.id == s.team_id;
  const bool staff = caller.kind == PrincipalKind::kAdmin || caller.kind == PrincipalKind::kWorker;
  if (!host && !owner && !staff) {
    throw Error(ErrorCode::kUnauthorized, "not your submission");
  }
  json view{{"id", s.id},
            {"challenge_id", s.challenge_id},
            {"team_id", s.team_id},
            {"phase", s.phase_codename},
            {"kind", to_string(s.kind)},
            {"status", to_string(s.status)},
            {"created_at", format_timestamp(s.created_at)},
            {"status_history", history_json(s.status_history)}};
  if (s.status == SubmissionStatus::kFinished || !s.results.empty()) {
    json results = json::object();
    for (const auto& [split, metrics] : s.results) {
      const auto vis = leaderboard_->visibility(s.challenge_id, s.phase_codename, split);
      if (!host && !staff && vis == Visibility::kHostOnly) continue;
      results[split] = metrics;
    }
    view["results"] = results;
  }
  if (s.status == SubmissionStatus::kFailed || host || staff) view["log"] = s.log;
  if ((host || staff) && !s.episodes.empty()) view["episodes"] = s.episodes;
  return view;
}

Submission Platform::transition_submission(const std::string& id, SubmissionStatus to,
                                           const Principal& actor) {
  std::lock_guard lock(mu_);
  auto& s = submission_locked(id);
  const auto& rec = challenge_locked(s.challenge_id);
  const bool host = actor.kind == PrincipalKind::kTeam && actor.id == rec.host_team;
  const bool owner_cancel = actor.kind == PrincipalKind::kTeam && actor.id == s.team_id &&
                            to == SubmissionStatus::kCancelled;
  const bool worker = actor.kind == PrincipalKind::kWorker || actor.kind == PrincipalKind::kAdmin;
  if (!host && !owner_cancel && !worker) {
    throw Error(ErrorCode::kUnauthorized, "not allowed to change this submission");
  }
  transition_locked(s, to);
  return s;
}

json Platform::leaderboard_view(const std::string& challenge_id, const std::string& phase,
                                const std::string& split,
                                const std::optional<Principal>& viewer) const {
  Viewer v;
  std::string host_team;
  {
    std::lock_guard lock(mu_);
    host_team = challenge_locked(challenge_id).host_team;
  }
  if (viewer && viewer->kind == PrincipalKind::kTeam) {
    v.role = viewer->id == host_team ? ViewerRole::kHost : ViewerRole::kParticipant;
    v.team_id = viewer->id;
  } else if (viewer && viewer->kind == PrincipalKind::kAdmin) {
    v.role = ViewerRole::kHost;
  }
  const auto ranked = leaderboard_->rank(challenge_id, phase, split, v);
  json entries = json::array();
  std::lock_guard lock(mu_);
  for (const auto& r : ranked) {
    json e{{"rank", r.rank},
           {"team", r.entry.team_id},
           {"metrics", r.entry.metrics},
           {"recorded_at", format_timestamp(r.entry.recorded_at)}};
    if (auto t = teams_.find(r.entry.team_id); t != teams_.end()) e["team_name"] = t->second.name;
    if (v.role == ViewerRole::kHost) e["submission_id"] = r.entry.submission_id;
    entries.push_back(std::move(e));
  }
  return {{"challenge_id", challenge_id},
          {"phase", phase},
          {"split", split},
          {"visibility", to_string(leaderboard_->visibility(challenge_id, phase, split))},
          {"entries", entries}};
}

std::vector<QueueMessage> Platform::dead_letters(const std::string& challenge_id,
                                                 const Principal& caller) const {
  if (caller.kind != PrincipalKind::kAdmin && !is_host(caller, challenge_id)) {
    throw Error(ErrorCode::kUnauthorized, "host only");
  }
  {
    std::lock_guard lock(mu_);
    challenge_locked(challenge_id);
  }
  return broker_->dead_letters(challenge_id);
}

// ---- results

void Platform::validate_results_locked(
    const Submission& s, const std::map<std::string, std::map<std::string, double>>& r) const {
  const auto& config = challenge_locked(s.challenge_id).config;
  const Phase* phase = config.find_phase_by_codename(s.phase_codename);
  for (const PhaseSplit* ps : config.splits_of_phase(phase->id)) {
    const auto& codename = config.find_split(ps->split_id)->codename;
    auto it = r.find(codename);
    if (it == r.end()) {
      throw Error(ErrorCode::kSchemaMismatch, "no result for split '" + codename + "'",
                  {{"split", codename}});
    }
    for (const auto& m : ps->leaderboard_schema) {
      if (!it->second.contains(m)) {
        throw Error(ErrorCode::kSchemaMismatch,
                    "result for split '" + codename + "' is missing metric '" + m + "'",
                    {{"split", codename}, {"metric", m}});
      }
    }
  }
}

void Platform::record_locked(Submission& s, const std::string& split,
                             const std::map<std::string, double>& metrics) {
  leaderboard_->record_result({s.challenge_id, s.id, s.team_id, s.phase_codename}, split, metrics);
  s.results[split] = metrics;
}

// ---- SubmissionGateway

std::optional<EvaluationJob> Platform::begin_evaluation(const std::string& submission_id,
                                                        const std::string&) {
  std::lock_guard lock(mu_);
  auto& s = submission_locked(submission_id);
  if (s.status == SubmissionStatus::kQueued) {
    transition_locked(s, SubmissionStatus::kRunning);
  } else if (s.status != SubmissionStatus::kRunning) {
    return std::nullopt;
  }
  return EvaluationJob{s.id, s.challenge_id, s.team_id, s.phase_codename, s.artifact_ref,
                       s.snapshot_ref};
}

void Platform::complete(const std::string& submission_id, const std::vector<SplitResult>& results) {
  std::lock_guard lock(mu_);
  auto& s = submission_locked(submission_id);
  if (s.status != SubmissionStatus::kRunning) {
    throw Error(ErrorCode::kIllegalTransition,
                "submission is " + std::string(to_string(s.status)));
  }
  std::map<std::string, std::map<std::string, double>> by_split;
  for (const auto& r : results) by_split[r.split_codename] = r.result.metrics;
  validate_results_locked(s, by_split);
  for (const auto& r : results) {
    record_locked(s, r.split_codename, r.result.metrics);
    if (!r.episodes.is_null()) s.episodes[r.split_codename] = r.episodes;
  }
  transition_locked(s, SubmissionStatus::kFinished);
}

void Platform::append_log_locked(Submission& s, const std::string& text) {
  s.log += text;
  if (!text.empty() && text.back() != '\n') s.log += '\n';
  const std::string ref = "submissions/" + s.id + "/log.txt";
  blobs_->put(ref, s.log, BlobKind::kLog);
  s.logs_ref = ref;
}

void Platform::fail(const std::string& submission_id, const std::string& log) {
  std::lock_guard lock(mu_);
  auto& s = submission_locked(submission_id);
  if (is_terminal(s.status)) return;
  append_log_locked(s, log);
  if (s.status == SubmissionStatus::kQueued) transition_locked(s, SubmissionStatus::kRunning);
  transition_locked(s, SubmissionStatus::kFailed);
}

void Platform::append_log(const std::string& submission_id, const std::string& text) {
  std::lock_guard lock(mu_);
  append_log_locked(submission_locked(submission_id), text);
}

void Platform::start_hitl(const std::string& submission_id) {
  std::int64_t count = 0;
  {
    std::lock_guard lock(mu_);
    const auto& s = submission_locked(submission_id);
    const auto& config = challenge_locked(s.challenge_id).config;
    if (!config.hitl) throw Error(ErrorCode::kNotHitlChallenge, "challenge has no HITL config");
    count = config.hitl->sessions_per_submission;
  }
  if (hitl_->sessions_of(submission_id).empty()) hitl_->open_sessions(submission_id, count);
}

// ---- HitlHost

HitlSubmission Platform::hitl_submission(const std::string& submission_id) {
  std::lock_guard lock(mu_);
  auto it = submissions_.find(submission_id);
  if (it == submissions_.end()) {
    throw Error(ErrorCode::kUnknownSubmission, "no submission '" + submission_id + "'");
  }
  const auto& config = challenge_locked(it->second.challenge_id).config;
  if (config.evaluator.kind != EvaluatorKind::kHitl || !config.hitl) {
    throw Error(ErrorCode::kNotHitlChallenge, "challenge '" + config.id + "' is not a HITL challenge");
  }
  return {config.id, *config.hitl, {it->second.artifact_ref, it->second.snapshot_ref}};
}

void Platform::record_hitl_results(const std::string& submission_id,
                                   const std::map<std::string, double>& axis_means) {
  std::lock_guard lock(mu_);
  auto& s = submission_locked(submission_id);
  if (s.status != SubmissionStatus::kRunning) return;
  const auto& config = challenge_locked(s.challenge_id).config;
  const Phase* phase = config.find_phase_by_codename(s.phase_codename);
  std::map<std::string, std::map<std::string, double>> by_split;
  for (const PhaseSplit* ps : config.splits_of_phase(phase->id)) {
    by_split[config.find_split(ps->split_id)->codename] = axis_means;
  }
  validate_results_locked(s, by_split);
  for (const auto& [split, metrics] : by_split) record_locked(s, split, metrics);
  transition_locked(s, SubmissionStatus::kFinished);
}

json Platform::hitl_report(const std::string& submission_id, const Principal& caller) const {
  std::string challenge_id;
  {
    std::lock_guard lock(mu_);
    challenge_id = submission_locked(submission_id).challenge_id;
  }
  if (caller.kind != PrincipalKind::kAdmin && !is_host(caller, challenge_id)) {
    throw Error(ErrorCode::kUnauthorized, "only the host may fetch HITL results");
  }
  return hitl_->report(submission_id);
}

// ---- remote evaluation

RemoteWorkerRegistration Platform::register_remote_worker(const std::string& challenge_id,
                                                          const Principal& host) {
  std::lock_guard lock(mu_);
  const auto& rec = challenge_locked(challenge_id);
  if (host.kind != PrincipalKind::kTeam || host.id != rec.host_team) {
    throw Error(ErrorCode::kUnauthorized, "only the host may register remote workers");
  }
  if (!rec.config.remote_evaluation) {
    throw Error(ErrorCode::kNotRemoteChallenge,
                "challenge '" + challenge_id + "' is evaluated on the platform");
  }
  RemoteWorkerRegistration reg;
  reg.worker_id = padded("remote-", ++next_id_);
  reg.challenge_id = challenge_id;
  reg.token = new_token();
  reg.last_heartbeat = clock_.now();
  tokens_[reg.token] = {PrincipalKind::kRemoteWorker, reg.worker_id, challenge_id};
  remote_workers_[reg.worker_id] = reg;
  return reg;
}

RemoteWorkerRegistration& Platform::remote_locked(const Principal& worker) {
  if (worker.kind != PrincipalKind::kRemoteWorker) {
    throw Error(ErrorCode::kUnauthorized, "remote worker token required");
  }
  auto it = remote_workers_.find(worker.id);
  if (it == remote_workers_.end()) throw Error(ErrorCode::kUnauthorized, "unknown remote worker");
  return it->second;
}

void Platform::heartbeat(const Principal& worker) {
  std::lock_guard lock(mu_);
  remote_locked(worker).last_heartbeat = clock_.now();
}

std::optional<json> Platform::lease_remote(const Principal& worker) {
  std::lock_guard lock(mu_);
  auto& reg = remote_locked(worker);
  const Timestamp now = clock_.now();
  if (now - reg.last_heartbeat > options_.remote_liveness) {
    throw Error(ErrorCode::kUnauthorized, "heartbeat is stale; send a heartbeat before leasing",
                {{"last_heartbeat", format_timestamp(reg.last_heartbeat)}});
  }
  const auto& config = challenge_locked(reg.challenge_id).config;
  const RoutingKey key = routing_key_for(config.id, true);
  const std::int64_t max_attempts = broker_->options().max_attempts;
  for (;;) {
    auto d = broker_->lease(key, reg.worker_id, options_.remote_visibility);
    if (!d) return std::nullopt;
    auto sit = submissions_.find(d->message.submission_id);
    if (sit == submissions_.end()) {
      broker_->ack(d->lease);
      continue;
    }
    Submission& s = sit->second;
    if (d->message.attempt > max_attempts) {
      if (!is_terminal(s.status)) {
        append_log_locked(s, "delivery attempts exhausted");
        if (s.status == SubmissionStatus::kQueued) transition_locked(s, SubmissionStatus::kRunning);
        transition_locked(s, SubmissionStatus::kFailed);
      }
      broker_->nack(d->lease, false);
      continue;
    }
    if (s.status == SubmissionStatus::kQueued) {
      transition_locked(s, SubmissionStatus::kRunning);
    } else if (s.status != SubmissionStatus::kRunning) {
      broker_->ack(d->lease);
      continue;
    }
    const std::string lease_id = d->message.message_id + "#" + std::to_string(d->lease.sequence);
    remote_leases_[lease_id] = {d->lease, s.id, reg.worker_id, d->message.attempt, false};
    const std::string token = new_token();
    downloads_[token] = {s.artifact_ref, now + options_.download_ttl};

    const Phase* phase = config.find_phase_by_codename(s.phase_codename);
    json splits = json::array();
    for (const PhaseSplit* ps : config.splits_of_phase(phase->id)) {
      const DatasetSplit* split = config.find_split(ps->split_id);
      splits.push_back({{"split", split->codename},
                        {"item_count", split->item_count},
                        {"schema", ps->leaderboard_schema}});
    }
    return json{{"lease_id", lease_id},
                {"submission_id", s.id},
                {"challenge_id", s.challenge_id},
                {"phase", s.phase_codename},
                {"attempt", d->message.attempt},
                {"lease_expires_at", format_timestamp(d->lease.expires_at)},
                {"splits", splits},
                {"chunkable", config.evaluator.chunkable},
                {"artifact", {{"url", "/downloads/" + token},
                              {"expires_at", format_timestamp(now + options_.download_ttl)},
                              {"bytes", s.artifact_bytes}}}};
  }
}

json Platform::report_remote(const Principal& worker, const std::string& lease_id,
                             const json& report) {
  std::lock_guard lock(mu_);
  auto& reg = remote_locked(worker);
  auto it = remote_leases_.find(lease_id);
  if (it == remote_leases_.end() || it->second.worker_id != reg.worker_id) {
    throw Error(ErrorCode::kLeaseNotHeld, "lease '" + lease_id + "' is not held by this worker");
  }
  RemoteLease& rl = it->second;
  if (rl.reported) return {{"status", "duplicate"}};
  auto& s = submission_locked(rl.submission_id);

  if (auto failure = report.find("failure"); failure != report.end()) {
    const std::string log =
        "remote attempt " + std::to_string(rl.attempt) + " on " + reg.worker_id + ": " +
        (failure->is_object() ? failure->value("log", "") : failure->dump());
    const std::int64_t max_attempts = broker_->options().max_attempts;
    const bool retry = rl.attempt < max_attempts;
    broker_->nack(rl.lease, retry);
    rl.reported = true;
    if (retry || is_terminal(s.status)) {
      append_log_locked(s, log);
      return {{"status", "requeued"}};
    }
    append_log_locked(s, log);
    transition_locked(s, SubmissionStatus::kFailed);
    return {{"status", "failed"}};
  }

  auto results = report.find("results");
  if (results == report.end() || !results->is_object()) {
    throw Error(ErrorCode::kBadRequest, "report needs \"results\" or \"failure\"");
  }
  std::map<std::string, std::map<std::string, double>> by_split;
  for (const auto& [split, metrics] : results->items()) {
    if (!metrics.is_object()) throw Error(ErrorCode::kBadRequest, "metrics must be an object");
    for (const auto& [name, v] : metrics.items()) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) {
        throw Error(ErrorCode::kBadRequest, "metric '" + name + "' is not a finite number");
      }
      by_split[split][name] = v.get<double>();
    }
  }
  validate_results_locked(s, by_split);
  broker_->ack(rl.lease);
  rl.reported = true;
  if (s.status == SubmissionStatus::kRunning) {
    for (const auto& [split, metrics] : by_split) record_locked(s, split, metrics);
    transition_locked(s, SubmissionStatus::kFinished);
  }
  return {{"status", "finished"}};
}

std::string Platform::download(const std::string& token) const {
  std::string ref;
  {
    std::lock_guard lock(mu_);
    auto it = downloads_.find(token);
    if (it == downloads_.end() || clock_.now() > it->second.expires_at) {
      throw Error(ErrorCode::kNotFound, "download reference is unknown or expired");
    }
    ref = it->second.artifact_ref;
  }
  return blobs_->get(ref);
}

}  // namespace gauntlet
