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

// The platform service core behind the REST API: teams and tokens,
// challenge registration, the submission state machine, daily limits,
// remote-evaluation leases and artifact downloads. It also serves as the
// submission gateway for local workers and the host for the HITL broker.
//
// Submission status machine:
//
//   Submitted -> Queued -> Running -> Finished | Failed | Cancelled
//                Queued -> Cancelled

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "gauntlet/blob_store.hpp"
#include "gauntlet/bundle.hpp"
#include "gauntlet/clock.hpp"
#include "gauntlet/hitl.hpp"
#include "gauntlet/leaderboard.hpp"
#include "gauntlet/queue.hpp"
#include "gauntlet/worker.hpp"

namespace gauntlet {

enum class SubmissionStatus { kSubmitted, kQueued, kRunning, kFinished, kFailed, kCancelled };
enum class SubmissionKind { kPredictions, kAgent };

std::string_view to_string(SubmissionStatus s);
std::optional<SubmissionStatus> parse_submission_status(std::string_view s);
std::string_view to_string(SubmissionKind k);
std::optional<SubmissionKind> parse_submission_kind(std::string_view s);
bool is_terminal(SubmissionStatus s);
bool legal_transition(SubmissionStatus from, SubmissionStatus to);

struct StatusChange {
  SubmissionStatus status;
  Timestamp at;
};

struct Submission {
  std::string id;
  std::string challenge_id;
  std::string team_id;
  std::string phase_codename;
  SubmissionKind kind = SubmissionKind::kPredictions;
  std::string artifact_ref;
  std::optional<std::string> snapshot_ref;
  std::uint64_t artifact_bytes = 0;
  SubmissionStatus status = SubmissionStatus::kSubmitted;
  Timestamp created_at{};
  std::vector<StatusChange> status_history;
  std::optional<std::string> logs_ref;
  std::string log;
  std::string message_id;
  std::map<std::string, std::map<std::string, double>> results;  // split -> metrics
  std::map<std::string, nlohmann::json> episodes;                // split -> episode results
};

struct Team {
  std::string id;
  std::string name;
  std::vector<std::string> members;
};

enum class PrincipalKind { kTeam, kWorker, kRemoteWorker, kEvaluator, kAdmin };

struct Principal {
  PrincipalKind kind = PrincipalKind::kTeam;
  std::string id;            // team, worker or evaluator id
  std::string challenge_id;  // remote workers only
};

struct RemoteWorkerRegistration {
  std::string worker_id;
  std::string challenge_id;
  std::string token;
  Timestamp last_heartbeat{};
};

struct PlatformOptions {
  std::filesystem::path data_dir;
  bool start_local_workers = true;
  std::int64_t workers_per_challenge = 1;
  WorkerOptions worker;
  BrokerOptions broker;  // log path defaults to <data_dir>/broker.log
  Duration remote_liveness = std::chrono::seconds(120);
  Duration remote_visibility = std::chrono::seconds(300);
  Duration download_ttl = std::chrono::minutes(15);
  std::uint64_t max_artifact_bytes = 5ULL << 30;
  AgentOptions hitl_agent;
  Duration hitl_sweep_interval = std::chrono::seconds(30);  // zero disables the sweeper
  std::string admin_token;  // generated when empty
};

class Platform final : public SubmissionGateway, public HitlHost {
 public:
  Platform(const Clock& clock, PlatformOptions options);
  ~Platform() override;
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  // ---- identity
  const std::string& admin_token() const { return admin_token_; }
  // Returns the team and a bearer token for it.
  std::pair<Team, std::string> create_team(const std::string& name,
                                           std::vector<std::string> members = {});
  // Admin only. Returns a bearer token for the evaluator.
  std::string create_evaluator(const Principal& admin, const EvaluatorProfile& profile);
  // Admin only. A token local workers may use on the status endpoint.
  std::string create_worker_token(const Principal& admin, const std::string& worker_id);
  // Throws Error{kUnauthorized}.
  Principal authenticate(const std::string& token) const;
  bool is_host(const Principal& p, const std::string& challenge_id) const;

  // ---- challenges
  // Throws Error{kValidationFailed} with details.violations, or the archive
  // errors of parse_bundle. Nothing is stored on failure.
  ChallengeConfig create_challenge(std::string_view bundle, const Principal& host);
  ChallengeConfig challenge(const std::string& id) const;
  std::vector<std::string> challenge_ids() const;
  nlohmann::json challenge_view(const std::string& id, const std::optional<Principal>& viewer) const;

  // ---- submissions
  Submission create_submission(const std::string& challenge_id, const std::string& phase_codename,
                               const Principal& team, SubmissionKind kind,
                               std::string_view artifact);
  Submission submission(const std::string& id) const;
  nlohmann::json submission_view(const std::string& id, const Principal& caller) const;
  Submission transition_submission(const std::string& id, SubmissionStatus to,
                                   const Principal& actor);
  std::string submission_log(const std::string& id) const;

  nlohmann::json leaderboard_view(const std::string& challenge_id, const std::string& phase,
                                  const std::string& split,
                                  const std::optional<Principal>& viewer) const;
  std::vector<QueueMessage> dead_letters(const std::string& challenge_id,
                                         const Principal& caller) const;

  // ---- remote evaluation
  RemoteWorkerRegistration register_remote_worker(const std::string& challenge_id,
                                                  const Principal& host);
  // Empty when nothing is queued.
  std::optional<nlohmann::json> lease_remote(const Principal& worker);
  nlohmann::json report_remote(const Principal& worker, const std::string& lease_id,
                               const nlohmann::json& report);
  void heartbeat(const Principal& worker);
  // Throws Error{kNotFound} for unknown or expired references.
  std::string download(const std::string& token) const;

  // ---- human-in-the-loop
  HitlBroker& hitl() { return *hitl_; }
  nlohmann::json hitl_report(const std::string& submission_id, const Principal& caller) const;

  // ---- SubmissionGateway
  std::optional<EvaluationJob> begin_evaluation(const std::string& submission_id,
                                                const std::string& worker_id) override;
  void complete(const std::string& submission_id,
                const std::vector<SplitResult>& results) override;
  void fail(const std::string& submission_id, const std::string& log) override;
  void append_log(const std::string& submission_id, const std::string& text) override;
  void start_hitl(const std::string& submission_id) override;

  // ---- HitlHost
  HitlSubmission hitl_submission(const std::string& submission_id) override;
  void record_hitl_results(const std::string& submission_id,
                           const std::map<std::string, double>& axis_means) override;

  Broker& broker() { return *broker_; }
  BlobStore& blobs() { return *blobs_; }
  const Leaderboard& leaderboard() const { return *leaderboard_; }
  const Clock& clock() const { return clock_; }
  const PlatformOptions& options() const { return options_; }
  void stop_workers();

 private:
  struct ChallengeRecord {
    ChallengeConfig config;
    std::string host_team;
  };
  struct RemoteLease {
    Lease lease;
    std::string submission_id;
    std::string worker_id;
    std::int64_t attempt = 1;
    bool reported = false;
  };
  struct Download {
    std::string artifact_ref;
    Timestamp expires_at;
  };

  std::string new_token();
  Submission& submission_locked(const std::string& id);
  const Submission& submission_locked(const std::string& id) const;
  const ChallengeRecord& challenge_locked(const std::string& id) const;
  void transition_locked(Submission& s, SubmissionStatus to);
  void append_log_locked(Submission& s, const std::string& text);
  void record_locked(Submission& s, const std::string& split,
                     const std::map<std::string, double>& metrics);
  void validate_results_locked(const Submission& s,
                               const std::map<std::string, std::map<std::string, double>>& r) const;
  RemoteWorkerRegistration& remote_locked(const Principal& worker);
  void start_local_workers(const ChallengeConfig& config);

  const Clock& clock_;
  PlatformOptions options_;
  std::string admin_token_;
  std::unique_ptr<BlobStore> blobs_;
  std::unique_ptr<Broker> broker_;
  std::unique_ptr<Leaderboard> leaderboard_;
  std::unique_ptr<HitlBroker> hitl_;

  mutable std::mutex mu_;
  std::map<std::string, Principal> tokens_;
  std::map<std::string, Team> teams_;
  std::map<std::string, ChallengeRecord> challenges_;
  std::map<std::string, Submission> submissions_;
  std::map<std::tuple<std::string, std::string, std::string, long long>, std::int64_t> daily_;
  std::map<std::string, RemoteWorkerRegistration> remote_workers_;  // worker id ->
  std::map<std::string, RemoteLease> remote_leases_;
  std::map<std::string, Download> downloads_;
  std::uint64_t next_id_ = 0;

  struct LocalWorker {
    std::unique_ptr<Worker> worker;
    std::jthread thread;
  };
  std::mutex workers_mu_;
  std::vector<LocalWorker> workers_;
  std::jthread sweeper_;
};

}  // namespace gauntlet
