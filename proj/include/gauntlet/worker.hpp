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

// Challenge evaluation workers.
//
// A worker is bound to one challenge. At start-up it stages the challenge
// bundle from the blob store once (warm-up); afterwards it leases messages
// from the challenge's routing key and evaluates each submission against
// every split of its phase, splitting chunkable datasets across cores.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gauntlet/agent.hpp"
#include "gauntlet/blob_store.hpp"
#include "gauntlet/evaluator.hpp"
#include "gauntlet/model.hpp"
#include "gauntlet/queue.hpp"

namespace gauntlet {

// One split's share of a submission evaluation.
struct SplitTask {
  std::string split_codename;
  std::filesystem::path annotations = "-";
  std::int64_t item_count = 0;
  std::vector<std::string> schema;
};

struct EvalSettings {
  std::filesystem::path entrypoint;
  bool chunkable = false;
  std::int64_t parallelism = 1;
  SandboxPolicy policy;
  std::size_t output_limit = kDefaultOutputLimit;
  Duration wall_timeout = std::chrono::seconds(1200);
};

// Runs the evaluator over plan_chunks(item_count, parallelism) concurrently
// (or once over the whole split when not chunkable), then merges. Evaluator
// stderr is appended to `log` when given. Shared by local and remote workers.
MetricResult evaluate_split(const EvalSettings& settings, const std::filesystem::path& submission,
                            const std::string& phase_codename, const SplitTask& task,
                            std::stop_token stop = {}, std::string* log = nullptr);

struct SplitResult {
  std::string split_codename;
  MetricResult result;
  nlohmann::json episodes;  // agent submissions: per-episode results incl. transcripts
};

// What a worker needs to know about a leased submission.
struct EvaluationJob {
  std::string submission_id;
  std::string challenge_id;
  std::string team_id;
  std::string phase_codename;
  std::string artifact_ref;
  std::optional<std::string> snapshot_ref;
};

// The worker's view of the submission store. Implemented by the platform.
class SubmissionGateway {
 public:
  virtual ~SubmissionGateway() = default;
  // Moves the submission to Running (a redelivery finds it Running already).
  // Returns nothing when it is cancelled or already terminal.
  virtual std::optional<EvaluationJob> begin_evaluation(const std::string& submission_id,
                                                        const std::string& worker_id) = 0;
  // Records per-split results and finishes the submission. Throws
  // Error{kIllegalTransition} if it was cancelled meanwhile.
  virtual void complete(const std::string& submission_id,
                        const std::vector<SplitResult>& results) = 0;
  virtual void fail(const std::string& submission_id, const std::string& log) = 0;
  virtual void append_log(const std::string& submission_id, const std::string& text) = 0;
  // Human-in-the-loop challenges: hands the submission to the session broker.
  virtual void start_hitl(const std::string& submission_id) = 0;
};

struct WorkerOptions {
  std::string worker_id = "worker";
  std::int64_t parallelism = 4;
  std::filesystem::path work_root;  // defaults to a temp directory
  Duration visibility = std::chrono::seconds(300);
  Duration poll_interval = std::chrono::milliseconds(200);
  std::size_t output_limit = kDefaultOutputLimit;
  Isolation isolation = Isolation::kBestEffort;
  AgentOptions agent;
};

struct WorkerState {
  std::string worker_id;
  std::string challenge_id;
  bool warmed = false;
  std::map<BlobRef, std::int64_t> warmup_load_count;
  std::map<BlobRef, std::filesystem::path> staged_assets;
  std::filesystem::path stage_dir;  // staged bundle root
};

enum class RunOutcome {
  kIdle,         // nothing to lease
  kFinished,     // evaluated and acked
  kFailed,       // failed for good, dead-lettered
  kRequeued,     // transient failure, returned to the queue
  kSkipped,      // cancelled or already terminal, acked
  kHandedOff,    // given to the human-in-the-loop broker
  kInterrupted,  // shutdown mid-evaluation, lease left to expire
};

std::string_view to_string(RunOutcome o);

class Worker {
 public:
  Worker(ChallengeConfig config, BlobStore& blobs, Broker& broker, SubmissionGateway& gateway,
         WorkerOptions options = {});
  Worker(const Worker&) = delete;
  Worker& operator=(const Worker&) = delete;
  ~Worker();

  // Stages every bundle member once. A second call returns the existing
  // state. Throws Error{kAssetUnavailable}, Error{kEntrypointInvalid}.
  const WorkerState& warmup();
  const WorkerState& state() const { return state_; }
  const ChallengeConfig& config() const { return config_; }

  MetricResult evaluate_chunk(const std::filesystem::path& artifact, const Chunk& chunk,
                              const std::string& phase_codename,
                              const std::string& split_codename, std::stop_token stop = {});
  std::vector<SplitResult> evaluate(const EvaluationJob& job, std::stop_token stop = {});

  RunOutcome run_once(std::stop_token stop = {});
  // Leases until the token fires.
  void run_loop(std::stop_token stop);

 private:
  EvalSettings settings() const;
  SplitTask task_for(const DatasetSplit& split, const PhaseSplit& ps) const;
  SplitResult evaluate_agent_split(const EvaluationJob& job, const StagedAgent& agent,
                                   const DatasetSplit& split, const PhaseSplit& ps,
                                   std::stop_token stop);
  void require_warm() const;

  ChallengeConfig config_;
  BlobStore& blobs_;
  Broker& broker_;
  SubmissionGateway& gateway_;
  WorkerOptions options_;
  WorkerState state_;
  RoutingKey route_;
  bool owns_work_root_ = false;
};

}  // namespace gauntlet
