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

#include "gauntlet/worker.hpp"

#include <stdlib.h>
#include <sys/stat.h>
#include <unistd.h>

#include <condition_variable>
#include <exception>
#include <fstream>
#include <future>
#include <iostream>
#include <mutex>

#include "gauntlet/assets.hpp"
#include "gauntlet/error.hpp"

namespace gauntlet {

namespace fs = std::filesystem;

MetricResult evaluate_split(const EvalSettings& settings, const fs::path& submission,
                            const std::string& phase_codename, const SplitTask& task,
                            std::stop_token stop, std::string* log) {
  std::vector<Chunk> chunks;
  if (settings.chunkable && task.item_count > 0) {
    chunks = plan_chunks(task.item_count, std::max<std::int64_t>(1, settings.parallelism));
  } else {
    chunks.push_back({0, 0, task.item_count});
  }

  auto call_for = [&](const Chunk& chunk) {
    EvaluatorCall call;
    call.entrypoint = settings.entrypoint;
    call.annotations = task.annotations;
    call.submission = submission;
    call.phase_codename = phase_codename;
    call.split_codename = task.split_codename;
    call.chunk = chunk;
    call.output_limit = settings.output_limit;
    call.wall_timeout = settings.wall_timeout;
    call.policy = settings.policy;
    return call;
  };

  std::vector<std::future<EvaluatorRun>> running;
  running.reserve(chunks.size());
  for (const auto& chunk : chunks) {
    running.push_back(std::async(std::launch::async, [call = call_for(chunk), stop] {
      return run_evaluator(call, stop);
    }));
  }
  std::vector<MetricResult> parts;
  std::exception_ptr first_error;
  for (auto& f : running) {
    try {
      EvaluatorRun run = f.get();
      if (log && !run.stderr_text.empty()) *log += run.stderr_text;
      parts.push_back(std::move(run.result));
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return merge_results(parts, task.schema);
}

std::string_view to_string(RunOutcome o) {
  switch (o) {
    case RunOutcome::kIdle: return "idle";
    case RunOutcome::kFinished: return "finished";
    case RunOutcome::kFailed: return "failed";
    case RunOutcome::kRequeued: return "requeued";
    case RunOutcome::kSkipped: return "skipped";
    case RunOutcome::kHandedOff: return "handed-off";
    case RunOutcome::kInterrupted: return "interrupted";
  }
  return "unknown";
}

Worker::Worker(ChallengeConfig config, BlobStore& blobs, Broker& broker,
               SubmissionGateway& gateway, WorkerOptions options)
    : config_(std::move(config)),
      blobs_(blobs),
      broker_(broker),
      gateway_(gateway),
      options_(std::move(options)),
      route_(routing_key_for(config_.id, config_.remote_evaluation)) {
  if (options_.work_root.empty()) {
    std::string tmpl = (fs::temp_directory_path() / "gauntlet-worker-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw Error(ErrorCode::kInternal, "cannot create worker directory");
    options_.work_root = tmpl;
    owns_work_root_ = true;
  }
  fs::create_directories(options_.work_root);
  chmod(options_.work_root.c_str(), 0755);
  state_.worker_id = options_.worker_id;
  state_.challenge_id = config_.id;
}

Worker::~Worker() {
  std::error_code ec;
  if (owns_work_root_) {
    fs::remove_all(options_.work_root, ec);
  } else if (!state_.stage_dir.empty()) {
    fs::remove_all(state_.stage_dir, ec);
  }
}

const WorkerState& Worker::warmup() {
  if (state_.warmed) return state_;
  const auto members = challenge_members(config_.id, blobs_);
  const fs::path stage = options_.work_root / ("stage-" + config_.id + "-" + options_.worker_id);
  std::error_code ec;
  fs::remove_all(stage, ec);
  fs::create_directories(stage);

  std::map<BlobRef, fs::path> staged;
  for (const auto& [name, mode] : members) {
    std::string data;
    try {
      data = blobs_.get(challenge_member_key(config_.id, name));
    } catch (const Error&) {
      throw Error(ErrorCode::kAssetUnavailable, "challenge asset '" + name + "' is unavailable",
                  {{"asset", name}});
    }
    ++state_.warmup_load_count[name];
    const fs::path path = stage / name;
    fs::create_directories(path.parent_path());
    // Sandboxed programs run as an unprivileged user: keep everything
    // world-readable and executables world-executable.
    try {
      write_executable_file(path, data, (mode & 0111) ? 0755 : 0644);
    } catch (const Error&) {
      throw Error(ErrorCode::kAssetUnavailable, "cannot stage '" + name + "'");
    }
    staged[name] = path;
  }
  for (const auto& e : fs::recursive_directory_iterator(stage)) {
    if (e.is_directory()) chmod(e.path().c_str(), 0755);
  }
  chmod(stage.c_str(), 0755);

  auto require = [&staged, &stage](const BlobRef& ref, ErrorCode code, const char* what) {
    if (staged.contains(ref)) return;
    // directory references are satisfied by any member beneath them
    std::string dir = ref.ends_with('/') ? ref : ref + "/";
    for (const auto& [name, path] : staged) {
      if (name.starts_with(dir)) return;
    }
    (void)stage;
    throw Error(code, std::string(what) + " '" + ref + "' is not in the staged bundle",
                {{"asset", ref}});
  };

  const bool needs_evaluator = config_.evaluator.kind != EvaluatorKind::kHitl ||
                               !config_.evaluator.entrypoint.empty();
  if (needs_evaluator) {
    require(config_.evaluator.entrypoint, ErrorCode::kEntrypointInvalid, "evaluator entrypoint");
    chmod((stage / config_.evaluator.entrypoint).c_str(), 0755);
  }
  for (const auto& ref : config_.evaluator.warmup_assets) {
    require(ref, ErrorCode::kAssetUnavailable, "warm-up asset");
  }
  for (const auto& split : config_.splits) {
    if (split.annotation_ref) require(*split.annotation_ref, ErrorCode::kAssetUnavailable, "annotations");
    if (split.environment) {
      require(split.environment->entrypoint, ErrorCode::kEntrypointInvalid, "environment entrypoint");
      chmod((stage / split.environment->entrypoint).c_str(), 0755);
      require(split.environment->assets_ref, ErrorCode::kAssetUnavailable, "environment assets");
    }
  }
  if (needs_evaluator && access((stage / config_.evaluator.entrypoint).c_str(), X_OK) != 0) {
    throw Error(ErrorCode::kEntrypointInvalid, "evaluator entrypoint is not executable");
  }

  state_.staged_assets = std::move(staged);
  state_.stage_dir = stage;
  state_.warmed = true;
  return state_;
}

void Worker::require_warm() const {
  if (!state_.warmed) throw Error(ErrorCode::kBadRequest, "worker is not warmed up");
}

EvalSettings Worker::settings() const {
  EvalSettings s;
  s.entrypoint = state_.stage_dir / config_.evaluator.entrypoint;
  s.chunkable = config_.evaluator.chunkable;
  s.parallelism = options_.parallelism;
  s.policy.isolation = options_.isolation;
  s.policy.mounts.push_back({state_.stage_dir, {}, false});
  s.policy.limits.cpu_seconds = config_.evaluator.cpu_seconds;
  s.policy.limits.memory_bytes = config_.evaluator.memory_bytes;
  s.output_limit = options_.output_limit;
  s.wall_timeout = std::chrono::seconds(config_.evaluator.wall_seconds);
  return s;
}

SplitTask Worker::task_for(const DatasetSplit& split, const PhaseSplit& ps) const {
  SplitTask t;
  t.split_codename = split.codename;
  if (split.annotation_ref) t.annotations = state_.stage_dir / *split.annotation_ref;
  t.item_count = split.item_count;
  t.schema = ps.leaderboard_schema;
  return t;
}

MetricResult Worker::evaluate_chunk(const fs::path& artifact, const Chunk& chunk,
                                    const std::string& phase_codename,
                                    const std::string& split_codename, std::stop_token stop) {
  require_warm();
  const auto& ps = resolve_phase_split(config_, phase_codename, split_codename);
  const auto* split = config_.find_split(ps.split_id);
  if (chunk.begin < 0 || chunk.end > split->item_count || chunk.begin > chunk.end) {
    throw Error(ErrorCode::kBadRequest, "chunk outside the dataset");
  }
  const SplitTask task = task_for(*split, ps);
  const EvalSettings s = settings();
  EvaluatorCall call;
  call.entrypoint = s.entrypoint;
  call.annotations = task.annotations;
  call.submission = artifact;
  call.phase_codename = phase_codename;
  call.split_codename = split->codename;
  call.chunk = chunk;
  call.output_limit = s.output_limit;
  call.wall_timeout = s.wall_timeout;
  call.policy = s.policy;
  return run_evaluator(call, stop).result;
}

SplitResult Worker::evaluate_agent_split(const EvaluationJob& job, const StagedAgent& agent,
                                         const DatasetSplit& split, const PhaseSplit& ps,
                                         std::stop_token stop) {
  if (!split.environment) {
    throw Error(ErrorCode::kAssetUnavailable, "split '" + split.codename + "' has no environment");
  }
  const auto& env = *split.environment;
  EnvironmentRuntime rt;
  rt.spec = env;
  rt.entrypoint = state_.stage_dir / env.entrypoint;
  std::string assets = env.assets_ref;
  while (assets.ends_with('/')) assets.pop_back();
  rt.assets_dir = state_.stage_dir / assets;
  rt.mounts.push_back({state_.stage_dir, {}, false});
  rt.isolation = options_.isolation;
  rt.limits.cpu_seconds = config_.evaluator.cpu_seconds;
  rt.limits.memory_bytes = config_.evaluator.memory_bytes;

  std::vector<EpisodeResult> episodes;
  for (const auto& episode : env.episodes) {
    episodes.push_back(run_episode(agent, rt, episode, options_.agent, stop));
  }
  const SplitTask task = task_for(split, ps);
  const EvalSettings s = settings();
  EvaluatorCall call;
  call.entrypoint = s.entrypoint;
  call.annotations = task.annotations;
  call.phase_codename = job.phase_codename;
  call.split_codename = split.codename;
  call.output_limit = s.output_limit;
  call.wall_timeout = s.wall_timeout;
  call.policy = s.policy;
  SplitResult r;
  r.split_codename = split.codename;
  r.result = score_agent(episodes, env, call, stop);
  check_schema(r.result, ps.leaderboard_schema);
  r.episodes = nlohmann::json::array();
  for (const auto& e : episodes) r.episodes.push_back(to_json(e));
  return r;
}

std::vector<SplitResult> Worker::evaluate(const EvaluationJob& job, std::stop_token stop) {
  require_warm();
  const Phase* phase = config_.find_phase_by_codename(job.phase_codename);
  if (!phase) throw Error(ErrorCode::kNotFound, "unknown phase '" + job.phase_codename + "'");

  std::vector<SplitResult> results;
  if (config_.evaluator.kind == EvaluatorKind::kAgent) {
    StagedAgent agent = stage_agent({job.artifact_ref, job.snapshot_ref}, blobs_,
                                    options_.work_root / "agents");
    for (const PhaseSplit* ps : config_.splits_of_phase(phase->id)) {
      const DatasetSplit* split = config_.find_split(ps->split_id);
      results.push_back(evaluate_agent_split(job, agent, *split, *ps, stop));
    }
    return results;
  }

  if (!blobs_.exists(job.artifact_ref)) {
    throw Error(ErrorCode::kAssetUnavailable, "submission artifact is missing");
  }
  const fs::path artifact = blobs_.path_of(job.artifact_ref);
  const EvalSettings s = settings();
  for (const PhaseSplit* ps : config_.splits_of_phase(phase->id)) {
    const DatasetSplit* split = config_.find_split(ps->split_id);
    std::string log;
    SplitResult r;
    r.split_codename = split->codename;
    r.result = evaluate_split(s, artifact, job.phase_codename, task_for(*split, *ps), stop, &log);
    if (!log.empty()) gateway_.append_log(job.submission_id, "[" + split->codename + "] " + log);
    results.push_back(std::move(r));
  }
  return results;
}

namespace {

std::string describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    std::string s = std::string(code_name(err->code())) + ": " + err->what();
    if (err->details().is_object()) {
      if (auto it = err->details().find("stderr");
          it != err->details().end() && it->is_string() && !it->get<std::string>().empty()) {
        s += "\n--- stderr ---\n" + it->get<std::string>();
      }
    }
    return s;
  }
  return std::string("Internal: ") + e.what();
}

template <typename F>
void settle(F&& f) {
  try {
    f();
  } catch (const Error&) {
    // lease already expired: the redelivery sees the submission's new state
  }
}

}  // namespace

RunOutcome Worker::run_once(std::stop_token stop) {
  warmup();
  if (stop.stop_requested()) return RunOutcome::kInterrupted;
  auto delivery = broker_.lease(route_, options_.worker_id, options_.visibility);
  if (!delivery) return RunOutcome::kIdle;
  const auto& msg = delivery->message;
  const auto& lease = delivery->lease;
  const std::int64_t max_attempts = broker_.options().max_attempts;

  if (msg.attempt > max_attempts) {
    settle([&] { gateway_.fail(msg.submission_id, "delivery attempts exhausted"); });
    settle([&] { broker_.nack(lease, false); });
    return RunOutcome::kFailed;
  }

  std::optional<EvaluationJob> job;
  try {
    job = gateway_.begin_evaluation(msg.submission_id, options_.worker_id);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNotFound && e.code() != ErrorCode::kIllegalTransition) throw;
  }
  if (!job) {
    settle([&] { broker_.ack(lease); });
    return RunOutcome::kSkipped;
  }

  const bool hitl = config_.evaluator.kind == EvaluatorKind::kHitl;
  std::vector<SplitResult> results;
  try {
    if (hitl) {
      gateway_.start_hitl(job->submission_id);
    } else {
      results = evaluate(*job, stop);
    }
  } catch (const Cancelled&) {
    return RunOutcome::kInterrupted;
  } catch (const std::exception& e) {
    if (stop.stop_requested()) return RunOutcome::kInterrupted;
    const std::string log = "attempt " + std::to_string(msg.attempt) + "/" +
                            std::to_string(max_attempts) + " on " + options_.worker_id + ": " +
                            describe(e);
    if (msg.attempt < max_attempts) {
      settle([&] { gateway_.append_log(job->submission_id, log); });
      settle([&] { broker_.nack(lease, true); });
      return RunOutcome::kRequeued;
    }
    settle([&] { gateway_.fail(job->submission_id, log); });
    settle([&] { broker_.nack(lease, false); });
    return RunOutcome::kFailed;
  }

  if (hitl) {
    settle([&] { broker_.ack(lease); });
    return RunOutcome::kHandedOff;
  }
  try {
    gateway_.complete(job->submission_id, results);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kIllegalTransition) throw;
    settle([&] { broker_.ack(lease); });
    return RunOutcome::kSkipped;
  }
  settle([&] { broker_.ack(lease); });
  return RunOutcome::kFinished;
}

void Worker::run_loop(std::stop_token stop) {
  std::mutex mu;
  std::condition_variable_any cv;
  while (!stop.stop_requested()) {
    RunOutcome outcome = RunOutcome::kIdle;
    try {
      outcome = run_once(stop);
    } catch (const std::exception& e) {
      std::cerr << "worker " << options_.worker_id << ": " << e.what() << "\n";
    }
    if (outcome == RunOutcome::kIdle) {
      std::unique_lock lock(mu);
      cv.wait_for(lock, stop, options_.poll_interval, [] { return false; });
    }
  }
}

}  // namespace gauntlet
