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

// Code-as-submission evaluation.
//
// A participant ships an agent bundle: a ZIP with `agent.json`
//   {"entrypoint": "<relative path>", "schema_version": 1, "snapshot": "<member>"?}
// plus the files it needs. The runtime and the optional snapshot member are
// stored as separate blobs and re-joined when the agent is staged.
//
// Agents speak line-delimited JSON on stdin/stdout, one process per episode:
//   platform -> agent  {"episode": id, "step": n, "observation": {...}}
//   agent -> platform  {"action": "<name>", "answer": ...}
// The action named "stop" ends the episode.
//
// Environments are organizer programs started as
//   <entrypoint> <assets_dir> <episode_id>
// that print {"observation": {...}} first, then answer every forwarded
// {"action": ..., "answer": ...} (or {"end": true} on truncation) with
//   {"observation": {...}, "done": false}  or
//   {"done": true, "outcome": {...}, "metrics": {"<name>": <number>}}.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gauntlet/blob_store.hpp"
#include "gauntlet/evaluator.hpp"
#include "gauntlet/model.hpp"
#include "gauntlet/sandbox.hpp"

namespace gauntlet {

inline constexpr std::string_view kAgentManifestName = "agent.json";
inline constexpr std::string_view kTerminalAction = "stop";

struct AgentManifest {
  std::string entrypoint;
  std::optional<std::string> snapshot;
};

// Throws Error{kManifestInvalid}.
AgentManifest parse_agent_manifest(std::string_view text);

// Blob keys of a submitted agent.
struct AgentBundle {
  std::string image_ref;
  std::optional<std::string> snapshot_ref;
};

// Splits an uploaded agent archive into runtime image and snapshot blobs.
// Throws Error{kManifestInvalid} / kMalformedArchive / kUnsafePath.
struct SplitAgentArchive {
  std::string image;  // ZIP without the snapshot member
  std::optional<std::string> snapshot;
};
SplitAgentArchive split_agent_archive(std::string_view archive);

struct AgentOptions {
  Duration step_deadline = std::chrono::seconds(10);
  std::size_t max_frame_bytes = 256 << 10;
  ResourceLimits limits{.cpu_seconds = 600,
                        .memory_bytes = 2LL << 30,
                        .max_processes = 32,
                        .max_file_bytes = 16LL << 20,
                        .max_open_files = 64};
  Isolation isolation = Isolation::kRequired;
};

// A materialized agent runtime. The directory holds exactly the bundle files
// plus the snapshot and is what the sandboxed agent sees at /agent.
class StagedAgent {
 public:
  StagedAgent(std::filesystem::path root, std::string entrypoint);
  StagedAgent(StagedAgent&&) noexcept;
  StagedAgent& operator=(StagedAgent&&) noexcept;
  ~StagedAgent();

  const std::filesystem::path& root() const { return root_; }
  const std::string& entrypoint() const { return entrypoint_; }
  // Relative paths of every regular file in the runtime, sorted.
  std::vector<std::string> listing() const;
  Process launch(const AgentOptions& options) const;

 private:
  std::filesystem::path root_;
  std::string entrypoint_;
};

inline constexpr std::string_view kAgentMountPoint = "/agent";

// Throws Error{kFetchFailed}, Error{kManifestInvalid}.
StagedAgent stage_agent(const AgentBundle& bundle, const BlobStore& blobs,
                        const std::filesystem::path& work_root);
// The snapshot is placed back at the member path the manifest declares.
StagedAgent stage_agent_archive(std::string_view image_archive,
                                std::optional<std::string_view> snapshot,
                                const std::filesystem::path& work_root);

// A running agent process driven one frame at a time.
class AgentInstance {
 public:
  AgentInstance(const StagedAgent& agent, AgentOptions options);

  // Sends one frame and waits for the reply. Throws Error{kAgentTimeout},
  // Error{kAgentCrashed} or Error{kProtocolViolation}; the process is
  // killed in every failure case.
  nlohmann::json exchange(const nlohmann::json& frame);
  void restart();
  void shutdown();
  bool alive();
  // Kills the process but keeps it current, so the next exchange sees a
  // crashed agent. For fault injection.
  void kill();

 private:
  const StagedAgent* agent_;
  AgentOptions options_;
  std::optional<Process> proc_;
};

struct EpisodeResult {
  std::string episode_id;
  std::int64_t steps_taken = 0;
  bool truncated = false;
  nlohmann::json terminal_outcome;
  std::map<std::string, double> metrics;
  nlohmann::json answer;
  nlohmann::json transcript = nlohmann::json::array();  // [{step, action, answer}]
};

nlohmann::json to_json(const EpisodeResult& r);

// Organizer side of an episode: where the environment program and its
// hidden assets live on the worker.
struct EnvironmentRuntime {
  EnvironmentSpec spec;
  std::filesystem::path entrypoint;
  std::filesystem::path assets_dir;
  std::vector<Mount> mounts;  // extra read-only paths the program needs
  Isolation isolation = Isolation::kBestEffort;
  ResourceLimits limits;
};

// Throws Error{kAgentCrashed}, Error{kAgentTimeout}, Error{kProtocolViolation}
// for agent faults and Error{kEvaluatorCrashed}/kProtocolError for
// environment faults. Reaching max steps is a normal, truncated outcome.
EpisodeResult run_episode(const StagedAgent& agent, const EnvironmentRuntime& env,
                          const std::string& episode_id, const AgentOptions& options,
                          std::stop_token stop = {});

// Feeds the episode results to the organizer evaluator in place of a
// predictions file. `call` supplies entrypoint, annotations, codenames and
// policy; its submission path and chunk are filled in here.
MetricResult score_agent(std::span<const EpisodeResult> results, const EnvironmentSpec& env,
                         EvaluatorCall call, std::stop_token stop = {});

}  // namespace gauntlet
