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

#include "gauntlet/agent.hpp"

#include <stdlib.h>
#include <sys/stat.h>

#include <algorithm>
#include <fstream>

#include "gauntlet/error.hpp"
#include "gauntlet/zip.hpp"

namespace gauntlet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Environments are organizer code; give them more slack than agents.
constexpr Duration kEnvironmentDeadline = std::chrono::seconds(60);
constexpr std::size_t kEnvironmentFrameLimit = 4 << 20;

fs::path make_private_dir(const fs::path& parent, const std::string& prefix) {
  std::error_code ec;
  fs::create_directories(parent, ec);
  std::string tmpl = (parent / (prefix + "XXXXXX")).string();
  if (!mkdtemp(tmpl.data())) {
    throw Error(ErrorCode::kInternal, "cannot create directory under " + parent.string());
  }
  chmod(tmpl.c_str(), 0755);
  return tmpl;
}

void write_file(const fs::path& path, std::string_view data, std::uint32_t mode) {
  fs::create_directories(path.parent_path());
  write_executable_file(path, data, mode);
}

std::string tail(const std::string& s, std::size_t n) {
  return s.size() <= n ? s : s.substr(s.size() - n);
}

}  // namespace

AgentManifest parse_agent_manifest(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::kManifestInvalid, "agent.json is not a JSON object");
  }
  if (j.value("schema_version", json()) != json(1)) {
    throw Error(ErrorCode::kManifestInvalid, "agent.json: schema_version must be 1");
  }
  AgentManifest m;
  auto ep = j.find("entrypoint");
  if (ep == j.end() || !ep->is_string() || ep->get<std::string>().empty()) {
    throw Error(ErrorCode::kManifestInvalid, "agent.json: entrypoint is required");
  }
  m.entrypoint = ep->get<std::string>();
  if (!zip::is_safe_member_name(m.entrypoint)) {
    throw Error(ErrorCode::kManifestInvalid, "agent.json: entrypoint must be a relative path");
  }
  if (auto snap = j.find("snapshot"); snap != j.end() && !snap->is_null()) {
    if (!snap->is_string() || !zip::is_safe_member_name(snap->get<std::string>())) {
      throw Error(ErrorCode::kManifestInvalid, "agent.json: snapshot must be a relative path");
    }
    m.snapshot = snap->get<std::string>();
  }
  return m;
}

namespace {

struct CheckedArchive {
  AgentManifest manifest;
  std::vector<zip::Member> members;
};

CheckedArchive check_archive(std::string_view archive) {
  CheckedArchive c;
  c.members = zip::read_archive(archive);
  auto find = [&c](std::string_view name) {
    return std::find_if(c.members.begin(), c.members.end(),
                        [name](const zip::Member& m) { return m.name == name; });
  };
  auto manifest = find(kAgentManifestName);
  if (manifest == c.members.end()) {
    throw Error(ErrorCode::kManifestInvalid, "agent bundle has no agent.json");
  }
  c.manifest = parse_agent_manifest(manifest->data);
  return c;
}

}  // namespace

SplitAgentArchive split_agent_archive(std::string_view archive) {
  CheckedArchive c = check_archive(archive);
  const auto& m = c.manifest;
  auto has = [&c](const std::string& name) {
    return std::any_of(c.members.begin(), c.members.end(),
                       [&name](const zip::Member& x) { return x.name == name; });
  };
  if (!has(m.entrypoint)) {
    throw Error(ErrorCode::kManifestInvalid,
                "agent.json: entrypoint '" + m.entrypoint + "' is not in the bundle");
  }
  if (m.snapshot && !has(*m.snapshot)) {
    throw Error(ErrorCode::kManifestInvalid,
                "agent.json: snapshot '" + *m.snapshot + "' is not in the bundle");
  }
  SplitAgentArchive out;
  zip::Writer image;
  for (auto& member : c.members) {
    if (m.snapshot && member.name == *m.snapshot) {
      out.snapshot = std::move(member.data);
      continue;
    }
    image.add(member.name, std::move(member.data), member.mode);
  }
  out.image = image.finish();
  return out;
}

StagedAgent::StagedAgent(fs::path root, std::string entrypoint)
    : root_(std::move(root)), entrypoint_(std::move(entrypoint)) {}

StagedAgent::StagedAgent(StagedAgent&& other) noexcept
    : root_(std::exchange(other.root_, {})), entrypoint_(std::move(other.entrypoint_)) {}

StagedAgent& StagedAgent::operator=(StagedAgent&& other) noexcept {
  if (this != &other) {
    std::error_code ec;
    if (!root_.empty()) fs::remove_all(root_, ec);
    root_ = std::exchange(other.root_, {});
    entrypoint_ = std::move(other.entrypoint_);
  }
  return *this;
}

StagedAgent::~StagedAgent() {
  if (root_.empty()) return;
  std::error_code ec;
  fs::remove_all(root_, ec);
}

std::vector<std::string> StagedAgent::listing() const {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root_)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root_).generic_string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

Process StagedAgent::launch(const AgentOptions& options) const {
  SandboxPolicy policy;
  policy.isolation = options.isolation;
  policy.limits = options.limits;
  policy.mounts.push_back({root_, fs::path(kAgentMountPoint), false});
  const bool isolated =
      options.isolation == Isolation::kRequired ||
      (options.isolation == Isolation::kBestEffort && isolation_supported());
  const fs::path base = isolated ? fs::path(kAgentMountPoint) : root_;
  policy.working_dir = base;
  policy.env["AGENT_HOME"] = base.string();
  return Process::spawn({(base / entrypoint_).string()}, policy);
}

StagedAgent stage_agent_archive(std::string_view image_archive,
                                std::optional<std::string_view> snapshot,
                                const fs::path& work_root) {
  CheckedArchive c = check_archive(image_archive);
  const auto& m = c.manifest;
  const bool has_entry = std::any_of(c.members.begin(), c.members.end(),
                                     [&m](const zip::Member& x) { return x.name == m.entrypoint; });
  if (!has_entry) {
    throw Error(ErrorCode::kManifestInvalid,
                "agent.json: entrypoint '" + m.entrypoint + "' is not in the bundle");
  }
  if (m.snapshot.has_value() != snapshot.has_value()) {
    throw Error(ErrorCode::kManifestInvalid,
                m.snapshot ? "agent.json declares a snapshot but none was supplied"
                           : "a snapshot was supplied but agent.json declares none");
  }

  StagedAgent staged(make_private_dir(work_root, "agent-"), m.entrypoint);
  for (const auto& member : c.members) {
    if (member.name.ends_with('/')) {
      fs::create_directories(staged.root() / member.name);
      continue;
    }
    const bool exec = member.executable() || member.name == m.entrypoint;
    write_file(staged.root() / member.name, member.data, exec ? 0755 : 0644);
  }
  if (snapshot) write_file(staged.root() / *m.snapshot, *snapshot, 0644);
  for (const auto& e : fs::recursive_directory_iterator(staged.root())) {
    if (e.is_directory()) chmod(e.path().c_str(), 0755);
  }
  return staged;
}

StagedAgent stage_agent(const AgentBundle& bundle, const BlobStore& blobs,
                        const fs::path& work_root) {
  auto fetch = [&blobs](const std::string& key) {
    try {
      return blobs.get(key);
    } catch (const Error& e) {
      throw Error(ErrorCode::kFetchFailed, "cannot fetch '" + key + "': " + e.what());
    }
  };
  const std::string image = fetch(bundle.image_ref);
  std::optional<std::string> snapshot;
  if (bundle.snapshot_ref) snapshot = fetch(*bundle.snapshot_ref);
  return stage_agent_archive(image, snapshot, work_root);
}

AgentInstance::AgentInstance(const StagedAgent& agent, AgentOptions options)
    : agent_(&agent), options_(std::move(options)) {}

void AgentInstance::restart() {
  shutdown();
  proc_.emplace(agent_->launch(options_));
}

void AgentInstance::shutdown() {
  if (proc_) proc_->kill();
  proc_.reset();
}

void AgentInstance::kill() {
  if (proc_) proc_->kill();
}

bool AgentInstance::alive() { return proc_ && proc_->running(); }

json AgentInstance::exchange(const json& frame) {
  if (!proc_) proc_.emplace(agent_->launch(options_));
  auto fail = [this](ErrorCode code, const std::string& message) -> Error {
    std::string err;
    if (proc_) {
      proc_->kill();
      err = tail(proc_->stderr_text(64 << 10), 16384);
      proc_.reset();
    }
    return Error(code, message, {{"stderr", err}});
  };

  if (!proc_->write(frame.dump() + "\n", options_.step_deadline)) {
    if (proc_->running()) throw fail(ErrorCode::kAgentTimeout, "agent stopped reading input");
    throw fail(ErrorCode::kAgentCrashed, "agent exited");
  }
  std::string line;
  switch (proc_->read_line(line, options_.step_deadline, options_.max_frame_bytes)) {
    case Process::ReadStatus::kLine:
      break;
    case Process::ReadStatus::kTimeout:
      throw fail(ErrorCode::kAgentTimeout, "agent missed the step deadline");
    case Process::ReadStatus::kEof:
      throw fail(ErrorCode::kAgentCrashed, "agent exited");
    case Process::ReadStatus::kTooLong:
      throw fail(ErrorCode::kProtocolViolation,
                 "agent frame exceeds " + std::to_string(options_.max_frame_bytes) + " bytes");
  }
  json reply = json::parse(line, nullptr, false);
  if (reply.is_discarded() || !reply.is_object()) {
    throw fail(ErrorCode::kProtocolViolation, "agent frame is not a JSON object");
  }
  return reply;
}

json to_json(const EpisodeResult& r) {
  return {{"episode_id", r.episode_id},   {"steps_taken", r.steps_taken},
          {"truncated", r.truncated},     {"outcome", r.terminal_outcome},
          {"metrics", r.metrics},         {"answer", r.answer},
          {"transcript", r.transcript}};
}

namespace {

class EnvironmentProcess {
 public:
  EnvironmentProcess(const EnvironmentRuntime& env, const std::string& episode_id) {
    SandboxPolicy policy;
    policy.isolation = env.isolation;
    policy.limits = env.limits;
    policy.mounts = env.mounts;
    policy.mounts.push_back({env.entrypoint.parent_path(), {}, false});
    if (env.assets_dir != env.entrypoint.parent_path()) {
      policy.mounts.push_back({env.assets_dir, {}, false});
    }
    policy.working_dir = env.assets_dir;
    proc_.emplace(Process::spawn(
        {env.entrypoint.string(), env.assets_dir.string(), episode_id}, policy));
  }

  json read() {
    std::string line;
    switch (proc_->read_line(line, kEnvironmentDeadline, kEnvironmentFrameLimit)) {
      case Process::ReadStatus::kLine:
        break;
      case Process::ReadStatus::kTimeout:
        throw fail(ErrorCode::kEvaluatorTimeout, "environment did not answer in time");
      case Process::ReadStatus::kEof:
        throw fail(ErrorCode::kEvaluatorCrashed, "environment exited mid-episode");
      case Process::ReadStatus::kTooLong:
        throw fail(ErrorCode::kProtocolError, "environment frame too large");
    }
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw fail(ErrorCode::kProtocolError, "environment frame is not a JSON object");
    }
    return j;
  }

  void send(const json& frame) {
    if (!proc_->write(frame.dump() + "\n", kEnvironmentDeadline)) {
      throw fail(ErrorCode::kEvaluatorCrashed, "environment stopped reading input");
    }
  }

  void finish() { proc_->kill(); }

 private:
  Error fail(ErrorCode code, const std::string& message) {
    proc_->kill();
    return Error(code, message, {{"stderr", tail(proc_->stderr_text(64 << 10), 16384)}});
  }

  std::optional<Process> proc_;
};

}  // namespace

EpisodeResult run_episode(const StagedAgent& agent, const EnvironmentRuntime& env,
                          const std::string& episode_id, const AgentOptions& options,
                          std::stop_token stop) {
  const auto& spec = env.spec;
  if (spec.max_steps_per_episode < 1 || spec.action_vocabulary.empty()) {
    throw Error(ErrorCode::kBadRequest, "environment needs max steps and an action vocabulary");
  }
  EnvironmentProcess environment(env, episode_id);
  json frame = environment.read();
  if (!frame.contains("observation")) {
    throw Error(ErrorCode::kProtocolError, "environment must start with an observation");
  }

  EpisodeResult result;
  result.episode_id = episode_id;
  AgentInstance instance(agent, options);
  json observation = frame["observation"];
  std::optional<json> terminal;

  for (std::int64_t step = 1; step <= spec.max_steps_per_episode; ++step) {
    if (stop.stop_requested()) throw Cancelled{};
    json reply = instance.exchange({{"episode", episode_id}, {"step", step},
                                    {"observation", observation}});
    auto action = reply.find("action");
    if (action == reply.end() || !action->is_string()) {
      instance.shutdown();
      throw Error(ErrorCode::kProtocolViolation, "agent frame has no action",
                  {{"episode", episode_id}, {"step", step}});
    }
    const std::string name = action->get<std::string>();
    const auto& vocab = spec.action_vocabulary;
    if (name != kTerminalAction && std::find(vocab.begin(), vocab.end(), name) == vocab.end()) {
      instance.shutdown();
      throw Error(ErrorCode::kProtocolViolation, "action '" + name + "' is not in the vocabulary",
                  {{"episode", episode_id}, {"step", step}, {"action", name},
                   {"vocabulary", vocab}});
    }
    const json answer = reply.value("answer", json());
    result.transcript.push_back({{"step", step}, {"action", name}, {"answer", answer}});
    result.steps_taken = step;
    if (!answer.is_null()) result.answer = answer;

    environment.send({{"action", name}, {"answer", answer}});
    json next = environment.read();
    if (next.value("done", false)) {
      terminal = std::move(next);
      break;
    }
    if (name == kTerminalAction) {
      throw Error(ErrorCode::kProtocolError, "environment did not end the episode on stop");
    }
    observation = next.value("observation", json());
  }
  instance.shutdown();

  if (!terminal) {
    result.truncated = true;
    environment.send({{"end", true}});
    json last = environment.read();
    if (!last.value("done", false)) {
      throw Error(ErrorCode::kProtocolError, "environment did not end a truncated episode");
    }
    terminal = std::move(last);
  }
  environment.finish();

  result.terminal_outcome = terminal->value("outcome", json());
  if (auto metrics = terminal->find("metrics"); metrics != terminal->end()) {
    if (!metrics->is_object()) throw Error(ErrorCode::kProtocolError, "episode metrics must be an object");
    for (const auto& [k, v] : metrics->items()) {
      if (!v.is_number()) throw Error(ErrorCode::kProtocolError, "episode metric '" + k + "' is not a number");
      result.metrics[k] = v.get<double>();
    }
  }
  return result;
}

MetricResult score_agent(std::span<const EpisodeResult> results, const EnvironmentSpec& env,
                         EvaluatorCall call, std::stop_token stop) {
  if (results.size() != env.episodes.size()) {
    throw Error(ErrorCode::kBadRequest, "expected one result per episode");
  }
  json doc = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].episode_id != env.episodes[i]) {
      throw Error(ErrorCode::kBadRequest, "episode results out of order at " + std::to_string(i));
    }
    json r = to_json(results[i]);
    r.erase("transcript");  // host-only record, not evaluator input
    doc.push_back(std::move(r));
  }
  const fs::path dir = make_private_dir(fs::temp_directory_path(), "gauntlet-episodes-");
  struct Guard {
    fs::path dir;
    ~Guard() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } guard{dir};
  const fs::path file = dir / "episodes.json";
  write_file(file, doc.dump(), 0644);
  call.submission = file;
  call.chunk = {0, 0, static_cast<std::int64_t>(results.size())};
  return run_evaluator(call, stop).result;
}

}  // namespace gauntlet
