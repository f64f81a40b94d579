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

#include "gauntlet/remote_worker.hpp"

#include <stdlib.h>

#include <algorithm>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#include "gauntlet/error.hpp"
#include "gauntlet/worker.hpp"

namespace gauntlet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool sleep_for(Duration d, std::stop_token stop) {
  std::mutex m;
  std::condition_variable_any cv;
  std::unique_lock lock(m);
  return !cv.wait_for(lock, stop, d, [] { return false; }) && !stop.stop_requested();
}

}  // namespace

RemoteWorker::RemoteWorker(ApiClient client, RemoteWorkerOptions options)
    : client_(std::move(client)), options_(std::move(options)) {
  if (!fs::is_regular_file(options_.evaluator)) {
    throw Error(ErrorCode::kEntrypointInvalid,
                "evaluator '" + options_.evaluator.string() + "' is not a file");
  }
  if (!fs::exists(options_.annotations)) {
    throw Error(ErrorCode::kAssetUnavailable,
                "annotations '" + options_.annotations.string() + "' not found");
  }
  options_.evaluator = fs::absolute(options_.evaluator);
  options_.annotations = fs::absolute(options_.annotations);
  if (options_.work_root.empty()) {
    std::string t = (fs::temp_directory_path() / "gauntlet-remote-XXXXXX").string();
    if (!mkdtemp(t.data())) throw Error(ErrorCode::kInternal, "cannot create work directory");
    options_.work_root = t;
  }
  fs::create_directories(options_.work_root);
  fs::permissions(options_.work_root, fs::perms(0755));
}

fs::path RemoteWorker::annotations_for(const std::string& split) const {
  if (fs::is_directory(options_.annotations)) {
    const fs::path p = options_.annotations / split;
    if (fs::exists(p)) return p;
  }
  return options_.annotations;
}

bool RemoteWorker::run_once(std::stop_token stop) {
  auto lease = client_.post_optional("/remote/lease");
  if (!lease) return false;
  const json& l = *lease;
  const std::string lease_id = l.at("lease_id");
  const std::string submission_id = l.at("submission_id");
  const std::string phase = l.at("phase");

  const fs::path dir = options_.work_root / submission_id;
  fs::create_directories(dir);
  fs::permissions(dir, fs::perms(0755));
  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  } cleanup{dir};

  const fs::path artifact = dir / "submission";
  {
    const std::string bytes = client_.get_bytes(l.at("artifact").at("url").get<std::string>());
    std::ofstream out(artifact, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  fs::permissions(artifact, fs::perms(0644));

  EvalSettings settings;
  settings.entrypoint = options_.evaluator;
  settings.chunkable = l.value("chunkable", false);
  settings.parallelism = options_.parallelism;
  settings.policy.isolation = options_.isolation;
  settings.output_limit = options_.output_limit;
  settings.wall_timeout = options_.wall_timeout;

  json report{{"lease_id", lease_id}};
  std::string log;
  try {
    json results = json::object();
    for (const auto& split : l.at("splits")) {
      SplitTask task;
      task.split_codename = split.at("split");
      task.annotations = annotations_for(task.split_codename);
      task.item_count = split.at("item_count");
      task.schema = split.at("schema").get<std::vector<std::string>>();
      MetricResult r = evaluate_split(settings, artifact, phase, task, stop, &log);
      results[task.split_codename] = r.metrics;
    }
    report["results"] = results;
  } catch (const Cancelled&) {
    return true;  // the lease lapses and the message is redelivered
  } catch (const Error& e) {
    std::string text = std::string(code_name(e.code())) + ": " + e.what();
    if (e.details().contains("stderr")) text += "\n" + e.details()["stderr"].get<std::string>();
    if (!log.empty()) text += "\n" + log;
    report["failure"] = {{"code", code_name(e.code())}, {"log", text}};
  }

  ++stats_.processed;
  try {
    client_.post("/remote/results", report);
    if (report.contains("results")) {
      ++stats_.finished;
    } else {
      ++stats_.failed;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kLeaseExpired && e.code() != ErrorCode::kLeaseNotHeld) throw;
    ++stats_.lost;
  }
  return true;
}

RemoteWorkerStats RemoteWorker::run(std::stop_token stop) {
  std::stop_source beat_stop;
  std::jthread heartbeat([this, token = beat_stop.get_token()] {
    while (!token.stop_requested()) {
      try {
        client_.post("/remote/heartbeat");
      } catch (const std::exception&) {
      }
      if (!sleep_for(options_.heartbeat_interval, token)) break;
    }
  });
  struct StopBeat {
    std::stop_source& s;
    ~StopBeat() { s.request_stop(); }
  } stop_beat{beat_stop};
  // first heartbeat goes out before the first lease
  try {
    client_.post("/remote/heartbeat");
  } catch (const std::exception&) {
  }

  Duration backoff = options_.poll_interval;
  while (!stop.stop_requested()) {
    if (options_.max_submissions && stats_.processed >= *options_.max_submissions) break;
    bool worked = false;
    try {
      worked = run_once(stop);
      backoff = options_.poll_interval;
    } catch (const TransportError&) {
      ++stats_.transport_errors;
      if (!sleep_for(backoff, stop)) break;
      backoff = std::min(backoff * 2, options_.max_backoff);
      continue;
    } catch (const Error& e) {
      // A revoked token ends the loop; anything else is one bad round trip.
      if (e.code() == ErrorCode::kUnauthorized) throw;
      ++stats_.transport_errors;
      if (!sleep_for(backoff, stop)) break;
      backoff = std::min(backoff * 2, options_.max_backoff);
      continue;
    }
    if (!worked && !sleep_for(options_.poll_interval, stop)) break;
  }
  return stats_;
}

}  // namespace gauntlet
