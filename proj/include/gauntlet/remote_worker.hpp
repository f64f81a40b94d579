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

// Host-side worker for remote-evaluation challenges. It leases work over
// the REST API, downloads the artifact, evaluates it with the organizer's
// own evaluator and annotations, and reports metrics back. Annotations
// never leave the host's machine.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stop_token>

#include "gauntlet/client.hpp"
#include "gauntlet/evaluator.hpp"
#include "gauntlet/sandbox.hpp"

namespace gauntlet {

struct RemoteWorkerOptions {
  std::filesystem::path evaluator;
  // A file used for every split, or a directory holding one entry named
  // after each split codename.
  std::filesystem::path annotations;
  std::filesystem::path work_root;  // defaults to a temp directory
  std::int64_t parallelism = 4;
  Isolation isolation = Isolation::kBestEffort;
  std::size_t output_limit = kDefaultOutputLimit;
  Duration wall_timeout = std::chrono::seconds(1200);
  Duration poll_interval = std::chrono::seconds(2);
  Duration heartbeat_interval = std::chrono::seconds(30);
  Duration max_backoff = std::chrono::seconds(60);
  std::optional<std::int64_t> max_submissions;
};

struct RemoteWorkerStats {
  std::int64_t processed = 0;
  std::int64_t finished = 0;
  std::int64_t failed = 0;
  std::int64_t lost = 0;  // reports refused because the lease had lapsed
  std::int64_t transport_errors = 0;
};

class RemoteWorker {
 public:
  RemoteWorker(ApiClient client, RemoteWorkerOptions options);

  // Leases and processes at most one submission. False when nothing was
  // queued. Throws TransportError.
  bool run_once(std::stop_token stop = {});
  // Polls until stopped or max_submissions are processed. Transport errors
  // back off exponentially up to max_backoff.
  RemoteWorkerStats run(std::stop_token stop = {});

  const RemoteWorkerStats& stats() const { return stats_; }
  std::filesystem::path annotations_for(const std::string& split) const;

 private:
  ApiClient client_;
  RemoteWorkerOptions options_;
  RemoteWorkerStats stats_;
};

}  // namespace gauntlet
