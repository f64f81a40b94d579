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

// Organizer evaluator protocol, dataset chunking and metric merging.
//
// An evaluator is any executable. It is invoked as
//
//   <entrypoint> <annotations_path> <submission_path> <phase_codename>
//                <split_codename> <chunk_start> <chunk_end>
//
// and must print exactly one JSON object to stdout,
//
//   {"result": {"<metric>": <number>, ...}, "item_count": <integer>}
//
// optionally with an "extra" member, then exit 0. EVAL_OUTPUT_LIMIT_BYTES in
// its environment states the stdout cap.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gauntlet/sandbox.hpp"

namespace gauntlet {

inline constexpr std::size_t kDefaultOutputLimit = 1 << 20;

struct Chunk {
  std::int64_t index = 0;
  std::int64_t begin = 0;  // inclusive
  std::int64_t end = 0;    // exclusive

  std::int64_t size() const { return end - begin; }
  friend bool operator==(const Chunk&, const Chunk&) = default;
};

// min(parallelism, item_count) contiguous chunks covering [0, item_count)
// whose sizes differ by at most one, larger chunks first.
std::vector<Chunk> plan_chunks(std::int64_t item_count, std::int64_t parallelism);

struct MetricResult {
  std::map<std::string, double> metrics;
  std::int64_t item_count = 0;
  nlohmann::json extra;  // organizer-defined, carried through untouched
};

nlohmann::json to_json(const MetricResult& r);
MetricResult metric_result_from_json(const nlohmann::json& j);

// Throws Error{kSchemaMismatch} naming the first schema metric missing.
void check_schema(const MetricResult& r, std::span<const std::string> schema);

// Item-count-weighted mean of every metric present in all parts. Parts are
// combined in a canonical order, so the result does not depend on the order
// they are passed in. When a part's value is exactly the rounded quotient of
// an integer total by its item count (accuracy-style metrics), that integer
// is used, which makes merged count metrics bit-identical to evaluating the
// whole dataset at once. Throws Error{kSchemaMismatch} when a part lacks a
// schema metric, Error{kBadRequest} when parts is empty.
MetricResult merge_results(std::span<const MetricResult> parts,
                           std::span<const std::string> schema);

// Parses evaluator stdout. Throws Error{kProtocolError}.
MetricResult parse_evaluator_output(std::string_view out, std::int64_t expected_items);

struct Cancelled : std::exception {
  const char* what() const noexcept override { return "cancelled"; }
};

struct EvaluatorCall {
  std::filesystem::path entrypoint;
  std::filesystem::path annotations;  // "-" when the challenge has none
  std::filesystem::path submission;
  std::string phase_codename;
  std::string split_codename;
  Chunk chunk;
  std::size_t output_limit = kDefaultOutputLimit;
  Duration wall_timeout = std::chrono::seconds(1200);
  SandboxPolicy policy;  // mounts for entrypoint/annotations/submission are added
};

struct EvaluatorRun {
  MetricResult result;
  std::string stderr_text;
};

// Runs one evaluator invocation. Throws Error{kEvaluatorCrashed} (stderr in
// details["stderr"]), Error{kEvaluatorTimeout}, Error{kProtocolError}, or
// Cancelled when the stop token fires.
EvaluatorRun run_evaluator(const EvaluatorCall& call, std::stop_token stop = {});

}  // namespace gauntlet
