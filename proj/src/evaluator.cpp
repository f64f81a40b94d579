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

#include "gauntlet/evaluator.hpp"

#include <signal.h>
#include <stdlib.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gauntlet/error.hpp"

namespace gauntlet {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<Chunk> plan_chunks(std::int64_t item_count, std::int64_t parallelism) {
  if (item_count < 0) throw Error(ErrorCode::kBadRequest, "item_count must be non-negative");
  if (parallelism < 1) throw Error(ErrorCode::kBadRequest, "parallelism must be at least 1");
  std::vector<Chunk> chunks;
  if (item_count == 0) return chunks;
  const std::int64_t k = std::min(parallelism, item_count);
  const std::int64_t base = item_count / k;
  const std::int64_t larger = item_count % k;
  std::int64_t at = 0;
  for (std::int64_t i = 0; i < k; ++i) {
    const std::int64_t size = base + (i < larger ? 1 : 0);
    chunks.push_back({i, at, at + size});
    at += size;
  }
  return chunks;
}

json to_json(const MetricResult& r) {
  json j{{"result", r.metrics}, {"item_count", r.item_count}};
  if (!r.extra.is_null()) j["extra"] = r.extra;
  return j;
}

MetricResult metric_result_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kProtocolError, "metric result must be an object");
  auto res = j.find("result");
  if (res == j.end() || !res->is_object()) {
    throw Error(ErrorCode::kProtocolError, "metric result needs a \"result\" object");
  }
  MetricResult r;
  for (const auto& [name, value] : res->items()) {
    if (!value.is_number()) {
      throw Error(ErrorCode::kProtocolError, "metric '" + name + "' is not a number");
    }
    const double v = value.get<double>();
    if (!std::isfinite(v)) throw Error(ErrorCode::kProtocolError, "metric '" + name + "' is not finite");
    r.metrics[name] = v;
  }
  auto count = j.find("item_count");
  if (count == j.end() || !count->is_number_integer() || count->get<std::int64_t>() < 0) {
    throw Error(ErrorCode::kProtocolError, "\"item_count\" must be a non-negative integer");
  }
  r.item_count = count->get<std::int64_t>();
  if (auto extra = j.find("extra"); extra != j.end()) r.extra = *extra;
  return r;
}

void check_schema(const MetricResult& r, std::span<const std::string> schema) {
  for (const auto& m : schema) {
    if (!r.metrics.contains(m)) {
      throw Error(ErrorCode::kSchemaMismatch, "result is missing schema metric '" + m + "'",
                  {{"metric", m}});
    }
  }
}

namespace {

constexpr long double kExactLimit = 9007199254740992.0L;  // 2^53

// Value is exactly c / n for an integer c, as double division would give it.
bool integral_total(double value, std::int64_t n, long long& total) {
  const long double product = static_cast<long double>(value) * static_cast<long double>(n);
  const long double rounded = std::nearbyint(product);
  if (std::fabs(rounded) >= kExactLimit) return false;
  if (static_cast<double>(rounded) / static_cast<double>(n) != value) return false;
  total = static_cast<long long>(rounded);
  return true;
}

bool canonical_less(const MetricResult* a, const MetricResult* b) {
  if (a->item_count != b->item_count) return a->item_count < b->item_count;
  if (a->metrics != b->metrics) return a->metrics < b->metrics;
  return a->extra.dump() < b->extra.dump();
}

}  // namespace

MetricResult merge_results(std::span<const MetricResult> parts,
                           std::span<const std::string> schema) {
  if (parts.empty()) throw Error(ErrorCode::kBadRequest, "nothing to merge");
  for (const auto& p : parts) check_schema(p, schema);
  if (parts.size() == 1) return parts.front();

  std::vector<const MetricResult*> order;
  for (const auto& p : parts) order.push_back(&p);
  std::sort(order.begin(), order.end(), canonical_less);

  MetricResult merged;
  for (const auto* p : order) merged.item_count += p->item_count;

  for (const auto& [name, first_value] : order.front()->metrics) {
    const bool in_all = std::all_of(order.begin(), order.end(), [&name](const MetricResult* p) {
      return p->metrics.contains(name);
    });
    if (!in_all) continue;
    if (merged.item_count == 0) {
      merged.metrics[name] = first_value;
      continue;
    }
    long long exact = 0;
    long double approximate = 0.0L;
    bool all_exact = true;
    for (const auto* p : order) {
      if (p->item_count == 0) continue;
      const double v = p->metrics.at(name);
      long long total = 0;
      if (integral_total(v, p->item_count, total)) {
        exact += total;
      } else {
        all_exact = false;
        approximate += static_cast<long double>(v) * static_cast<long double>(p->item_count);
      }
    }
    if (all_exact) {
      merged.metrics[name] = static_cast<double>(exact) / static_cast<double>(merged.item_count);
    } else {
      merged.metrics[name] = static_cast<double>(
          (approximate + static_cast<long double>(exact)) /
          static_cast<long double>(merged.item_count));
    }
  }

  json extras = json::array();
  for (const auto* p : order) {
    if (!p->extra.is_null()) extras.push_back(p->extra);
  }
  if (!extras.empty()) merged.extra = std::move(extras);
  return merged;
}

MetricResult parse_evaluator_output(std::string_view out, std::int64_t expected_items) {
  json j = json::parse(out, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::kProtocolError, "evaluator output is not a single JSON object",
                {{"stdout", std::string(out.substr(0, 4096))}});
  }
  MetricResult r = metric_result_from_json(j);
  if (r.item_count != expected_items) {
    throw Error(ErrorCode::kProtocolError,
                "evaluator reported item_count " + std::to_string(r.item_count) + ", expected " +
                    std::to_string(expected_items));
  }
  return r;
}

namespace {

bool covered(const std::vector<Mount>& mounts, const fs::path& p) {
  for (const auto& m : mounts) {
    const auto rel = p.lexically_relative(m.host);
    if (!rel.empty() && *rel.begin() != "..") return true;
  }
  return false;
}

std::string tail(std::string s, std::size_t n) {
  return s.size() <= n ? s : s.substr(s.size() - n);
}

}  // namespace

EvaluatorRun run_evaluator(const EvaluatorCall& call, std::stop_token stop) {
  if (stop.stop_requested()) throw Cancelled{};
  SandboxPolicy policy = call.policy;
  for (const fs::path& p : {call.entrypoint.parent_path(), call.annotations, call.submission}) {
    if (p.empty() || p == "-") continue;
    if (!fs::exists(p)) {
      throw Error(ErrorCode::kAssetUnavailable, "evaluator input missing: " + p.string());
    }
    if (!covered(policy.mounts, p)) policy.mounts.push_back({p, {}, false});
  }

  std::string scratch_template = (fs::temp_directory_path() / "gauntlet-eval-XXXXXX").string();
  if (!mkdtemp(scratch_template.data())) {
    throw Error(ErrorCode::kInternal, "cannot create evaluator scratch directory");
  }
  const fs::path scratch = scratch_template;
  struct ScratchGuard {
    fs::path dir;
    ~ScratchGuard() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } guard{scratch};
  policy.mounts.push_back({scratch, {}, true});
  policy.working_dir = scratch;
  policy.env["EVAL_OUTPUT_LIMIT_BYTES"] = std::to_string(call.output_limit);

  const std::vector<std::string> argv{call.entrypoint.string(),
                                      call.annotations.string(),
                                      call.submission.string(),
                                      call.phase_codename,
                                      call.split_codename,
                                      std::to_string(call.chunk.begin),
                                      std::to_string(call.chunk.end)};
  auto proc = Process::spawn(argv, policy);
  auto done = proc.wait(call.wall_timeout, call.output_limit, 64 << 10, stop);
  if (done.cancelled) throw Cancelled{};
  if (done.timed_out || done.term_signal == SIGXCPU) {
    throw Error(ErrorCode::kEvaluatorTimeout, "evaluator exceeded its time limit",
                {{"stderr", tail(done.err, 4096)}});
  }
  if (done.exit_code != 0) {
    const std::string why = done.term_signal != 0
                                ? "evaluator killed by signal " + std::to_string(done.term_signal)
                                : "evaluator exited with status " + std::to_string(done.exit_code);
    throw Error(ErrorCode::kEvaluatorCrashed, why, {{"stderr", tail(done.err, 16384)}});
  }
  if (done.output_truncated) {
    throw Error(ErrorCode::kProtocolError, "evaluator output exceeds " +
                                               std::to_string(call.output_limit) + " bytes");
  }
  return {parse_evaluator_output(done.out, call.chunk.size()), std::move(done.err)};
}

}  // namespace gauntlet
