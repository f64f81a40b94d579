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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Thresholds are fixed below and are not tuned per run.

#include <algorithm>
#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <sys/stat.h>

#include <httplib.h>

#include "gauntlet/agent.hpp"
#include "gauntlet/client.hpp"
#include "gauntlet/error.hpp"
#include "gauntlet/evaluator.hpp"
#include "gauntlet/http_api.hpp"
#include "gauntlet/platform.hpp"
#include "gauntlet/remote_worker.hpp"
#include "gauntlet/worker.hpp"
#include "support.hpp"

namespace gauntlet {
namespace {

namespace fs = std::filesystem;
using namespace std::chrono_literals;
using nlohmann::json;
using testing::ChallengeDef;

// ---- pinned thresholds
constexpr int kEquivalenceDatasets = 50;
constexpr int kEquivalenceMaxItems = 1000;
constexpr double kEquivalenceBudgetSeconds = 60.0;
constexpr int kSpeedupItems = 1000;
constexpr double kSpeedupMaxRatio = 0.4;
constexpr double kSpeedupBudgetSeconds = 30.0;
constexpr int kWarmSubmissions = 10;
constexpr int kRoutingSubmissions = 500;
constexpr int kRoutingChallenges = 20;
constexpr int kDeliverySubmissions = 100;
constexpr double kExpiryRate = 0.2;
constexpr double kDuplicateRate = 0.3;
constexpr int kHitlRounds = 10;
constexpr int kHitlDisconnects = 3;
constexpr std::int64_t kAgentMaxSteps = 8;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Steady = std::chrono::steady_clock;

double seconds_since(Steady::time_point t) {
  return std::chrono::duration<double>(Steady::now() - t).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(precision) << v;
  return ss.str();
}

// Independent accuracy oracle: exact count over n.
double oracle_accuracy(const std::vector<int>& labels, const std::vector<int>& preds) {
  std::int64_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += labels[i] == preds[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

Principal team_principal(Platform& p, const std::string& name) {
  return p.authenticate(p.create_team(name).second);
}

bool wait_until(const std::function<bool()>& done, Duration limit) {
  const auto deadline = Steady::now() + limit;
  while (!done()) {
    if (Steady::now() > deadline) return false;
    std::this_thread::sleep_for(20ms);
  }
  return true;
}

// ---- 1. chunked/serial equivalence

Outcome chunked_equivalence() {
  testing::TempDir dir{"acc-equiv-"};
  const auto started = Steady::now();
  std::mt19937_64 rng(20260101);
  EvalSettings serial;
  serial.entrypoint = testing::install_fixture(dir / "eval", "accuracy");
  serial.chunkable = false;
  int identical = 0, oracle_match = 0;
  std::string first_mismatch;
  for (int d = 0; d < kEquivalenceDatasets; ++d) {
    const auto n = static_cast<std::size_t>(1 + rng() % kEquivalenceMaxItems);
    const int classes = 2 + static_cast<int>(rng() % 9);
    const auto labels = testing::random_labels(n, rng(), classes);
    auto preds = testing::random_labels(n, rng(), classes);
    // Vary the hit rate: copy a random fraction of labels.
    const double keep = static_cast<double>(rng() % 1000) / 1000.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<double>(rng() % 1000) / 1000.0 < keep) preds[i] = labels[i];
    }
    const fs::path ann = dir / ("ann-" + std::to_string(d) + ".json");
    const fs::path sub = dir / ("sub-" + std::to_string(d) + ".json");
    testing::write_file(ann, json(labels).dump());
    testing::write_file(sub, json(preds).dump());
    SplitTask task{"test", ann, static_cast<std::int64_t>(n), {"accuracy", "error_rate"}};

    const MetricResult whole = evaluate_split(serial, sub, "dev", task);
    EvalSettings chunked = serial;
    chunked.chunkable = true;
    chunked.parallelism = 2 + static_cast<std::int64_t>(rng() % 15);
    const MetricResult merged = evaluate_split(chunked, sub, "dev", task);
    if (merged.metrics == whole.metrics && merged.item_count == whole.item_count) {
      ++identical;
    } else if (first_mismatch.empty()) {
      first_mismatch = "dataset " + std::to_string(d) + " n=" + std::to_string(n);
    }
    if (whole.metrics.at("accuracy") == oracle_accuracy(labels, preds)) ++oracle_match;
  }
  const double took = seconds_since(started);
  Outcome o;
  o.pass = identical == kEquivalenceDatasets && oracle_match == kEquivalenceDatasets &&
           took < kEquivalenceBudgetSeconds;
  o.detail = std::to_string(identical) + "/" + std::to_string(kEquivalenceDatasets) +
             " merged == serial, " + std::to_string(oracle_match) + "/" +
             std::to_string(kEquivalenceDatasets) + " serial == oracle, " + fmt(took, 1) +
             " s (budget " + fmt(kEquivalenceBudgetSeconds, 0) + " s)";
  if (!first_mismatch.empty()) o.detail += "; first mismatch " + first_mismatch;
  return o;
}

// ---- 2. speedup

Outcome speedup() {
  testing::TempDir dir{"acc-speed-"};
  const auto started = Steady::now();
  EvalSettings s;
  s.entrypoint = testing::install_fixture(dir / "eval", "sleep 1");
  s.chunkable = true;
  const fs::path ann = dir / "ann.json";
  const fs::path sub = dir / "sub.json";
  testing::write_file(ann, "[]");
  testing::write_file(sub, "[]");
  SplitTask task{"test", ann, kSpeedupItems, {"accuracy", "error_rate"}};
  auto timed = [&](std::int64_t parallelism) {
    s.parallelism = parallelism;
    std::vector<double> runs;
    for (int i = 0; i < 3; ++i) {
      const auto t = Steady::now();
      evaluate_split(s, sub, "dev", task);
      runs.push_back(seconds_since(t));
    }
    std::sort(runs.begin(), runs.end());
    return runs[1];  // median of three
  };
  const double one = timed(1);
  const double four = timed(4);
  const double ratio = four / one;
  const double took = seconds_since(started);
  return {ratio <= kSpeedupMaxRatio && took < kSpeedupBudgetSeconds,
          "p=1 " + fmt(one) + " s, p=4 " + fmt(four) + " s, ratio " + fmt(ratio) + " (max " +
              fmt(kSpeedupMaxRatio, 2) + "), " + std::to_string(std::thread::hardware_concurrency()) +
              " cpu(s), " + fmt(took, 1) + " s total"};
}

// ---- 3. warm start

Outcome warm_start() {
  testing::TempDir dir{"acc-warm-"};
  SystemClock clock;
  PlatformOptions o;
  o.data_dir = dir / "data";
  o.start_local_workers = false;
  o.hitl_sweep_interval = Duration::zero();
  Platform platform(clock, o);
  const auto host = team_principal(platform, "host");
  const auto team = team_principal(platform, "team");
  ChallengeDef def;
  def.splits = {{"a", 20}, {"b", 20}};
  platform.create_challenge(testing::make_bundle(def, {}), host);
  WorkerOptions wo;
  wo.worker_id = "warm-worker";
  wo.work_root = dir / "work";
  wo.parallelism = 2;
  Worker worker(platform.challenge("demo"), platform.blobs(), platform.broker(), platform, wo);
  const WorkerState& state = worker.warmup();

  // Second, independent view: staged files are never rewritten.
  std::map<fs::path, std::pair<ino_t, std::int64_t>> before;
  for (const auto& e : fs::recursive_directory_iterator(state.stage_dir)) {
    if (!e.is_regular_file()) continue;
    struct stat st {};
    ::stat(e.path().c_str(), &st);
    before[e.path()] = {st.st_ino, st.st_mtim.tv_sec * 1'000'000'000LL + st.st_mtim.tv_nsec};
  }

  int finished = 0;
  for (int i = 0; i < kWarmSubmissions; ++i) {
    const auto id = platform
                        .create_submission("demo", "dev", team, SubmissionKind::kPredictions,
                                           testing::predictions({{"a", testing::random_labels(20, i)},
                                                                 {"b", testing::random_labels(20, i + 99)}}))
                        .id;
    if (worker.run_once() == RunOutcome::kFinished &&
        platform.submission(id).status == SubmissionStatus::kFinished) {
      ++finished;
    }
  }
  bool all_once = !state.warmup_load_count.empty();
  std::int64_t max_count = 0;
  for (const auto& [ref, count] : state.warmup_load_count) {
    all_once = all_once && count == 1;
    max_count = std::max(max_count, count);
  }
  std::size_t rewritten = 0;
  for (const auto& [p, id] : before) {
    struct stat st {};
    if (::stat(p.c_str(), &st) != 0 ||
        std::pair<ino_t, std::int64_t>(st.st_ino, st.st_mtim.tv_sec * 1000000000LL + st.st_mtim.tv_nsec) != id) {
      ++rewritten;
    }
  }
  return {all_once && rewritten == 0 && finished == kWarmSubmissions,
          std::to_string(finished) + "/" + std::to_string(kWarmSubmissions) + " finished, " +
              std::to_string(state.warmup_load_count.size()) + " assets, max stage count " +
              std::to_string(max_count) + ", " + std::to_string(rewritten) + "/" +
              std::to_string(before.size()) + " staged files rewritten"};
}

// ---- 4. routing isolation

// Records which worker began which submission.
class RecordingGateway : public SubmissionGateway {
 public:
  explicit RecordingGateway(Platform& p) : p_(p) {}
  std::optional<EvaluationJob> begin_evaluation(const std::string& id,
                                                const std::string& worker) override {
    {
      std::lock_guard lock(mu_);
      seen_.emplace_back(worker, id);
    }
    return p_.begin_evaluation(id, worker);
  }
  void complete(const std::string& id, const std::vector<SplitResult>& r) override {
    p_.complete(id, r);
  }
  void fail(const std::string& id, const std::string& log) override { p_.fail(id, log); }
  void append_log(const std::string& id, const std::string& t) override { p_.append_log(id, t); }
  void start_hitl(const std::string& id) override { p_.start_hitl(id); }
  std::vector<std::pair<std::string, std::string>> seen() {
    std::lock_guard lock(mu_);
    return seen_;
  }

 private:
  Platform& p_;
  std::mutex mu_;
  std::vector<std::pair<std::string, std::string>> seen_;
};

Outcome routing_isolation() {
  testing::TempDir dir{"acc-route-"};
  SystemClock clock;
  PlatformOptions o;
  o.data_dir = dir / "data";
  o.start_local_workers = false;
  o.hitl_sweep_interval = Duration::zero();
  Platform platform(clock, o);
  const auto host = team_principal(platform, "host");
  std::vector<Principal> teams;
  for (int t = 0; t < 5; ++t) teams.push_back(team_principal(platform, "team" + std::to_string(t)));
  std::vector<std::string> challenges;
  for (int c = 0; c < kRoutingChallenges; ++c) {
    ChallengeDef def;
    def.id = "route-" + std::to_string(c);
    def.splits = {{"test", 2}};
    platform.create_challenge(testing::make_bundle(def, {}), host);
    challenges.push_back(def.id);
  }
  std::mt19937 rng(77);
  std::map<std::string, std::string> owner;  // submission -> challenge
  for (int i = 0; i < kRoutingSubmissions; ++i) {
    const auto& c = challenges[rng() % challenges.size()];
    const auto id = platform
                        .create_submission(c, "dev", teams[rng() % teams.size()],
                                           SubmissionKind::kPredictions,
                                           testing::predictions({{"test", {0, 1}}}))
                        .id;
    owner[id] = c;
  }
  RecordingGateway gateway(platform);
  std::vector<std::unique_ptr<Worker>> workers;
  for (const auto& c : challenges) {
    WorkerOptions wo;
    wo.worker_id = c;  // worker id names its pool
    wo.work_root = dir / ("work-" + c);
    wo.parallelism = 1;
    workers.push_back(std::make_unique<Worker>(platform.challenge(c), platform.blobs(),
                                               platform.broker(), gateway, wo));
  }
  // Random interleaving of pools until every pool reports idle in a row.
  std::vector<bool> idle(workers.size(), false);
  while (std::count(idle.begin(), idle.end(), false) > 0) {
    const auto w = rng() % workers.size();
    idle[w] = workers[w]->run_once() == RunOutcome::kIdle;
  }
  std::size_t cross = 0;
  std::set<std::string> consumed;
  for (const auto& [worker, id] : gateway.seen()) {
    if (owner.at(id) != worker) ++cross;
    consumed.insert(id);
  }
  std::size_t finished = 0;
  for (const auto& [id, c] : owner) {
    finished += platform.submission(id).status == SubmissionStatus::kFinished ? 1 : 0;
  }
  return {cross == 0 && consumed.size() == owner.size() && finished == owner.size(),
          std::to_string(owner.size()) + " submissions over " + std::to_string(challenges.size()) +
              " challenges, " + std::to_string(consumed.size()) + " consumed, " +
              std::to_string(finished) + " finished, " + std::to_string(cross) +
              " cross-deliveries"};
}

// ---- 5. at-least-once delivery, exactly-once board

Outcome delivery_semantics() {
  testing::TempDir dir{"acc-deliver-"};
  ManualClock clock;
  PlatformOptions o;
  o.data_dir = dir / "data";
  o.start_local_workers = false;
  o.hitl_sweep_interval = Duration::zero();
  // A lease can lapse several times in a row at this injection rate; the
  // attempt budget is raised so lapses alone never exhaust it.
  o.broker.max_attempts = 10;
  Platform platform(clock, o);
  const auto host = team_principal(platform, "host");
  const auto team = team_principal(platform, "team");
  ChallengeDef def;
  def.remote = true;
  def.splits = {{"x", 5}, {"y", 5}};
  platform.create_challenge(testing::make_bundle(def, {}), host);
  std::vector<Principal> workers;
  for (int w = 0; w < 3; ++w) {
    workers.push_back(platform.authenticate(platform.register_remote_worker("demo", host).token));
  }
  std::vector<std::string> ids;
  for (int i = 0; i < kDeliverySubmissions; ++i) {
    ids.push_back(platform
                      .create_submission("demo", "dev", team, SubmissionKind::kPredictions, "{}")
                      .id);
  }
  std::mt19937 rng(4242);
  std::uniform_real_distribution<double> u(0, 1);
  const json results{{"results",
                      {{"x", {{"accuracy", 0.5}, {"error_rate", 0.5}}},
                       {"y", {{"accuracy", 0.25}, {"error_rate", 0.75}}}}}};
  int leases = 0, expired = 0, duplicates = 0, late_refused = 0, late_accepted = 0;
  std::vector<std::pair<Principal, std::string>> lapsed;
  for (int round = 0; round < 10000; ++round) {
    std::vector<std::pair<Principal, json>> held;
    for (const auto& w : workers) {
      platform.heartbeat(w);
      for (int k = 0; k < 4; ++k) {
        auto l = platform.lease_remote(w);
        if (!l) break;
        ++leases;
        held.emplace_back(w, *l);
      }
    }
    if (held.empty() && lapsed.empty()) break;
    for (auto& [w, l] : held) {
      const std::string lease_id = l["lease_id"];
      if (u(rng) < kExpiryRate) {
        ++expired;
        lapsed.emplace_back(w, lease_id);
        continue;
      }
      platform.report_remote(w, lease_id, results);
      if (u(rng) < kDuplicateRate) {
        ++duplicates;
        if (platform.report_remote(w, lease_id, results)["status"] != "duplicate") return {false, "duplicate report not recognised"};
      }
    }
    // Let the lapsed leases run out, then have their holders report late.
    clock.advance(o.remote_visibility + 1s);
    for (const auto& [w, lease_id] : lapsed) {
      platform.heartbeat(w);
      try {
        platform.report_remote(w, lease_id, results);
        ++late_accepted;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kLeaseExpired) throw;
        ++late_refused;
      }
    }
    lapsed.clear();
  }
  std::size_t terminal = 0, finished = 0, bad_board = 0;
  for (const auto& id : ids) {
    const auto s = platform.submission(id);
    terminal += is_terminal(s.status) ? 1 : 0;
    finished += s.status == SubmissionStatus::kFinished ? 1 : 0;
  }
  for (const std::string split : {"x", "y"}) {
    std::map<std::string, int> per_submission;
    for (const auto& e : platform.leaderboard().history("demo", "dev", split)) {
      ++per_submission[e.submission_id];
    }
    for (const auto& id : ids) {
      if (per_submission[id] != 1) ++bad_board;
    }
  }
  const bool pass = terminal == ids.size() && finished == ids.size() && bad_board == 0 &&
                    expired > 0 && duplicates > 0;
  return {pass, std::to_string(terminal) + "/" + std::to_string(ids.size()) + " terminal (" +
                    std::to_string(finished) + " finished), " + std::to_string(leases) +
                    " leases, " + std::to_string(expired) + " lapsed (" +
                    fmt(100.0 * expired / std::max(leases, 1), 1) + "%), " +
                    std::to_string(duplicates) + " duplicate reports, " +
                    std::to_string(late_refused) + " late reports refused, " +
                    std::to_string(late_accepted) + " accepted, " + std::to_string(bad_board) +
                    " (submission, split) pairs not exactly once"};
}

// ---- 6. remote/local equivalence

Outcome remote_local_equivalence() {
  testing::TempDir dir{"acc-remote-"};
  SystemClock clock;
  PlatformOptions o;
  o.data_dir = dir / "data";
  o.hitl_sweep_interval = Duration::zero();
  o.worker.poll_interval = 20ms;
  o.worker.parallelism = 4;
  Platform platform(clock, o);
  ApiServer server(platform);
  server.start();
  const auto host_token = platform.create_team("host").second;
  const auto team = team_principal(platform, "team");
  const auto host = platform.authenticate(host_token);

  const std::size_t n = 997;
  const auto labels = testing::random_labels(n, 31337, 7);
  auto preds = testing::random_labels(n, 4711, 7);
  for (std::size_t i = 0; i < n; i += 3) preds[i] = labels[i];

  ChallengeDef local;
  local.id = "local-eval";
  local.splits = {{"test", static_cast<std::int64_t>(n)}};
  platform.create_challenge(testing::make_bundle(local, {{"test", labels}}), host);
  ChallengeDef remote = local;
  remote.id = "remote-eval";
  remote.remote = true;
  ApiClient(server.base_url(), host_token)
      .post_bytes("/challenges", testing::make_bundle(remote, {}), "application/zip");

  const std::string artifact = testing::predictions({{"test", preds}});
  const auto local_id =
      platform.create_submission("local-eval", "dev", team, SubmissionKind::kPredictions, artifact).id;
  const auto remote_id =
      platform.create_submission("remote-eval", "dev", team, SubmissionKind::kPredictions, artifact).id;

  const json reg = ApiClient(server.base_url(), host_token)
                       .post("/remote/workers", {{"challenge_id", "remote-eval"}});
  testing::write_file(dir / "organizer" / "test.json", json(labels).dump());
  RemoteWorkerOptions ro;
  ro.evaluator = testing::install_fixture(dir / "organizer-eval", "accuracy");
  ro.annotations = dir / "organizer";
  ro.work_root = dir / "remote-work";
  ro.parallelism = 3;
  ro.poll_interval = 20ms;
  ro.max_submissions = 1;
  RemoteWorker worker(ApiClient(server.base_url(), reg["token"]), ro);
  worker.run();

  wait_until([&] { return is_terminal(platform.submission(local_id).status); }, 120s);
  const json lb_local = platform.leaderboard_view("local-eval", "dev", "test", std::nullopt);
  const json lb_remote = platform.leaderboard_view("remote-eval", "dev", "test", std::nullopt);
  server.stop();
  if (lb_local["entries"].empty() || lb_remote["entries"].empty()) {
    return {false, "missing leaderboard entry (local " +
                       std::string(to_string(platform.submission(local_id).status)) + ", remote " +
                       std::string(to_string(platform.submission(remote_id).status)) + ")"};
  }
  const std::string a = lb_local["entries"][0]["metrics"].dump();
  const std::string b = lb_remote["entries"][0]["metrics"].dump();
  std::size_t annotation_blobs = 0;
  for (const auto& blob : platform.blobs().list("challenges/remote-eval/")) {
    if (blob.kind == BlobKind::kAnnotation || blob.key.find("annotation") != std::string::npos) {
      ++annotation_blobs;
    }
  }
  const bool oracle = lb_local["entries"][0]["metrics"]["accuracy"].get<double>() ==
                      oracle_accuracy(labels, preds);
  return {a == b && annotation_blobs == 0 && oracle,
          std::string(a == b ? "byte-identical" : "DIFFERENT") + " metrics " + b +
              (oracle ? " (matches oracle)" : " (oracle mismatch)") + ", " +
              std::to_string(annotation_blobs) + " annotation blobs for the remote challenge"};
}

// ---- 7. visibility matrix

Outcome visibility_matrix() {
  testing::TempDir dir{"acc-vqa-"};
  SystemClock clock;
  PlatformOptions o;
  o.data_dir = dir / "data";
  o.start_local_workers = false;
  o.hitl_sweep_interval = Duration::zero();
  Platform platform(clock, o);
  ApiServer server(platform);
  server.start();
  const std::string base = server.base_url();
  const auto host_token = platform.create_team("host").second;
  const auto host = platform.authenticate(host_token);
  ChallengeDef def;
  def.id = "vqa";
  def.phases = {"test-dev", "test-std", "test-challenge"};
  def.splits = {{"dev", 6}, {"challenge", 6, Visibility::kHostOnly}};
  platform.create_challenge(testing::make_bundle(def, {}), host);

  // Distinctive metric values so any leak is visible in raw bodies.
  std::vector<std::string> secrets;
  std::vector<std::pair<std::string, std::string>> team_tokens;
  std::vector<std::string> submissions;
  int serial = 0;
  for (int t = 0; t < 3; ++t) {
    const auto tok = platform.create_team("team" + std::to_string(t)).second;
    team_tokens.emplace_back("team" + std::to_string(t), tok);
    const auto who = platform.authenticate(tok);
    for (const auto& phase : def.phases) {
      const auto id = platform.create_submission("vqa", phase, who, SubmissionKind::kPredictions, "{}").id;
      submissions.push_back(id);
      platform.begin_evaluation(id, "w");
      std::vector<SplitResult> rs;
      for (const auto& split : def.splits) {
        ++serial;
        SplitResult r;
        r.split_codename = split.codename;
        const double acc = split.visibility == Visibility::kHostOnly
                               ? 0.9137 + serial * 1e-7
                               : 0.4211 + serial * 1e-7;
        r.result.metrics = {{"accuracy", acc}, {"error_rate", 1.0 - acc}};
        r.result.item_count = 6;
        if (split.visibility == Visibility::kHostOnly) {
          secrets.push_back(json(acc).dump());
          secrets.push_back(json(1.0 - acc).dump());
        }
        rs.push_back(r);
      }
      platform.complete(id, rs);
    }
  }
  // Every readable endpoint, as the public and as each participant.
  std::vector<std::string> paths{"/challenges", "/challenges/vqa"};
  for (const auto& phase : def.phases) {
    for (const auto& split : def.splits) {
      paths.push_back("/challenges/vqa/phases/" + phase + "/splits/" + split.codename +
                      "/leaderboard");
    }
  }
  for (const auto& id : submissions) {
    paths.push_back("/submissions/" + id);
    paths.push_back("/hitl/submissions/" + id + "/report");
  }
  paths.push_back("/challenges/vqa/dead-letters");
  std::vector<std::pair<std::string, std::string>> viewers{{"public", ""}};
  viewers.insert(viewers.end(), team_tokens.begin(), team_tokens.end());
  std::size_t requests = 0, leaks = 0;
  std::string first_leak;
  for (const auto& [name, token] : viewers) {
    for (const auto& path : paths) {
      httplib::Client c(base);
      httplib::Headers h;
      if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
      auto res = c.Get(path, h);
      ++requests;
      if (!res) continue;
      for (const auto& s : secrets) {
        if (res->body.find(s) != std::string::npos) {
          ++leaks;
          if (first_leak.empty()) first_leak = name + " " + path;
        }
      }
    }
  }
  // Positive control: the host does see the hidden values.
  httplib::Client c(base);
  auto host_view = c.Get("/challenges/vqa/phases/test-std/splits/challenge/leaderboard",
                         httplib::Headers{{"Authorization", "Bearer " + host_token}});
  const bool host_sees = host_view && json::parse(host_view->body)["entries"].size() == 3;
  server.stop();
  return {leaks == 0 && host_sees,
          std::to_string(requests) + " requests over " + std::to_string(paths.size()) +
              " endpoints x " + std::to_string(viewers.size()) + " viewers, " +
              std::to_string(leaks) + " host_only values leaked" +
              (first_leak.empty() ? "" : " (first: " + first_leak + ")") +
              (host_sees ? ", host sees all 3 hidden entries" : ", host control FAILED")};
}

// ---- 8. agent sandbox

Outcome agent_sandbox() {
  if (!isolation_supported()) return {false, "process isolation unavailable on this host"};
  testing::TempDir dir{"acc-agent-"};
  SystemClock clock;
  PlatformOptions o;
  o.data_dir = dir / "data";
  o.hitl_sweep_interval = Duration::zero();
  o.worker.poll_interval = 20ms;
  o.worker.work_root = dir / "worker";
  o.worker.agent.isolation = Isolation::kRequired;
  o.worker.agent.step_deadline = 5s;
  Platform platform(clock, o);
  const auto host = team_principal(platform, "host");
  const auto team = team_principal(platform, "team");
  const std::string secret = "assets-only-7f3a9c";
  std::vector<testing::GridEpisode> eps(2);
  eps[0].id = "e0";
  eps[1].id = "e1";
  eps[1].gx = 3;
  for (auto& e : eps) {
    e.secret = secret;
    e.answer = "answer-" + secret;
  }
  platform.create_challenge(testing::make_agent_bundle("nav", eps, kAgentMaxSteps), host);
  // Wait for the worker to stage the environment assets, then aim the probe
  // at every host copy of them.
  std::vector<std::string> targets;
  wait_until(
      [&] {
        targets.clear();
        for (const auto& root : {o.data_dir, o.worker.work_root}) {
          if (!fs::exists(root)) continue;
          for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (e.is_regular_file() && e.path().string().find("envs/grid") != std::string::npos) {
              targets.push_back(e.path().string());
            }
          }
        }
        return targets.size() >= 4;  // blob copies plus staged copies
      },
      30s);
  auto submit = [&](testing::AgentDef def) {
    return platform.create_submission("nav", "dev", team, SubmissionKind::kAgent,
                                      testing::make_agent_archive(def)).id;
  };
  testing::AgentDef escape;
  escape.role = "probe-escape";
  escape.role_args = {"targets.json"};
  escape.files["targets.json"] = json(targets).dump();
  testing::AgentDef loop;
  loop.role = "probe-loop";
  testing::AgentDef invalid;
  invalid.role = "probe-invalid";
  const auto escape_id = submit(escape);
  const auto loop_id = submit(loop);
  const auto invalid_id = submit(invalid);
  wait_until(
      [&] {
        for (const auto& id : {escape_id, loop_id, invalid_id}) {
          if (!is_terminal(platform.submission(id).status)) return false;
        }
        return true;
      },
      240s);

  const Principal admin = platform.authenticate(platform.admin_token());
  // Escape probe: nothing it read may carry the asset secret.
  const json ev = platform.submission_view(escape_id, admin);
  bool escape_ok = ev["status"] == "Finished" && ev.contains("episodes");
  std::size_t files_read = 0;
  if (escape_ok) {
    const std::string dumped = ev["episodes"].dump();
    escape_ok = dumped.find(secret) == std::string::npos;
    for (const auto& [split, episodes] : ev["episodes"].items()) {
      for (const auto& e : episodes) {
        files_read = std::max(files_read, e["answer"].value("read", json::object()).size());
        if (e["answer"].value("wrote_outside", true)) escape_ok = false;
      }
    }
  }
  // Loop probe: every episode truncated at max steps.
  const json lv = platform.submission_view(loop_id, admin);
  bool loop_ok = lv["status"] == "Finished" && lv.contains("episodes");
  if (loop_ok) {
    for (const auto& [split, episodes] : lv["episodes"].items()) {
      for (const auto& e : episodes) {
        loop_ok = loop_ok && e["truncated"] == true && e["steps_taken"] == kAgentMaxSteps;
      }
    }
  }
  // Invalid action: a protocol violation fails the submission.
  const auto inv = platform.submission(invalid_id);
  const bool invalid_ok = inv.status == SubmissionStatus::kFailed &&
                          inv.log.find("ProtocolViolation") != std::string::npos;
  return {escape_ok && loop_ok && invalid_ok,
          std::string("escape ") + (escape_ok ? "contained" : "LEAKED/failed") + " (" +
              std::to_string(targets.size()) + " host asset paths targeted, " +
              std::to_string(files_read) + " readable inside), loop " +
              (loop_ok ? "truncated at " + std::to_string(kAgentMaxSteps) : "NOT truncated") +
              ", invalid action " + (invalid_ok ? "-> ProtocolViolation" : "not rejected")};
}

// ---- 9. HITL durability

Outcome hitl_durability() {
  testing::TempDir dir{"acc-hitl-"};
  ManualClock clock;
  PlatformOptions o;
  o.data_dir = dir / "data";
  o.start_local_workers = false;
  o.hitl_sweep_interval = Duration::zero();
  o.hitl_agent.isolation = Isolation::kBestEffort;
  o.hitl_agent.step_deadline = 10s;
  Platform platform(clock, o);
  const auto host = team_principal(platform, "host");
  const auto team = team_principal(platform, "team");
  const std::vector<std::string> axes{"correctness", "fluency", "consistency"};
  platform.create_challenge(testing::make_hitl_bundle("dialog", kHitlRounds, axes, 1, 1800), host);
  const Principal admin = platform.authenticate(platform.admin_token());
  platform.create_evaluator(admin, {"turker-1", true, 0, 0});

  testing::AgentDef agent;
  agent.role = "echo-agent";
  WorkerOptions wo;
  wo.work_root = dir / "work";
  Worker worker(platform.challenge("dialog"), platform.blobs(), platform.broker(), platform, wo);
  auto submit_and_hand_off = [&] {
    const auto id = platform.create_submission("dialog", "dev", team, SubmissionKind::kAgent,
                                               testing::make_agent_archive(agent)).id;
    if (worker.run_once() != RunOutcome::kHandedOff) throw std::runtime_error("no hand-off");
    return id;
  };
  const auto sub = submit_and_hand_off();
  auto& broker = platform.hitl();
  const auto sid = broker.sessions_of(sub).at(0).session_id;

  // Scripted evaluator client speaking channel frames.
  std::mt19937 rng(99);
  std::map<std::string, std::vector<int>> given;
  std::int64_t connection = broker.pair(sid, "turker-1").session.connection;
  int disconnects = 0;
  bool replay_ok = true;
  auto reconnect = [&](std::int64_t expected_rounds) {
    ++disconnects;
    const Pairing p = broker.pair(sid, "turker-1");
    connection = p.session.connection;
    bool saw_replay = false;
    for (const auto& f : p.frames) {
      if (f["type"] == "replay") {
        saw_replay = f["round_count"] == expected_rounds &&
                     f["transcript"].size() == static_cast<std::size_t>(2 * expected_rounds);
      }
    }
    replay_ok = replay_ok && saw_replay;
  };
  for (int round = 1; round <= kHitlRounds; ++round) {
    const std::string text = "question " + std::to_string(round);
    auto out = broker.handle_frame(sid, "turker-1", connection, {{"type", "msg"}, {"body", text}});
    if (out.at(0)["type"] != "agent_msg") throw std::runtime_error("round failed: " + out[0].dump());
    for (const auto& axis : axes) {
      const int v = 1 + static_cast<int>(rng() % 5);
      given[axis].push_back(v);
      broker.handle_frame(sid, "turker-1", connection,
                          {{"type", "rate"}, {"axis", axis}, {"round", round}, {"value", v}});
    }
    if (round == 3) {  // clean disconnect
      broker.disconnect(sid, "turker-1", connection);
      reconnect(round);
    } else if (round == 5) {  // dropped socket: the client just reconnects
      reconnect(round);
    } else if (round == 8) {  // agent process dies while the evaluator is away
      broker.kill_agent_for_testing(sid);
      broker.disconnect(sid, "turker-1", connection);
      reconnect(round);
    }
  }
  const auto fin = broker.handle_frame(sid, "turker-1", connection, {{"type", "finalize"}});
  const auto session = *broker.session(sid);

  bool transcript_ok = session.transcript.size() == 2u * kHitlRounds;
  for (std::size_t i = 0; transcript_ok && i < session.transcript.size(); ++i) {
    const auto& m = session.transcript[i];
    const auto round = static_cast<std::int64_t>(i / 2 + 1);
    transcript_ok = m.round == round && m.sender == (i % 2 ? "agent" : "evaluator") &&
                    m.body == "question " + std::to_string(round);
  }
  // Oracle: mean over rounds per axis, one session.
  bool board_ok = true;
  const json board = platform.leaderboard_view("dialog", "dev", "human", host);
  if (board["entries"].size() != 1) board_ok = false;
  std::string board_text;
  for (const auto& axis : axes) {
    const double want =
        std::accumulate(given[axis].begin(), given[axis].end(), 0.0) / given[axis].size();
    const double got = board_ok ? board["entries"][0]["metrics"].value(axis, -1.0) : -1.0;
    board_ok = board_ok && got == want;
    board_text += axis + "=" + fmt(got) + (got == want ? "" : "(want " + fmt(want) + ")") + " ";
  }

  // Abandonment: a second submission's session idles past its ttl.
  const auto sub2 = submit_and_hand_off();
  const auto sid2 = broker.sessions_of(sub2).at(0).session_id;
  broker.pair(sid2, "turker-1");
  clock.advance(1801s);
  const auto expired = broker.sweep();
  const auto after = broker.sessions_of(sub2);
  clock.advance(10s);
  const auto again = broker.sweep();
  std::size_t open = 0;
  for (const auto& s : after) open += s.state == SessionState::kOpen ? 1 : 0;
  const bool expiry_ok = expired == std::vector<std::string>{sid2} && after.size() == 2 &&
                         open == 1 && again.empty();

  const bool pass = session.state == SessionState::kCompleted && fin.at(0)["type"] == "ack" &&
                    disconnects == kHitlDisconnects && replay_ok && transcript_ok && board_ok &&
                    expiry_ok;
  return {pass, std::string("session ") + std::string(to_string(session.state)) + ", " +
                    std::to_string(session.transcript.size() / 2) + " rounds " +
                    (transcript_ok ? "intact" : "CORRUPT") + ", " + std::to_string(disconnects) +
                    " disconnects (replay " + (replay_ok ? "ok" : "BAD") + "), board " +
                    board_text + (board_ok ? "== oracle" : "!= oracle") + ", expiry opened " +
                    std::to_string(after.size() - 1) + " replacement(s)"};
}

}  // namespace
}  // namespace gauntlet

int main() {
  using gauntlet::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"chunked-serial-equivalence", gauntlet::chunked_equivalence},
      {"parallel-speedup", gauntlet::speedup},
      {"warm-start", gauntlet::warm_start},
      {"routing-isolation", gauntlet::routing_isolation},
      {"at-least-once-exactly-once-board", gauntlet::delivery_semantics},
      {"remote-local-equivalence", gauntlet::remote_local_equivalence},
      {"phase-split-visibility", gauntlet::visibility_matrix},
      {"agent-sandbox", gauntlet::agent_sandbox},
      {"hitl-durability", gauntlet::hitl_durability},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto started = gauntlet::Steady::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " ["
              << gauntlet::fmt(gauntlet::seconds_since(started), 1) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
