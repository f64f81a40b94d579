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

// gauntlet: command-line client for the platform API.
//
// Exit codes:
//   0  success
//   1  lint found violations
//   2  input unreadable or malformed
//   3  daily submission limit reached
//   4  phase not open
//   5  watched submission ended Failed (or Cancelled)
//   6  authentication or authorization failure
//   7  any other API error
//   8  platform unreachable

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gauntlet/bundle.hpp"
#include "gauntlet/client.hpp"
#include "gauntlet/error.hpp"
#include "gauntlet/remote_worker.hpp"
#include "gauntlet/zip.hpp"

namespace {

namespace fs = std::filesystem;
using gauntlet::ApiClient;
using gauntlet::Error;
using gauntlet::ErrorCode;
using nlohmann::json;

enum Exit : int {
  kOk = 0,
  kViolations = 1,
  kBadInput = 2,
  kRateLimited = 3,
  kPhaseClosed = 4,
  kSubmissionFailed = 5,
  kAuth = 6,
  kApiError = 7,
  kTransport = 8,
};

struct Settings {
  std::string api_url;
  std::string token;
  std::string format;
  std::string config_path;
};

// Raised for local input problems; maps to exit 2.
struct BadInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw BadInput("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw BadInput("cannot read '" + p.string() + "'");
  return ss.str();
}

fs::path default_config_path() {
  if (const char* x = std::getenv("XDG_CONFIG_HOME"); x && *x) {
    return fs::path(x) / "gauntlet" / "config.json";
  }
  if (const char* h = std::getenv("HOME"); h && *h) {
    return fs::path(h) / ".config" / "gauntlet" / "config.json";
  }
  return {};
}

// flags > environment > config file > built-in default.
void resolve(Settings& s) {
  json file = json::object();
  const fs::path path = s.config_path.empty() ? default_config_path() : fs::path(s.config_path);
  if (!path.empty() && fs::exists(path)) {
    file = json::parse(slurp(path), nullptr, false);
    if (!file.is_object()) throw BadInput("config file '" + path.string() + "' is not a JSON object");
  } else if (!s.config_path.empty()) {
    throw BadInput("config file '" + s.config_path + "' not found");
  }
  auto pick = [&file](std::string& field, const char* env, const char* key, const char* fallback) {
    if (!field.empty()) return;
    if (const char* v = env ? std::getenv(env) : nullptr; v && *v) {
      field = v;
    } else if (file.contains(key) && file[key].is_string()) {
      field = file[key].get<std::string>();
    } else {
      field = fallback;
    }
  };
  pick(s.api_url, "GAUNTLET_API_URL", "api_url", "http://127.0.0.1:8080");
  pick(s.token, "GAUNTLET_TOKEN", "token", "");
  pick(s.format, nullptr, "format", "table");
  if (s.format != "table" && s.format != "json") {
    throw BadInput("format must be 'table' or 'json'");
  }
}

// Keeps the bearer token out of anything we print.
std::string scrub(std::string text, const std::string& token) {
  if (token.size() < 4) return text;
  for (auto at = text.find(token); at != std::string::npos; at = text.find(token, at)) {
    text.replace(at, token.size(), "***");
  }
  return text;
}

int exit_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kRateLimited: return kRateLimited;
    case ErrorCode::kPhaseClosed: return kPhaseClosed;
    case ErrorCode::kUnauthorized: return kAuth;
    default: return kApiError;
  }
}

// A bundle is either a ZIP file or a directory holding challenge.json.
std::string load_bundle(const fs::path& path) {
  if (!fs::exists(path)) throw BadInput("'" + path.string() + "' does not exist");
  if (!fs::is_directory(path)) return slurp(path);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  gauntlet::zip::Writer w;
  for (const auto& f : files) {
    const auto perms = fs::status(f).permissions();
    const bool exec = (perms & fs::perms::owner_exec) != fs::perms::none;
    w.add(f.lexically_relative(path).generic_string(), slurp(f), exec ? 0755 : 0644);
  }
  return w.finish();
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

void print_table(const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) {
      width[i] = std::max(width[i], r[i].size());
    }
  }
  auto line = [&width](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      std::cout << std::left << std::setw(static_cast<int>(width[i])) << cells[i];
      if (i + 1 < cells.size()) std::cout << "  ";
    }
    std::cout << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
}

std::string number(const json& v) {
  if (!v.is_number()) return v.is_string() ? v.get<std::string>() : v.dump();
  std::ostringstream ss;
  ss << std::setprecision(6) << v.get<double>();
  return ss.str();
}

// ---- commands

int cmd_lint(const Settings& s, const std::string& path) {
  const std::string archive = load_bundle(path);
  gauntlet::Bundle bundle;
  try {
    bundle = gauntlet::read_bundle(archive);
  } catch (const Error& e) {
    throw BadInput(std::string("malformed bundle: ") + e.what());
  }
  const auto violations = gauntlet::validate_bundle(bundle);
  const auto notices = gauntlet::config_notices(bundle.config);
  if (s.format == "json") {
    json v = json::array(), n = json::array();
    for (const auto& x : violations) v.push_back({{"path", x.path}, {"message", x.message}});
    for (const auto& x : notices) n.push_back({{"path", x.path}, {"message", x.message}});
    print_json({{"challenge_id", bundle.config.id}, {"valid", violations.empty()},
                {"violations", v}, {"notices", n}});
  } else {
    for (const auto& x : violations) std::cout << "violation: " << to_string(x) << "\n";
    for (const auto& x : notices) std::cout << "notice: " << to_string(x) << "\n";
    std::cout << bundle.config.id << ": " << violations.size() << " violation(s)\n";
  }
  return violations.empty() ? kOk : kViolations;
}

int cmd_create_challenge(const Settings& s, const std::string& path) {
  const std::string archive = load_bundle(path);
  const json c = ApiClient(s.api_url, s.token).post_bytes("/challenges", archive, "application/zip");
  if (s.format == "json") {
    print_json(c);
  } else {
    std::cout << "created challenge " << c.value("id", "") << "\n";
  }
  return kOk;
}

void print_submission(const Settings& s, const json& sub) {
  if (s.format == "json") {
    print_json(sub);
    return;
  }
  std::cout << sub.value("id", "") << "  " << sub.value("status", "") << "\n";
  if (sub.contains("results")) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [split, metrics] : sub["results"].items()) {
      for (const auto& [name, v] : metrics.items()) rows.push_back({split, name, number(v)});
    }
    if (!rows.empty()) print_table({"split", "metric", "value"}, rows);
  }
}

std::string log_excerpt(const json& sub) {
  std::string log = sub.value("log", "");
  constexpr std::size_t kMax = 2000;
  if (log.size() > kMax) log = "..." + log.substr(log.size() - kMax);
  return log;
}

int cmd_submit(const Settings& s, const std::string& challenge, const std::string& phase,
               const std::string& artifact_path, const std::string& kind, bool watch,
               double poll_seconds, double timeout_seconds) {
  const std::string artifact = slurp(artifact_path);
  ApiClient client(s.api_url, s.token);
  json sub;
  try {
    sub = client.post_bytes("/challenges/" + challenge + "/phases/" + phase +
                                "/submissions?kind=" + kind,
                            artifact);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kRateLimited && s.format != "json") {
      std::cerr << "daily limit reached; resets at " << e.details().value("reset_at", "?") << "\n";
    }
    throw;
  }
  const std::string id = sub.value("id", "");
  if (!watch) {
    if (s.format == "json") {
      print_json(sub);
    } else {
      std::cout << id << "\n";
    }
    return kOk;
  }
  if (s.format != "json") std::cout << id << "\n";
  const auto poll = std::chrono::milliseconds(static_cast<long>(poll_seconds * 1000));
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(static_cast<long>(timeout_seconds * 1000));
  std::string last;
  for (;;) {
    sub = client.get("/submissions/" + id);
    const std::string status = sub.value("status", "");
    if (status != last && s.format != "json") std::cerr << "status: " << status << "\n";
    last = status;
    if (status == "Finished" || status == "Failed" || status == "Cancelled") break;
    if (timeout_seconds > 0 && std::chrono::steady_clock::now() > deadline) {
      std::cerr << "gave up waiting for " << id << " (still " << status << ")\n";
      return kApiError;
    }
    std::this_thread::sleep_for(poll);
  }
  print_submission(s, sub);
  if (last == "Finished") return kOk;
  if (s.format != "json") {
    const std::string log = log_excerpt(sub);
    if (!log.empty()) std::cout << "--- log ---\n" << log << (log.back() == '\n' ? "" : "\n");
  }
  return kSubmissionFailed;
}

int cmd_status(const Settings& s, const std::string& id) {
  const json sub = ApiClient(s.api_url, s.token).get("/submissions/" + id);
  print_submission(s, sub);
  if (s.format != "json" && sub.value("status", "") == "Failed") {
    const std::string log = log_excerpt(sub);
    if (!log.empty()) std::cout << "--- log ---\n" << log << (log.back() == '\n' ? "" : "\n");
  }
  return kOk;
}

int cmd_leaderboard(const Settings& s, const std::string& challenge, const std::string& phase,
                    const std::string& split) {
  const json board = ApiClient(s.api_url, s.token)
                         .get("/challenges/" + challenge + "/phases/" + phase + "/splits/" +
                              split + "/leaderboard");
  if (s.format == "json") {
    print_json(board);
    return kOk;
  }
  std::vector<std::string> metrics;
  for (const auto& e : board["entries"]) {
    for (const auto& [name, v] : e["metrics"].items()) {
      if (std::find(metrics.begin(), metrics.end(), name) == metrics.end()) metrics.push_back(name);
    }
  }
  std::vector<std::string> header{"rank", "team"};
  header.insert(header.end(), metrics.begin(), metrics.end());
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : board["entries"]) {
    std::vector<std::string> row{std::to_string(e.value("rank", 0)),
                                 e.value("team_name", e.value("team", ""))};
    for (const auto& m : metrics) row.push_back(e["metrics"].contains(m) ? number(e["metrics"][m]) : "");
    rows.push_back(std::move(row));
  }
  std::cout << challenge << " / " << phase << " / " << split << " ("
            << board.value("visibility", "") << ")\n";
  print_table(header, rows);
  return kOk;
}

int cmd_hitl_report(const Settings& s, const std::string& id) {
  const json r = ApiClient(s.api_url, s.token).get("/hitl/submissions/" + id + "/report");
  if (s.format == "json") {
    print_json(r);
    return kOk;
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& session : r["sessions"]) {
    std::string means;
    for (const auto& [axis, v] : session.value("axis_means", json::object()).items()) {
      means += (means.empty() ? "" : " ") + axis + "=" + number(v);
    }
    rows.push_back({session.value("session_id", ""), session.value("state", ""),
                    std::to_string(session.value("round_count", 0)), means});
  }
  print_table({"session", "state", "rounds", "axis means"}, rows);
  std::cout << "completed: " << r.value("completed", 0) << "\n";
  for (const auto& [axis, v] : r["aggregate"].items()) std::cout << axis << ": " << number(v) << "\n";
  return kOk;
}

int cmd_create_team(const Settings& s, const std::string& name) {
  const json r = ApiClient(s.api_url).post("/teams", {{"name", name}});
  // The new token is the whole point of this command; print it only here.
  if (s.format == "json") {
    print_json(r);
  } else {
    std::cout << r["team"].value("id", "") << "\n" << r.value("token", "") << "\n";
  }
  return kOk;
}

int cmd_register_worker(const Settings& s, const std::string& challenge) {
  const json r = ApiClient(s.api_url, s.token).post("/remote/workers", {{"challenge_id", challenge}});
  if (s.format == "json") {
    print_json(r);
  } else {
    std::cout << r.value("worker_id", "") << "\n" << r.value("token", "") << "\n";
  }
  return kOk;
}

std::stop_source g_stop;

extern "C" void on_signal(int) { g_stop.request_stop(); }

int cmd_remote_worker(const Settings& s, gauntlet::RemoteWorkerOptions o, bool once) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  gauntlet::RemoteWorker worker(ApiClient(s.api_url, s.token), std::move(o));
  gauntlet::RemoteWorkerStats stats;
  if (once) {
    ApiClient(s.api_url, s.token).post("/remote/heartbeat");
    worker.run_once(g_stop.get_token());
    stats = worker.stats();
  } else {
    stats = worker.run(g_stop.get_token());
  }
  const json j{{"processed", stats.processed},
               {"finished", stats.finished},
               {"failed", stats.failed},
               {"lost", stats.lost},
               {"transport_errors", stats.transport_errors}};
  if (s.format == "json") {
    print_json(j);
  } else {
    std::cout << "processed " << stats.processed << " (finished " << stats.finished << ", failed "
              << stats.failed << ", lost " << stats.lost << ")\n";
  }
  return kOk;
}

gauntlet::Isolation parse_isolation(const std::string& name) {
  if (name == "none") return gauntlet::Isolation::kNone;
  if (name == "required") return gauntlet::Isolation::kRequired;
  return gauntlet::Isolation::kBestEffort;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gauntlet: challenge platform client"};
  app.require_subcommand(1);
  Settings s;
  app.add_option("--api-url", s.api_url, "Platform base URL (env GAUNTLET_API_URL)");
  app.add_option("--token", s.token, "Bearer token (env GAUNTLET_TOKEN)");
  app.add_option("--format", s.format, "Output format")->check(CLI::IsMember({"table", "json"}));
  app.add_option("--config", s.config_path, "Config file (default ~/.config/gauntlet/config.json)");

  std::string path, challenge, phase, split, id, kind = "predictions", name;
  bool watch = false, once = false;
  double poll = 2.0, timeout = 0.0;

  auto* lint = app.add_subcommand("lint", "Validate a challenge bundle locally");
  lint->add_option("bundle", path, "Bundle ZIP or directory")->required();

  auto* create = app.add_subcommand("create-challenge", "Upload a challenge bundle");
  create->add_option("bundle", path, "Bundle ZIP or directory")->required();

  auto* submit = app.add_subcommand("submit", "Submit predictions or an agent");
  submit->add_option("--challenge", challenge)->required();
  submit->add_option("--phase", phase)->required();
  submit->add_option("--kind", kind)->check(CLI::IsMember({"predictions", "agent"}));
  submit->add_flag("--watch", watch, "Poll until the submission is done");
  submit->add_option("--poll-interval", poll, "Seconds between polls");
  submit->add_option("--timeout", timeout, "Give up watching after this many seconds");
  submit->add_option("artifact", path, "Predictions file or agent bundle")->required();

  auto* status = app.add_subcommand("status", "Show a submission");
  status->add_option("submission", id)->required();

  auto* board = app.add_subcommand("leaderboard", "Show a leaderboard");
  board->add_option("--challenge", challenge)->required();
  board->add_option("--phase", phase)->required();
  board->add_option("--split", split)->required();

  gauntlet::RemoteWorkerOptions ro;
  std::string evaluator, annotations, work_root, isolation = "best-effort";
  std::int64_t max_submissions = 0;
  double poll_interval = 2.0, heartbeat = 30.0;
  auto* remote = app.add_subcommand("remote-worker", "Evaluate a remote challenge's submissions");
  remote->add_option("--evaluator", evaluator, "Evaluator program")->required();
  remote->add_option("--annotations", annotations, "Annotation file or per-split directory")
      ->required();
  remote->add_option("--work-dir", work_root);
  remote->add_option("--parallelism", ro.parallelism);
  remote->add_option("--isolation", isolation)
      ->check(CLI::IsMember({"none", "best-effort", "required"}));
  remote->add_option("--poll-interval", poll_interval, "Seconds between idle polls");
  remote->add_option("--heartbeat-interval", heartbeat, "Seconds between heartbeats");
  remote->add_option("--max-submissions", max_submissions, "Stop after this many (0 = never)");
  remote->add_flag("--once", once, "Lease at most one submission and exit");

  auto* hitl = app.add_subcommand("hitl-report", "Show human evaluation results");
  hitl->add_option("submission", id)->required();

  auto* team = app.add_subcommand("create-team", "Register a team and print its token");
  team->add_option("name", name)->required();

  auto* reg = app.add_subcommand("register-worker", "Register a remote worker for a challenge");
  reg->add_option("--challenge", challenge)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadInput;
  }

  try {
    resolve(s);
    if (*lint) return cmd_lint(s, path);
    if (*create) return cmd_create_challenge(s, path);
    if (*submit) return cmd_submit(s, challenge, phase, path, kind, watch, poll, timeout);
    if (*status) return cmd_status(s, id);
    if (*board) return cmd_leaderboard(s, challenge, phase, split);
    if (*hitl) return cmd_hitl_report(s, id);
    if (*team) return cmd_create_team(s, name);
    if (*reg) return cmd_register_worker(s, challenge);
    if (*remote) {
      ro.evaluator = evaluator;
      ro.annotations = annotations;
      ro.work_root = work_root;
      ro.isolation = parse_isolation(isolation);
      ro.poll_interval = std::chrono::milliseconds(static_cast<long>(poll_interval * 1000));
      ro.heartbeat_interval = std::chrono::milliseconds(static_cast<long>(heartbeat * 1000));
      if (max_submissions > 0) ro.max_submissions = max_submissions;
      return cmd_remote_worker(s, std::move(ro), once);
    }
  } catch (const BadInput& e) {
    std::cerr << "error: " << scrub(e.what(), s.token) << "\n";
    return kBadInput;
  } catch (const gauntlet::TransportError& e) {
    std::cerr << "error: " << scrub(e.what(), s.token) << "\n";
    return kTransport;
  } catch (const Error& e) {
    const ErrorCode code = e.code();
    if (s.format == "json") {
      json env{{"error", {{"code", code_name(code)}, {"message", scrub(e.what(), s.token)}}}};
      if (!e.details().is_null()) env["error"]["details"] = json::parse(scrub(e.details().dump(), s.token));
      print_json(env);
    } else {
      std::cerr << "error: " << code_name(code) << ": " << scrub(e.what(), s.token) << "\n";
    }
    // Local evaluator or annotation problems count as bad input.
    if (code == ErrorCode::kEntrypointInvalid || code == ErrorCode::kAssetUnavailable) {
      return kBadInput;
    }
    return exit_for(code);
  } catch (const std::exception& e) {
    std::cerr << "error: " << scrub(e.what(), s.token) << "\n";
    return kApiError;
  }
  return kBadInput;
}
