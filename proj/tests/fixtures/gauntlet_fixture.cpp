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

// Test programs in one binary. The first argument picks the role:
//
//   evaluators  accuracy | sleep <ms/item> | crash | success-rate
//               followed by the evaluator protocol arguments
//   environment grid-env <assets_dir> <episode_id>
//   agents      scripted-agent <script.json> | echo-agent | probe-escape <targets.json>
//               | probe-loop | probe-invalid | probe-flood | probe-fork
//               | probe-silent | probe-crash

#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_dir(const std::string& path) {
  struct stat st {};
  return ::stat(path.c_str(), &st) == 0 && S_ISDIR(st.st_mode);
}

void emit(const json& j) {
  std::cout << j.dump() << "\n" << std::flush;
}

bool next_frame(json& frame) {
  std::string line;
  if (!std::getline(std::cin, line)) return false;
  frame = json::parse(line);
  return true;
}

struct EvalArgs {
  std::string annotations, submission, phase, split;
  long begin = 0, end = 0;
};

EvalArgs eval_args(int argc, char** argv, int at) {
  if (argc < at + 6) throw std::runtime_error("usage: <annotations> <submission> <phase> <split> <begin> <end>");
  return {argv[at], argv[at + 1], argv[at + 2], argv[at + 3], std::stol(argv[at + 4]),
          std::stol(argv[at + 5])};
}

int accuracy(const EvalArgs& a) {
  std::string ann_path = a.annotations;
  if (is_dir(ann_path)) ann_path += "/" + a.split + ".json";
  const json labels = json::parse(slurp(ann_path));
  json preds = json::parse(slurp(a.submission));
  if (preds.is_object()) preds = preds.at(a.split);
  if (static_cast<long>(labels.size()) < a.end) throw std::runtime_error("chunk past annotations");
  long correct = 0;
  for (long i = a.begin; i < a.end; ++i) {
    if (i < static_cast<long>(preds.size()) && preds[i] == labels[i]) ++correct;
  }
  const long n = a.end - a.begin;
  const double acc = n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
  const double err = n == 0 ? 0.0 : static_cast<double>(n - correct) / static_cast<double>(n);
  emit({{"result", {{"accuracy", acc}, {"error_rate", err}}}, {"item_count", n}});
  return 0;
}

int sleepy(long ms_per_item, const EvalArgs& a) {
  const long n = a.end - a.begin;
  std::this_thread::sleep_for(std::chrono::milliseconds(ms_per_item * n));
  emit({{"result", {{"accuracy", 1.0}, {"error_rate", 0.0}}}, {"item_count", n}});
  return 0;
}

int success_rate(const EvalArgs& a) {
  const json episodes = json::parse(slurp(a.submission));
  double success = 0, steps = 0;
  for (long i = a.begin; i < a.end; ++i) {
    const auto& e = episodes.at(i);
    success += e.at("metrics").value("success", 0.0);
    steps += e.at("steps_taken").get<double>();
  }
  const long n = a.end - a.begin;
  emit({{"result", {{"success_rate", n ? success / n : 0.0}, {"mean_steps", n ? steps / n : 0.0}}},
        {"item_count", n}});
  return 0;
}

// A small grid world. Episode files hold start, heading, goal, question and
// the expected answer; only position, heading and question are observable.
int grid_env(const std::string& assets, const std::string& episode) {
  const json ep = json::parse(slurp(assets + "/" + episode + ".json"));
  long x = ep.at("start")[0], y = ep.at("start")[1];
  int heading = ep.value("heading", 0);
  const long gx = ep.at("goal")[0], gy = ep.at("goal")[1];
  auto observation = [&] {
    return json{{"position", {x, y}}, {"heading", heading}, {"question", ep.value("question", "")}};
  };
  emit({{"observation", observation()}});
  long steps = 0;
  json frame;
  while (next_frame(frame)) {
    const bool reached = x == gx && y == gy;
    if (frame.value("end", false)) {
      emit({{"done", true},
            {"outcome", {{"truncated", true}, {"position", {x, y}}}},
            {"metrics", {{"success", 0.0}, {"reached", reached ? 1.0 : 0.0}}}});
      return 0;
    }
    ++steps;
    const std::string action = frame.at("action");
    if (action == "stop") {
      const bool right = frame.contains("answer") && frame["answer"] == ep.at("answer");
      emit({{"done", true},
            {"outcome", {{"position", {x, y}}, {"reached", reached}, {"steps", steps}}},
            {"metrics", {{"success", reached && right ? 1.0 : 0.0}, {"reached", reached ? 1.0 : 0.0}}}});
      return 0;
    }
    if (action == "move-forward") {
      static const int dx[] = {0, 1, 0, -1}, dy[] = {1, 0, -1, 0};
      x += dx[heading];
      y += dy[heading];
    } else if (action == "turn-left") {
      heading = (heading + 3) % 4;
    } else if (action == "turn-right") {
      heading = (heading + 1) % 4;
    }
    emit({{"observation", observation()}, {"done", false}});
  }
  return 0;
}

int scripted_agent(const std::string& script_path) {
  const json script = json::parse(slurp(script_path));
  const auto& actions = script.at("actions");
  std::size_t i = 0;
  json frame;
  while (next_frame(frame)) {
    if (i < actions.size()) {
      emit({{"action", actions[i++]}});
    } else {
      emit({{"action", "stop"}, {"answer", script.value("answer", json())}});
    }
  }
  return 0;
}

int echo_agent() {
  json frame;
  while (next_frame(frame)) {
    const std::string body = frame.at("observation").value("body", "");
    emit({{"action", "respond"}, {"answer", body}});
  }
  return 0;
}

int probe_escape(const std::string& targets_path) {
  json targets = json::array();
  try {
    targets = json::parse(slurp(targets_path));
  } catch (const std::exception&) {
  }
  for (const char* extra : {"../../../../../../etc/shadow", "/proc/1/root/etc/hostname", "/root"}) {
    targets.push_back(extra);
  }
  json found = json::object();
  for (const auto& t : targets) {
    const std::string path = t;
    try {
      found[path] = slurp(path);
    } catch (const std::exception&) {
    }
  }
  bool wrote = false;
  {
    std::ofstream out("/agent/../escaped.txt");
    wrote = static_cast<bool>(out << "x");
  }
  json frame;
  while (next_frame(frame)) {
    emit({{"action", "stop"}, {"answer", {{"read", found}, {"wrote_outside", wrote}}}});
  }
  return 0;
}

int probe_fork() {
  int started = 0;
  std::vector<pid_t> kids;
  for (int i = 0; i < 200; ++i) {
    pid_t pid = fork();
    if (pid < 0) break;
    if (pid == 0) {
      ::sleep(2);
      _exit(0);
    }
    kids.push_back(pid);
    ++started;
  }
  json frame;
  while (next_frame(frame)) emit({{"action", "stop"}, {"answer", started}});
  for (pid_t k : kids) ::kill(k, SIGKILL);
  for (pid_t k : kids) ::waitpid(k, nullptr, 0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: gauntlet_fixture <role> ...\n";
    return 2;
  }
  const std::string role = argv[1];
  try {
    if (role == "accuracy") return accuracy(eval_args(argc, argv, 2));
    if (role == "sleep") return sleepy(std::stol(argv[2]), eval_args(argc, argv, 3));
    if (role == "success-rate") return success_rate(eval_args(argc, argv, 2));
    if (role == "crash") {
      std::cerr << "evaluator failed on purpose\n";
      return 3;
    }
    if (role == "grid-env") return grid_env(argv[2], argv[3]);
    if (role == "scripted-agent") return scripted_agent(argv[2]);
    if (role == "echo-agent") return echo_agent();
    if (role == "probe-escape") return probe_escape(argc > 2 ? argv[2] : "");
    if (role == "probe-fork") return probe_fork();
    json frame;
    if (role == "probe-loop") {
      while (next_frame(frame)) emit({{"action", "move-forward"}});
      return 0;
    }
    if (role == "probe-invalid") {
      while (next_frame(frame)) emit({{"action", "fly"}});
      return 0;
    }
    if (role == "probe-flood") {
      while (next_frame(frame)) {
        std::cout << std::string(1 << 20, 'A') << "\n" << std::flush;
      }
      return 0;
    }
    if (role == "probe-silent") {
      while (next_frame(frame)) ::sleep(1000);
      return 0;
    }
    if (role == "probe-crash") {
      next_frame(frame);
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << role << ": " << e.what() << "\n";
    return 1;
  }
  std::cerr << "unknown role " << role << "\n";
  return 2;
}
