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

// gauntletd: the platform server. Serves the REST API and runs local
// evaluation workers for every challenge.

#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gauntlet/clock.hpp"
#include "gauntlet/error.hpp"
#include "gauntlet/http_api.hpp"
#include "gauntlet/platform.hpp"

namespace {

namespace fs = std::filesystem;

gauntlet::Isolation parse_isolation(const std::string& name) {
  if (name == "none") return gauntlet::Isolation::kNone;
  if (name == "required") return gauntlet::Isolation::kRequired;
  return gauntlet::Isolation::kBestEffort;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gauntletd: challenge platform server"};
  gauntlet::ApiServerOptions server_options;
  gauntlet::PlatformOptions o;
  std::string data_dir = "gauntlet-data", isolation = "best-effort", port_file;
  double sweep = 30.0;
  app.add_option("--host", server_options.host, "Bind address");
  app.add_option("--port", server_options.port, "Port (0 picks one)");
  app.add_option("--data-dir", data_dir, "Blob store, queue log and HITL state");
  app.add_option("--workers-per-challenge", o.workers_per_challenge);
  app.add_option("--parallelism", o.worker.parallelism, "Chunks evaluated at once per worker");
  app.add_option("--isolation", isolation)
      ->check(CLI::IsMember({"none", "best-effort", "required"}));
  app.add_option("--hitl-sweep-seconds", sweep, "Session expiry sweep period (0 disables)");
  app.add_option("--port-file", port_file, "Write the bound port here once listening");
  CLI11_PARSE(app, argc, argv);

  // Block the stop signals before any thread starts; main waits for them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  try {
    o.data_dir = fs::absolute(data_dir);
    fs::create_directories(o.data_dir);
    o.worker.isolation = parse_isolation(isolation);
    o.worker.agent.isolation = o.worker.isolation;
    o.hitl_agent.isolation = o.worker.isolation;
    o.hitl_sweep_interval = std::chrono::milliseconds(static_cast<long>(sweep * 1000));
    if (const char* t = std::getenv("GAUNTLET_ADMIN_TOKEN"); t && *t) o.admin_token = t;

    gauntlet::SystemClock clock;
    gauntlet::Platform platform(clock, o);
    {
      // The admin token goes to a private file, never to the console.
      const fs::path token_file = o.data_dir / "admin_token";
      std::ofstream(token_file) << platform.admin_token() << "\n";
      fs::permissions(token_file, fs::perms::owner_read | fs::perms::owner_write);
    }
    gauntlet::ApiServer server(platform, server_options);
    const int port = server.start();
    if (!port_file.empty()) std::ofstream(port_file) << port << "\n";
    std::cerr << "gauntletd listening on " << server.base_url() << " (data in "
              << o.data_dir.string() << ")\n";
    int sig = 0;
    sigwait(&stop_signals, &sig);
    std::cerr << "gauntletd: stopping\n";
    server.stop();
    platform.stop_workers();
  } catch (const std::exception& e) {
    std::cerr << "gauntletd: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
