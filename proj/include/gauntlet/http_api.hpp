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

// REST surface of the platform. Every route answers JSON; failures use the
// error envelope {"error": {"code", "message", "details"}} with the status
// from http_status(). Callers authenticate with "Authorization: Bearer <token>".
//
//   POST   /teams                                         {"name", "members"?}
//   GET    /challenges
//   POST   /challenges                                    bundle ZIP body
//   GET    /challenges/{id}
//   POST   /challenges/{id}/phases/{phase}/submissions?kind=predictions|agent
//   GET    /challenges/{id}/phases/{phase}/splits/{split}/leaderboard
//   GET    /challenges/{id}/dead-letters
//   POST   /challenges/{id}/remote-workers
//   GET    /submissions/{id}
//   PATCH  /submissions/{id}/status                       {"status"}
//   POST   /remote/workers                                {"challenge_id"}, host token
//   POST   /remote/lease                                  204 when idle
//   POST   /remote/results                                {"lease_id", "results"|"failure"}
//   POST   /remote/heartbeat
//   GET    /downloads/{token}
//   POST   /hitl/evaluators                               admin
//   GET    /hitl/sessions
//   POST   /hitl/sessions/{id}/connect
//   POST   /hitl/sessions/{id}/frames                     {"connection", "frame"}
//   POST   /hitl/sessions/{id}/disconnect                 {"connection"}
//   POST   /hitl/sessions/{id}/messages                   {"text"}
//   POST   /hitl/sessions/{id}/ratings                    {"axis", "round", "value"}
//   POST   /hitl/sessions/{id}/finalize
//   GET    /hitl/submissions/{id}/report

#pragma once

#include <memory>
#include <string>
#include <thread>

#include "gauntlet/platform.hpp"

namespace httplib {
class Server;
}

namespace gauntlet {

struct ApiServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
};

class ApiServer {
 public:
  ApiServer(Platform& platform, ApiServerOptions options = {});
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds and serves on a background thread. Returns the bound port.
  int start();
  // Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }
  std::string base_url() const;

 private:
  void bind();
  void install_routes();

  Platform& platform_;
  ApiServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace gauntlet
