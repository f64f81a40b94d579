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

#include "gauntlet/http_api.hpp"

#include <functional>

#include <httplib.h>

#include "gauntlet/error.hpp"

namespace gauntlet {

using nlohmann::json;
using httplib::Request;
using httplib::Response;

namespace {

void send_json(Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(Response& res, const Error& e) {
  send_json(res, http_status(e.code()), e.envelope());
}

std::optional<std::string> bearer(const Request& req) {
  const std::string h = req.get_header_value("Authorization");
  constexpr std::string_view kPrefix = "Bearer ";
  if (h.size() <= kPrefix.size() || h.compare(0, kPrefix.size(), kPrefix) != 0) {
    return std::nullopt;
  }
  return h.substr(kPrefix.size());
}

json body_json(const Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::kBadRequest, "request body must be a JSON object");
  }
  return j;
}

const std::string& param(const Request& req, const char* name) {
  auto it = req.path_params.find(name);
  if (it == req.path_params.end()) throw Error(ErrorCode::kBadRequest, "missing path parameter");
  return it->second;
}

json message_json(const HitlMessage& m) {
  return {{"sender", m.sender},
          {"round", m.round},
          {"body", m.body},
          {"sent_at", format_timestamp(m.sent_at)}};
}

json session_summary(const HitlSession& s) {
  return {{"session_id", s.session_id},
          {"submission_id", s.submission_id},
          {"challenge_id", s.challenge_id},
          {"slot", s.slot},
          {"state", to_string(s.state)},
          {"round_count", s.round_count},
          {"evaluator_id", s.evaluator_id ? json(*s.evaluator_id) : json()}};
}

}  // namespace

ApiServer::ApiServer(Platform& platform, ApiServerOptions options)
    : platform_(platform), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  server_->set_payload_max_length(platform_.options().max_artifact_bytes + (1 << 20));
  server_->set_read_timeout(300, 0);
  server_->set_write_timeout(300, 0);
  server_->set_error_handler([](const Request&, Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 413) {
      send_error(res, Error(ErrorCode::kPayloadTooLarge, "request body too large"));
    } else if (res.status == 404) {
      send_error(res, Error(ErrorCode::kNotFound, "no such route"));
    } else {
      json env{{"error", {{"code", res.status >= 500 ? "Internal" : "BadRequest"},
                          {"message", httplib::status_message(res.status)},
                          {"details", nullptr}}}};
      res.set_content(env.dump(), "application/json");
    }
  });
  install_routes();
}

ApiServer::~ApiServer() { stop(); }

std::string ApiServer::base_url() const {
  return "http://" + options_.host + ":" + std::to_string(port_);
}

void ApiServer::bind() {
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) {
    throw Error(ErrorCode::kInternal,
                "cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
}

int ApiServer::start() {
  bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void ApiServer::run() {
  bind();
  server_->listen_after_bind();
}

void ApiServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void ApiServer::install_routes() {
  using Fn = std::function<void(const Request&, Response&)>;
  auto guard = [](Fn fn) {
    return [fn = std::move(fn)](const Request& req, Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const json::exception& e) {
        send_error(res, Error(ErrorCode::kBadRequest, e.what()));
      } catch (const std::exception& e) {
        send_error(res, Error(ErrorCode::kInternal, e.what()));
      }
    };
  };
  Platform& p = platform_;
  auto who = [&p](const Request& req) {
    auto token = bearer(req);
    if (!token) throw Error(ErrorCode::kUnauthorized, "missing bearer token");
    return p.authenticate(*token);
  };
  auto maybe_who = [&p](const Request& req) -> std::optional<Principal> {
    auto token = bearer(req);
    if (!token) return std::nullopt;
    return p.authenticate(*token);
  };
  auto evaluator = [who](const Request& req) {
    Principal e = who(req);
    if (e.kind != PrincipalKind::kEvaluator) {
      throw Error(ErrorCode::kUnauthorized, "evaluator token required");
    }
    return e.id;
  };
  auto& s = *server_;

  s.Get("/healthz", [](const Request&, Response& res) { send_json(res, 200, {{"ok", true}}); });

  s.Post("/teams", guard([&p](const Request& req, Response& res) {
    json b = body_json(req);
    auto [team, token] = p.create_team(b.at("name").get<std::string>(),
                                       b.value("members", std::vector<std::string>{}));
    send_json(res, 201, {{"team", {{"id", team.id}, {"name", team.name}, {"members", team.members}}},
                         {"token", token}});
  }));

  s.Get("/challenges", guard([&p](const Request&, Response& res) {
    json list = json::array();
    for (const auto& id : p.challenge_ids()) {
      list.push_back({{"id", id}, {"title", p.challenge(id).title}});
    }
    send_json(res, 200, {{"challenges", list}});
  }));

  s.Post("/challenges", guard([&p, who](const Request& req, Response& res) {
    Principal host = who(req);
    ChallengeConfig c = p.create_challenge(req.body, host);
    send_json(res, 201, p.challenge_view(c.id, host));
  }));

  s.Get("/challenges/:id", guard([&p, maybe_who](const Request& req, Response& res) {
    send_json(res, 200, p.challenge_view(param(req, "id"), maybe_who(req)));
  }));

  s.Post("/challenges/:id/phases/:phase/submissions",
         guard([&p, who](const Request& req, Response& res) {
           Principal team = who(req);
           const std::string kind_name =
               req.has_param("kind") ? req.get_param_value("kind") : "predictions";
           auto kind = parse_submission_kind(kind_name);
           if (!kind) throw Error(ErrorCode::kBadRequest, "unknown kind '" + kind_name + "'");
           Submission sub =
               p.create_submission(param(req, "id"), param(req, "phase"), team, *kind, req.body);
           send_json(res, 201, p.submission_view(sub.id, team));
         }));

  s.Get("/challenges/:id/phases/:phase/splits/:split/leaderboard",
        guard([&p, maybe_who](const Request& req, Response& res) {
          send_json(res, 200,
                    p.leaderboard_view(param(req, "id"), param(req, "phase"), param(req, "split"),
                                       maybe_who(req)));
        }));

  s.Get("/challenges/:id/dead-letters", guard([&p, who](const Request& req, Response& res) {
    json list = json::array();
    for (const auto& m : p.dead_letters(param(req, "id"), who(req))) {
      list.push_back({{"message_id", m.message_id},
                      {"submission_id", m.submission_id},
                      {"attempt", m.attempt},
                      {"enqueued_at", format_timestamp(m.enqueued_at)}});
    }
    send_json(res, 200, {{"messages", list}});
  }));

  s.Post("/challenges/:id/remote-workers", guard([&p, who](const Request& req, Response& res) {
    auto reg = p.register_remote_worker(param(req, "id"), who(req));
    send_json(res, 201,
              {{"worker_id", reg.worker_id}, {"challenge_id", reg.challenge_id}, {"token", reg.token}});
  }));

  s.Post("/remote/workers", guard([&p, who](const Request& req, Response& res) {
    Principal host = who(req);
    json b = body_json(req);
    auto reg = p.register_remote_worker(b.at("challenge_id").get<std::string>(), host);
    send_json(res, 201,
              {{"worker_id", reg.worker_id}, {"challenge_id", reg.challenge_id}, {"token", reg.token}});
  }));

  s.Get("/submissions/:id", guard([&p, who](const Request& req, Response& res) {
    send_json(res, 200, p.submission_view(param(req, "id"), who(req)));
  }));

  s.Patch("/submissions/:id/status", guard([&p, who](const Request& req, Response& res) {
    Principal actor = who(req);
    json b = body_json(req);
    const std::string name = b.at("status").get<std::string>();
    auto to = parse_submission_status(name);
    if (!to) throw Error(ErrorCode::kBadRequest, "unknown status '" + name + "'");
    Submission sub = p.transition_submission(param(req, "id"), *to, actor);
    send_json(res, 200, p.submission_view(sub.id, actor));
  }));

  s.Post("/remote/lease", guard([&p, who](const Request& req, Response& res) {
    auto lease = p.lease_remote(who(req));
    if (!lease) {
      res.status = 204;
      return;
    }
    send_json(res, 200, *lease);
  }));

  s.Post("/remote/results", guard([&p, who](const Request& req, Response& res) {
    Principal w = who(req);
    json b = body_json(req);
    send_json(res, 200, p.report_remote(w, b.at("lease_id").get<std::string>(), b));
  }));

  s.Post("/remote/heartbeat", guard([&p, who](const Request& req, Response& res) {
    p.heartbeat(who(req));
    send_json(res, 200, {{"ok", true}});
  }));

  s.Get("/downloads/:token", guard([&p](const Request& req, Response& res) {
    res.status = 200;
    res.set_content(p.download(param(req, "token")), "application/octet-stream");
  }));

  s.Post("/hitl/evaluators", guard([&p, who](const Request& req, Response& res) {
    Principal admin = who(req);
    json b = body_json(req);
    EvaluatorProfile profile;
    profile.evaluator_id = b.at("evaluator_id").get<std::string>();
    profile.qualification_passed = b.value("qualification_passed", false);
    const std::string token = p.create_evaluator(admin, profile);
    send_json(res, 201, {{"evaluator", to_json(profile)}, {"token", token}});
  }));

  s.Get("/hitl/sessions", guard([&p, evaluator](const Request& req, Response& res) {
    json list = json::array();
    for (const auto& session : p.hitl().available_for(evaluator(req))) {
      list.push_back(session_summary(session));
    }
    send_json(res, 200, {{"sessions", list}});
  }));

  s.Post("/hitl/sessions/:id/connect", guard([&p, evaluator](const Request& req, Response& res) {
    Pairing pairing = p.hitl().pair(param(req, "id"), evaluator(req));
    send_json(res, 200,
              {{"session", session_summary(pairing.session)},
               {"connection", pairing.session.connection},
               {"frames", pairing.frames}});
  }));

  s.Post("/hitl/sessions/:id/frames", guard([&p, evaluator](const Request& req, Response& res) {
    const std::string eid = evaluator(req);
    json b = body_json(req);
    auto out = p.hitl().handle_frame(param(req, "id"), eid, b.at("connection").get<std::int64_t>(),
                                     b.at("frame"));
    send_json(res, 200, {{"frames", out}});
  }));

  s.Post("/hitl/sessions/:id/disconnect",
         guard([&p, evaluator](const Request& req, Response& res) {
           const std::string eid = evaluator(req);
           json b = body_json(req);
           std::optional<std::int64_t> connection;
           if (b.contains("connection")) connection = b["connection"].get<std::int64_t>();
           p.hitl().disconnect(param(req, "id"), eid, connection);
           send_json(res, 200, {{"ok", true}});
         }));

  s.Post("/hitl/sessions/:id/messages", guard([&p, evaluator](const Request& req, Response& res) {
    const std::string eid = evaluator(req);
    json b = body_json(req);
    HitlMessage reply = p.hitl().relay(param(req, "id"), eid, b.at("text").get<std::string>());
    send_json(res, 200, {{"reply", message_json(reply)}});
  }));

  s.Post("/hitl/sessions/:id/ratings", guard([&p, evaluator](const Request& req, Response& res) {
    const std::string eid = evaluator(req);
    json b = body_json(req);
    p.hitl().rate(param(req, "id"), eid, b.at("axis").get<std::string>(),
                  b.at("round").get<std::int64_t>(), b.at("value").get<int>());
    send_json(res, 200, {{"ok", true}});
  }));

  s.Post("/hitl/sessions/:id/finalize", guard([&p, evaluator](const Request& req, Response& res) {
    const std::string eid = evaluator(req);
    send_json(res, 200, {{"outcome", p.hitl().finalize(param(req, "id"), eid)}});
  }));

  s.Get("/hitl/submissions/:id/report", guard([&p, who](const Request& req, Response& res) {
    send_json(res, 200, p.hitl_report(param(req, "id"), who(req)));
  }));
}

}  // namespace gauntlet
