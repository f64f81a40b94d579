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

#include "gauntlet/client.hpp"

#include <httplib.h>

#include "gauntlet/error.hpp"

namespace gauntlet {

using nlohmann::json;

namespace {

httplib::Headers headers_for(const std::string& token) {
  httplib::Headers h;
  if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
  return h;
}

std::unique_ptr<httplib::Client> connect(const std::string& base_url) {
  auto c = std::make_unique<httplib::Client>(base_url);
  if (!c->is_valid()) throw TransportError("invalid API URL '" + base_url + "'");
  c->set_connection_timeout(10, 0);
  c->set_read_timeout(600, 0);
  c->set_write_timeout(600, 0);
  return c;
}

const httplib::Response& checked(const httplib::Result& r, const std::string& base_url) {
  if (!r) {
    throw TransportError("cannot reach " + base_url + ": " + httplib::to_string(r.error()));
  }
  if (r->status >= 400) {
    json env = json::parse(r->body, nullptr, false);
    if (!env.is_discarded() && env.contains("error") && env["error"].is_object()) {
      const auto& e = env["error"];
      auto code = code_from_name(e.value("code", ""));
      throw Error(code.value_or(ErrorCode::kInternal), e.value("message", ""),
                  e.contains("details") ? e["details"] : json());
    }
    throw Error(ErrorCode::kInternal, "HTTP " + std::to_string(r->status));
  }
  return *r;
}

json parsed(const httplib::Response& r) {
  if (r.body.empty()) return json::object();
  json j = json::parse(r.body, nullptr, false);
  if (j.is_discarded()) throw TransportError("server sent a non-JSON body");
  return j;
}

}  // namespace

ApiClient::ApiClient(std::string base_url, std::string token)
    : base_url_(std::move(base_url)), token_(std::move(token)) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

json ApiClient::get(const std::string& path) const {
  auto c = connect(base_url_);
  return parsed(checked(c->Get(path, headers_for(token_)), base_url_));
}

json ApiClient::post(const std::string& path, const json& body) const {
  auto c = connect(base_url_);
  return parsed(checked(c->Post(path, headers_for(token_), body.dump(), "application/json"), base_url_));
}

std::optional<json> ApiClient::post_optional(const std::string& path, const json& body) const {
  auto c = connect(base_url_);
  const httplib::Result result =
      c->Post(path, headers_for(token_), body.dump(), "application/json");
  const auto& r = checked(result, base_url_);
  if (r.status == 204) return std::nullopt;
  return parsed(r);
}

json ApiClient::post_bytes(const std::string& path, std::string_view bytes,
                           const std::string& content_type) const {
  auto c = connect(base_url_);
  return parsed(checked(
      c->Post(path, headers_for(token_), bytes.data(), bytes.size(), content_type), base_url_));
}

json ApiClient::patch(const std::string& path, const json& body) const {
  auto c = connect(base_url_);
  return parsed(
      checked(c->Patch(path, headers_for(token_), body.dump(), "application/json"), base_url_));
}

std::string ApiClient::get_bytes(const std::string& path) const {
  auto c = connect(base_url_);
  return checked(c->Get(path, headers_for(token_)), base_url_).body;
}

}  // namespace gauntlet
