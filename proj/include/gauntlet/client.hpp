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

// Thin HTTP client for the REST API. Error envelopes come back as
// gauntlet::Error with the server's code; connection failures as
// TransportError.

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace gauntlet {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ApiClient {
 public:
  explicit ApiClient(std::string base_url, std::string token = {});

  const std::string& base_url() const { return base_url_; }
  void set_token(std::string token) { token_ = std::move(token); }

  nlohmann::json get(const std::string& path) const;
  nlohmann::json post(const std::string& path, const nlohmann::json& body = nlohmann::json::object()) const;
  // Empty when the server answers 204.
  std::optional<nlohmann::json> post_optional(const std::string& path,
                                              const nlohmann::json& body = nlohmann::json::object()) const;
  nlohmann::json post_bytes(const std::string& path, std::string_view bytes,
                            const std::string& content_type = "application/octet-stream") const;
  nlohmann::json patch(const std::string& path, const nlohmann::json& body) const;
  std::string get_bytes(const std::string& path) const;

 private:
  std::string base_url_;
  std::string token_;
};

}  // namespace gauntlet
