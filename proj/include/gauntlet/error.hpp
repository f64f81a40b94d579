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

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace gauntlet {

// Every failure the platform reports carries one of these codes. The wire
// name (code_name) is what appears in the REST error envelope and is what
// clients switch on; keep it stable.
enum class ErrorCode {
  kBadRequest,
  kInternal,
  // bundles and configuration
  kMalformedArchive,
  kSchemaError,
  kUnsafePath,
  kNotFound,
  kAmbiguous,
  kValidationFailed,
  // queue
  kUnknownRoute,
  kBrokerUnavailable,
  kLeaseExpired,
  kLeaseNotHeld,
  // worker / evaluator protocol
  kAssetUnavailable,
  kEntrypointInvalid,
  kEvaluatorCrashed,
  kEvaluatorTimeout,
  kProtocolError,
  kSchemaMismatch,
  // api service
  kUnauthorized,
  kPhaseClosed,
  kRateLimited,
  kPayloadTooLarge,
  kIllegalTransition,
  kUnknownSubmission,
  // remote evaluation
  kNotRemoteChallenge,
  // agents
  kFetchFailed,
  kManifestInvalid,
  kSandboxUnavailable,
  kAgentCrashed,
  kAgentTimeout,
  kProtocolViolation,
  // human-in-the-loop
  kNotHitlChallenge,
  kStagingFailed,
  kSessionUnavailable,
  kNotQualified,
  kBlocked,
  kSessionNotPaired,
  kRoundsExhausted,
  kUnknownAxis,
  kRoundNotReached,
  kOutOfScale,
  kSessionIncomplete,
};

std::string_view code_name(ErrorCode code);
std::optional<ErrorCode> code_from_name(std::string_view name);

// HTTP status used when the error crosses the REST boundary.
int http_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        nlohmann::json details = nullptr)
      : std::runtime_error(message),
        code_(code),
        details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }

  // {"error": {"code": ..., "message": ..., "details": ...}}
  nlohmann::json envelope() const;

 private:
  ErrorCode code_;
  nlohmann::json details_;
};

}  // namespace gauntlet
