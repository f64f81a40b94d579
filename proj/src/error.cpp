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

#include "gauntlet/error.hpp"

#include <array>
#include <utility>

namespace gauntlet {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 42> kNames{{
    {ErrorCode::kBadRequest, "BadRequest"},
    {ErrorCode::kInternal, "Internal"},
    {ErrorCode::kMalformedArchive, "MalformedArchive"},
    {ErrorCode::kSchemaError, "SchemaError"},
    {ErrorCode::kUnsafePath, "UnsafePath"},
    {ErrorCode::kNotFound, "NotFound"},
    {ErrorCode::kAmbiguous, "Ambiguous"},
    {ErrorCode::kValidationFailed, "ValidationFailed"},
    {ErrorCode::kUnknownRoute, "UnknownRoute"},
    {ErrorCode::kBrokerUnavailable, "BrokerUnavailable"},
    {ErrorCode::kLeaseExpired, "LeaseExpired"},
    {ErrorCode::kLeaseNotHeld, "LeaseNotHeld"},
    {ErrorCode::kAssetUnavailable, "AssetUnavailable"},
    {ErrorCode::kEntrypointInvalid, "EntrypointInvalid"},
    {ErrorCode::kEvaluatorCrashed, "EvaluatorCrashed"},
    {ErrorCode::kEvaluatorTimeout, "EvaluatorTimeout"},
    {ErrorCode::kProtocolError, "ProtocolError"},
    {ErrorCode::kSchemaMismatch, "SchemaMismatch"},
    {ErrorCode::kUnauthorized, "Unauthorized"},
    {ErrorCode::kPhaseClosed, "PhaseClosed"},
    {ErrorCode::kRateLimited, "RateLimited"},
    {ErrorCode::kPayloadTooLarge, "PayloadTooLarge"},
    {ErrorCode::kIllegalTransition, "IllegalTransition"},
    {ErrorCode::kUnknownSubmission, "UnknownSubmission"},
    {ErrorCode::kNotRemoteChallenge, "NotRemoteChallenge"},
    {ErrorCode::kFetchFailed, "FetchFailed"},
    {ErrorCode::kManifestInvalid, "ManifestInvalid"},
    {ErrorCode::kSandboxUnavailable, "SandboxUnavailable"},
    {ErrorCode::kAgentCrashed, "AgentCrashed"},
    {ErrorCode::kAgentTimeout, "AgentTimeout"},
    {ErrorCode::kProtocolViolation, "ProtocolViolation"},
    {ErrorCode::kNotHitlChallenge, "NotHitlChallenge"},
    {ErrorCode::kStagingFailed, "StagingFailed"},
    {ErrorCode::kSessionUnavailable, "SessionUnavailable"},
    {ErrorCode::kNotQualified, "NotQualified"},
    {ErrorCode::kBlocked, "Blocked"},
    {ErrorCode::kSessionNotPaired, "SessionNotPaired"},
    {ErrorCode::kRoundsExhausted, "RoundsExhausted"},
    {ErrorCode::kUnknownAxis, "UnknownAxis"},
    {ErrorCode::kRoundNotReached, "RoundNotReached"},
    {ErrorCode::kOutOfScale, "OutOfScale"},
    {ErrorCode::kSessionIncomplete, "SessionIncomplete"},
}};

}  // namespace

std::string_view code_name(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Internal";
}

std::optional<ErrorCode> code_from_name(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return std::nullopt;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
    case ErrorCode::kUnknownSubmission:
    case ErrorCode::kUnknownRoute:
      return 404;
    case ErrorCode::kUnauthorized:
    case ErrorCode::kBlocked:
    case ErrorCode::kNotQualified:
      return 403;
    case ErrorCode::kRateLimited:
      return 429;
    case ErrorCode::kPayloadTooLarge:
      return 413;
    case ErrorCode::kPhaseClosed:
    case ErrorCode::kIllegalTransition:
    case ErrorCode::kLeaseExpired:
    case ErrorCode::kLeaseNotHeld:
    case ErrorCode::kSessionUnavailable:
    case ErrorCode::kSessionNotPaired:
    case ErrorCode::kRoundsExhausted:
    case ErrorCode::kRoundNotReached:
    case ErrorCode::kSessionIncomplete:
    case ErrorCode::kAmbiguous:
      return 409;
    case ErrorCode::kBrokerUnavailable:
    case ErrorCode::kSandboxUnavailable:
      return 503;
    case ErrorCode::kInternal:
    case ErrorCode::kEvaluatorCrashed:
    case ErrorCode::kEvaluatorTimeout:
    case ErrorCode::kAgentCrashed:
    case ErrorCode::kAgentTimeout:
    case ErrorCode::kStagingFailed:
    case ErrorCode::kFetchFailed:
    case ErrorCode::kAssetUnavailable:
      return 500;
    default:
      return 400;
  }
}

nlohmann::json Error::envelope() const {
  nlohmann::json err{{"code", code_name(code_)}, {"message", what()}};
  if (!details_.is_null()) err["details"] = details_;
  return {{"error", std::move(err)}};
}

}  // namespace gauntlet
