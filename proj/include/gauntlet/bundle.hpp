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

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gauntlet/model.hpp"
#include "gauntlet/zip.hpp"

namespace gauntlet {

inline constexpr std::string_view kManifestName = "challenge.json";
inline constexpr std::size_t kMaxManifestBytes = 1 << 20;

// One broken invariant, located by a manifest field path such as
// "phase_splits[2].leaderboard".
struct Violation {
  std::string path;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

std::string to_string(const Violation& v);  // "path: message"

struct Bundle {
  ChallengeConfig config;
  std::map<std::string, zip::Member> members;  // keyed by member name

  bool has_member(const std::string& name) const { return members.contains(name); }
  // Members under a directory prefix ("envs/house1/").
  std::vector<const zip::Member*> members_under(const std::string& prefix) const;
};

// Structural manifest codec. from_json throws Error{kSchemaError} with the
// offending field path in the message and in details["path"]. It does not
// check cross-field invariants; see validate_config.
ChallengeConfig manifest_from_json(const nlohmann::json& manifest);
nlohmann::json manifest_to_json(const ChallengeConfig& config);

// Unzips and decodes the manifest without enforcing invariants. Used by
// lint, which wants to report every violation rather than the first.
Bundle read_bundle(std::string_view archive);

// All invariant violations, sorted by field path. Never throws.
std::vector<Violation> validate_config(const ChallengeConfig& config);
// validate_config plus checks that need the archive contents (entrypoint and
// annotation members exist).
std::vector<Violation> validate_bundle(const Bundle& bundle);
// Informational findings that do not make a config invalid.
std::vector<Violation> config_notices(const ChallengeConfig& config);

// read_bundle + validate_bundle. Throws Error{kSchemaError} naming the first
// violation; details["violations"] lists all of them.
Bundle parse_bundle(std::string_view archive);

// Writes the bundle back out as a ZIP with a freshly encoded manifest.
std::string serialize_bundle(const Bundle& bundle);

// Throws Error{kNotFound} or Error{kAmbiguous}.
const PhaseSplit& resolve_phase_split(const ChallengeConfig& config,
                                      std::string_view phase_codename,
                                      std::string_view split_codename);

}  // namespace gauntlet
