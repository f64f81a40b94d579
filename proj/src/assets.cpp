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

#include "gauntlet/assets.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "gauntlet/error.hpp"

namespace gauntlet {

std::string challenge_prefix(const std::string& challenge_id) {
  return "challenges/" + challenge_id + "/";
}

std::string challenge_member_key(const std::string& challenge_id, const std::string& member) {
  return challenge_prefix(challenge_id) + "bundle/" + member;
}

std::string challenge_index_key(const std::string& challenge_id) {
  return challenge_prefix(challenge_id) + "members.json";
}

std::string challenge_manifest_key(const std::string& challenge_id) {
  return challenge_prefix(challenge_id) + "manifest.json";
}

void publish_challenge_assets(const Bundle& bundle, BlobStore& blobs) {
  const auto& id = bundle.config.id;
  std::set<std::string> annotations;
  for (const auto& s : bundle.config.splits) {
    if (s.annotation_ref) annotations.insert(*s.annotation_ref);
  }
  nlohmann::json index = nlohmann::json::object();
  for (const auto& [name, member] : bundle.members) {
    if (name.ends_with('/') || name == kManifestName) continue;
    blobs.put(challenge_member_key(id, name), member.data,
              annotations.contains(name) ? BlobKind::kAnnotation : BlobKind::kBundle);
    index[name] = member.mode;
  }
  blobs.put(challenge_manifest_key(id), manifest_to_json(bundle.config).dump(2), BlobKind::kOther);
  blobs.put(challenge_index_key(id), index.dump(), BlobKind::kOther);
}

std::map<std::string, std::uint32_t> challenge_members(const std::string& challenge_id,
                                                       const BlobStore& blobs) {
  std::string text;
  try {
    text = blobs.get(challenge_index_key(challenge_id));
  } catch (const Error&) {
    throw Error(ErrorCode::kAssetUnavailable, "challenge '" + challenge_id + "' has no assets");
  }
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (!j.is_object()) throw Error(ErrorCode::kAssetUnavailable, "corrupt member index");
  std::map<std::string, std::uint32_t> out;
  for (const auto& [k, v] : j.items()) out[k] = v.get<std::uint32_t>();
  return out;
}

}  // namespace gauntlet
