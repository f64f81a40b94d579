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

// Where a published challenge's bundle lives in the blob store.
//
//   challenges/<id>/manifest.json        the parsed manifest
//   challenges/<id>/members.json         {"<member>": <unix mode>, ...}
//   challenges/<id>/bundle/<member>      one blob per bundle member
//
// Members referenced as split annotations are stored with kind
// `annotation`, everything else with kind `bundle`.

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "gauntlet/blob_store.hpp"
#include "gauntlet/bundle.hpp"

namespace gauntlet {

std::string challenge_prefix(const std::string& challenge_id);
std::string challenge_member_key(const std::string& challenge_id, const std::string& member);
std::string challenge_index_key(const std::string& challenge_id);
std::string challenge_manifest_key(const std::string& challenge_id);

void publish_challenge_assets(const Bundle& bundle, BlobStore& blobs);

// member -> mode. Throws Error{kAssetUnavailable} when the challenge has not
// been published.
std::map<std::string, std::uint32_t> challenge_members(const std::string& challenge_id,
                                                       const BlobStore& blobs);

}  // namespace gauntlet
