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

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gauntlet {

enum class BlobKind { kBundle, kAnnotation, kArtifact, kSnapshot, kLog, kOther };

std::string_view to_string(BlobKind kind);

struct BlobInfo {
  std::string key;
  BlobKind kind;
  std::uint64_t size;
};

// Directory-backed object store. Keys are slash-separated relative paths;
// every object is tagged with a kind so audits (e.g. "no annotation objects
// for this challenge") are a simple scan.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root);

  void put(const std::string& key, std::string_view data, BlobKind kind);
  // Throws Error{kNotFound}.
  std::string get(const std::string& key) const;
  bool exists(const std::string& key) const;
  std::filesystem::path path_of(const std::string& key) const;
  std::optional<BlobKind> kind_of(const std::string& key) const;
  std::vector<BlobInfo> list(std::string_view prefix = {}) const;
  void remove(const std::string& key);

  const std::filesystem::path& root() const { return root_; }

 private:
  void save_index_locked() const;

  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::map<std::string, BlobKind> kinds_;
};

}  // namespace gauntlet
