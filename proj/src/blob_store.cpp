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

#include "gauntlet/blob_store.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gauntlet/error.hpp"
#include "gauntlet/zip.hpp"

namespace gauntlet {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kKindNames[] = {"bundle", "annotation", "artifact",
                                           "snapshot", "log", "other"};

BlobKind kind_from_name(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
    if (kKindNames[i] == s) return static_cast<BlobKind>(i);
  }
  return BlobKind::kOther;
}

void check_key(const std::string& key) {
  if (!zip::is_safe_member_name(key) || key.back() == '/') {
    throw Error(ErrorCode::kBadRequest, "invalid blob key: " + key);
  }
}

}  // namespace

std::string_view to_string(BlobKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

BlobStore::BlobStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "objects");
  std::ifstream in(root_ / "index.json");
  if (in) {
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_object()) {
      for (const auto& [key, kind] : j.items()) {
        if (fs::exists(root_ / "objects" / key)) {
          kinds_[key] = kind_from_name(kind.get<std::string>());
        }
      }
    }
  }
}

void BlobStore::put(const std::string& key, std::string_view data, BlobKind kind) {
  check_key(key);
  const auto path = root_ / "objects" / key;
  fs::create_directories(path.parent_path());
  const auto tmp = path.string() + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::kInternal, "blob write failed: " + key);
  }
  fs::rename(tmp, path);
  std::lock_guard lock(mu_);
  kinds_[key] = kind;
  save_index_locked();
}

std::string BlobStore::get(const std::string& key) const {
  check_key(key);
  std::ifstream in(root_ / "objects" / key, std::ios::binary);
  if (!in || !exists(key)) throw Error(ErrorCode::kNotFound, "no blob " + key);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

bool BlobStore::exists(const std::string& key) const {
  std::lock_guard lock(mu_);
  return kinds_.contains(key);
}

fs::path BlobStore::path_of(const std::string& key) const {
  check_key(key);
  return root_ / "objects" / key;
}

std::optional<BlobKind> BlobStore::kind_of(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = kinds_.find(key);
  if (it == kinds_.end()) return std::nullopt;
  return it->second;
}

std::vector<BlobInfo> BlobStore::list(std::string_view prefix) const {
  std::vector<BlobInfo> out;
  std::lock_guard lock(mu_);
  for (auto it = kinds_.lower_bound(std::string(prefix)); it != kinds_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    std::error_code ec;
    const auto size = fs::file_size(root_ / "objects" / it->first, ec);
    out.push_back({it->first, it->second, ec ? 0 : static_cast<std::uint64_t>(size)});
  }
  return out;
}

void BlobStore::remove(const std::string& key) {
  check_key(key);
  std::lock_guard lock(mu_);
  kinds_.erase(key);
  std::error_code ec;
  fs::remove(root_ / "objects" / key, ec);
  save_index_locked();
}

void BlobStore::save_index_locked() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, kind] : kinds_) j[key] = to_string(kind);
  const auto tmp = root_ / "index.json.partial";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump();
  }
  fs::rename(tmp, root_ / "index.json");
}

}  // namespace gauntlet
