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
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gauntlet::zip {

struct Member {
  std::string name;
  std::string data;
  std::uint32_t mode = 0644;  // unix permission bits

  bool executable() const { return (mode & 0111) != 0; }
};

struct ReadLimits {
  std::uint64_t max_member_bytes = 2ULL << 30;  // 2 GiB
  std::uint64_t max_total_bytes = 8ULL << 30;
};

// Reads every file member of a ZIP archive (stored or deflated). Directory
// entries are skipped. Throws Error{kMalformedArchive} for anything that is
// not a well-formed archive, Error{kUnsafePath} for traversal or absolute
// member names, and Error{kPayloadTooLarge} when a member exceeds the limit.
std::vector<Member> read_archive(std::string_view bytes,
                                 const ReadLimits& limits = {});

// True when the name is a relative path with no ".." component, no leading
// slash, no drive letter and no backslash.
bool is_safe_member_name(std::string_view name);

class Writer {
 public:
  void add(std::string name, std::string data, std::uint32_t mode = 0644,
           bool compress = true);
  std::string finish() const;

 private:
  std::vector<Member> members_;
  std::vector<bool> compress_;
};

}  // namespace gauntlet::zip
