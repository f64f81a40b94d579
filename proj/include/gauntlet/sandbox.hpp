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

// Restricted subprocesses for organizer evaluators, environments and
// participant agents.
//
// An isolated process runs in fresh mount, pid, network and ipc namespaces.
// Its filesystem root is an empty directory into which only the system
// runtime (/usr and friends, read-only), a private /tmp and the explicitly
// listed mounts are bound; everything else on the host, including platform
// state and other challenges' assets, is simply absent. When started as
// root the process also drops to an unprivileged uid so per-user process
// limits apply.

#pragma once

#include <sys/types.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "gauntlet/clock.hpp"

namespace gauntlet {

struct Mount {
  std::filesystem::path host;
  std::filesystem::path inside;  // defaults to the host path when empty
  bool writable = false;
};

struct ResourceLimits {
  std::int64_t cpu_seconds = 600;
  std::int64_t memory_bytes = 4LL << 30;
  std::int64_t max_processes = 64;
  std::int64_t max_file_bytes = 64LL << 20;
  std::int64_t max_open_files = 256;
};

enum class Isolation {
  kNone,        // plain child process with rlimits
  kBestEffort,  // namespaces when the host allows them, otherwise kNone
  kRequired,    // namespaces or Error{kSandboxUnavailable}
};

struct SandboxPolicy {
  Isolation isolation = Isolation::kBestEffort;
  std::vector<Mount> mounts;
  std::filesystem::path working_dir;  // cwd, as seen inside
  ResourceLimits limits;
  bool drop_privileges = true;
  std::map<std::string, std::string> env;
  std::int64_t tmpfs_bytes = 64LL << 20;
};

// True when this host can create the namespaces an isolated process needs.
// Probed once and cached.
bool isolation_supported();

class Process {
 public:
  enum class ReadStatus { kLine, kEof, kTimeout, kTooLong };

  struct Completion {
    int exit_code = -1;  // -1 when killed by a signal
    int term_signal = 0;
    bool timed_out = false;
    bool cancelled = false;
    bool output_truncated = false;
    std::string out;
    std::string err;
  };

  // Throws Error{kSandboxUnavailable} when isolation is required but cannot
  // be set up, Error{kInternal} when the program cannot be executed.
  static Process spawn(const std::vector<std::string>& argv, const SandboxPolicy& policy);

  Process(Process&&) noexcept;
  Process& operator=(Process&&) noexcept;
  Process(const Process&) = delete;
  Process& operator=(const Process&) = delete;
  ~Process();

  pid_t pid() const { return pid_; }
  bool isolated() const { return isolated_; }

  // Writes to the child's stdin. Returns false if the child stopped reading
  // (closed pipe or no progress before the deadline).
  bool write(std::string_view data, Duration timeout);
  void close_stdin();

  // Reads one '\n'-terminated line from stdout, without the terminator.
  ReadStatus read_line(std::string& line, Duration timeout, std::size_t max_bytes);

  // Closes stdin and collects all stdout until exit. Output beyond max_out
  // is discarded and flagged; the process is killed on timeout or when the
  // stop token fires.
  Completion wait(Duration timeout, std::size_t max_out, std::size_t max_err,
                  std::stop_token stop = {});

  // Kills the whole process tree and reaps it. Idempotent.
  void kill();
  // Non-blocking liveness check.
  bool running();
  // Reaps (after kill or exit) and returns the captured stderr.
  std::string stderr_text(std::size_t max_bytes);

 private:
  Process() = default;
  void reap(bool block);
  void cleanup();

  pid_t pid_ = -1;
  bool isolated_ = false;
  bool reaped_ = false;
  int status_ = 0;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  std::string pending_;  // stdout bytes read past the last returned line
  std::filesystem::path stderr_path_;
  std::filesystem::path root_dir_;  // sandbox root on the host, removed on exit
};

// Writes a file that a sandboxed program may later execute. Serialized
// against Process::spawn: a child forked while the file is still open for
// writing would keep it open and make exec fail with ETXTBSY.
void write_executable_file(const std::filesystem::path& path, std::string_view data,
                           mode_t mode);

}  // namespace gauntlet
