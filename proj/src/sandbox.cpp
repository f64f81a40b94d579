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

#include "gauntlet/sandbox.hpp"

#include <fcntl.h>
#include <grp.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/mount.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/statvfs.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include "gauntlet/error.hpp"

namespace gauntlet {

namespace fs = std::filesystem;

namespace {

// Held shared from fork until the child has exec'd (or failed), and held
// exclusively while a file destined for exec is open for writing.
std::shared_mutex fork_lock;

constexpr uid_t kNobody = 65534;
constexpr int kSetupFd = 3;

// Everything the forked child needs, materialized before fork so the child
// only issues system calls.
struct MountOp {
  std::string source;
  std::string target;
  unsigned long remount_flags = 0;  // nonzero: remount read-only with these
  bool writable = false;
};

struct ChildPlan {
  bool isolate = false;
  bool user_namespace = false;
  bool drop = false;
  std::string root;
  std::string workdir;
  std::string tmpfs_opts;
  std::string uid_map;
  std::string gid_map;
  std::vector<MountOp> mounts;
  // Mount points beneath /tmp, recreated inside the fresh tmpfs.
  std::vector<std::string> tmp_dirs;
  std::vector<std::string> tmp_files;
  std::vector<char*> argv;
  std::vector<char*> envp;
  ResourceLimits limits;
  int stdin_fd = -1;
  int stdout_fd = -1;
  int stderr_fd = -1;
  int setup_fd = -1;
};

void report(int fd, const char* what) {
  const char* err = strerror(errno);
  auto w = [fd](const char* s) {
    ssize_t r = ::write(fd, s, strlen(s));
    (void)r;
  };
  w(what);
  w(": ");
  w(err);
}

[[noreturn]] void fail(const char* what) {
  report(kSetupFd, what);
  _exit(127);
}

bool write_file(const char* path, const std::string& text) {
  int fd = ::open(path, O_WRONLY | O_CLOEXEC);
  if (fd < 0) return false;
  const bool ok = ::write(fd, text.data(), text.size()) == static_cast<ssize_t>(text.size());
  ::close(fd);
  return ok;
}

void set_limit(int resource, std::int64_t value) {
  if (value <= 0) return;
  rlimit rl{static_cast<rlim_t>(value), static_cast<rlim_t>(value)};
  setrlimit(resource, &rl);
}

[[noreturn]] void exec_program(const ChildPlan& p) {
  set_limit(RLIMIT_CPU, p.limits.cpu_seconds);
  set_limit(RLIMIT_AS, p.limits.memory_bytes);
  set_limit(RLIMIT_FSIZE, p.limits.max_file_bytes);
  set_limit(RLIMIT_NOFILE, p.limits.max_open_files);
  rlimit no_core{0, 0};
  setrlimit(RLIMIT_CORE, &no_core);
  if (p.drop) {
    if (setgroups(0, nullptr) != 0) fail("sandbox: setgroups");
    if (setgid(kNobody) != 0) fail("sandbox: setgid");
    // RLIMIT_NPROC is only enforced for unprivileged users.
    set_limit(RLIMIT_NPROC, p.limits.max_processes);
    if (setuid(kNobody) != 0) fail("sandbox: setuid");
  } else if (p.isolate) {
    set_limit(RLIMIT_NPROC, p.limits.max_processes);
  }
  prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0);
  if (p.isolate) prctl(PR_SET_PDEATHSIG, SIGKILL);
  execvpe(p.argv[0], p.argv.data(), p.envp.data());
  fail("exec");
}

[[noreturn]] void enter_root(const ChildPlan& p) {
  prctl(PR_SET_PDEATHSIG, SIGKILL);
  if (mount(nullptr, "/", nullptr, MS_REC | MS_PRIVATE, nullptr) != 0) {
    fail("sandbox: make mounts private");
  }
  const std::string tmp = p.root + "/tmp";
  if (mount("tmpfs", tmp.c_str(), "tmpfs", MS_NOSUID | MS_NODEV, p.tmpfs_opts.c_str()) != 0) {
    fail("sandbox: tmpfs");
  }
  for (const auto& d : p.tmp_dirs) {
    mkdir(d.c_str(), 0755);
    chmod(d.c_str(), 0755);
  }
  for (const auto& f : p.tmp_files) {
    const int fd = open(f.c_str(), O_CREAT | O_WRONLY | O_CLOEXEC, 0644);
    if (fd >= 0) ::close(fd);
  }
  for (const auto& m : p.mounts) {
    if (mount(m.source.c_str(), m.target.c_str(), nullptr, MS_BIND | MS_REC, nullptr) != 0) {
      fail("sandbox: bind mount");
    }
    if (!m.writable &&
        mount(nullptr, m.target.c_str(), nullptr,
              MS_REMOUNT | MS_BIND | MS_RDONLY | m.remount_flags, nullptr) != 0) {
      fail("sandbox: read-only remount");
    }
  }
  const std::string proc = p.root + "/proc";
  // A fresh proc only shows this pid namespace; hosts that refuse it still
  // get a working sandbox, just without /proc.
  mount("proc", proc.c_str(), "proc", MS_NOSUID | MS_NODEV | MS_NOEXEC, nullptr);
  if (chdir(p.root.c_str()) != 0) fail("sandbox: chdir root");
  if (chroot(".") != 0) fail("sandbox: chroot");
  if (chdir(p.workdir.c_str()) != 0) fail("sandbox: chdir workdir");
  exec_program(p);
}

[[noreturn]] void child_main(const ChildPlan& p) {
  setpgid(0, 0);
  // Lift every inherited descriptor clear of 0..3 before placing them, so
  // no dup2 below can clobber a source that has not been moved yet.
  const int setup = fcntl(p.setup_fd, F_DUPFD_CLOEXEC, 16);
  const int in = fcntl(p.stdin_fd, F_DUPFD_CLOEXEC, 16);
  const int out = fcntl(p.stdout_fd, F_DUPFD_CLOEXEC, 16);
  const int err = fcntl(p.stderr_fd, F_DUPFD_CLOEXEC, 16);
  if (setup < 0 || dup2(setup, kSetupFd) < 0) _exit(127);
  fcntl(kSetupFd, F_SETFD, FD_CLOEXEC);
  if (in < 0 || out < 0 || err < 0 || dup2(in, 0) < 0 || dup2(out, 1) < 0 || dup2(err, 2) < 0) {
    fail("dup2");
  }
  syscall(SYS_close_range, kSetupFd + 1, ~0U, 0);
  for (int sig = 1; sig < NSIG; ++sig) signal(sig, SIG_DFL);
  sigset_t none;
  sigemptyset(&none);
  sigprocmask(SIG_SETMASK, &none, nullptr);

  if (!p.isolate) {
    if (!p.workdir.empty() && chdir(p.workdir.c_str()) != 0) fail("chdir");
    exec_program(p);
  }

  int flags = CLONE_NEWNS | CLONE_NEWNET | CLONE_NEWPID | CLONE_NEWIPC | CLONE_NEWUTS;
  if (p.user_namespace) flags |= CLONE_NEWUSER;
  if (unshare(flags) != 0) fail("sandbox: unshare");
  if (p.user_namespace) {
    write_file("/proc/self/setgroups", "deny");
    if (!write_file("/proc/self/uid_map", p.uid_map) ||
        !write_file("/proc/self/gid_map", p.gid_map)) {
      fail("sandbox: id maps");
    }
  }
  const pid_t init = fork();
  if (init < 0) fail("sandbox: fork");
  if (init == 0) enter_root(p);

  // Supervisor: holds the namespace open until its init exits, then mirrors
  // the exit status. Killing the supervisor kills init via PDEATHSIG, which
  // in turn tears down every process in the namespace.
  close(0);
  close(1);
  close(kSetupFd);
  int status = 0;
  while (waitpid(init, &status, 0) < 0 && errno == EINTR) {
  }
  if (WIFEXITED(status)) _exit(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) _exit(128 + WTERMSIG(status));
  _exit(127);
}

unsigned long locked_flags(const fs::path& source) {
  struct statvfs sv{};
  if (statvfs(source.c_str(), &sv) != 0) return 0;
  unsigned long flags = 0;
  if (sv.f_flag & ST_NOSUID) flags |= MS_NOSUID;
  if (sv.f_flag & ST_NODEV) flags |= MS_NODEV;
  if (sv.f_flag & ST_NOEXEC) flags |= MS_NOEXEC;
  if (sv.f_flag & ST_NOATIME) flags |= MS_NOATIME;
  if (sv.f_flag & ST_NODIRATIME) flags |= MS_NODIRATIME;
  if (sv.f_flag & ST_RELATIME) flags |= MS_RELATIME;
  return flags;
}

fs::path sandbox_base() {
  auto base = fs::temp_directory_path() / "gauntlet-sandbox";
  fs::create_directories(base);
  return base;
}

// Creates the mount point for `source` at root/inside.
void make_mount_point(const fs::path& root, const fs::path& inside, const fs::path& source) {
  const fs::path target = root / inside.relative_path();
  if (fs::is_directory(source)) {
    fs::create_directories(target);
  } else {
    fs::create_directories(target.parent_path());
    std::ofstream touch(target);
  }
  for (fs::path p = target; p != root && p.has_parent_path(); p = p.parent_path()) {
    std::error_code ec;
    if (fs::is_directory(p, ec)) chmod(p.c_str(), 0755);
  }
}

void make_pipe(int fds[2], int flags) {
  if (pipe2(fds, flags) != 0) {
    throw Error(ErrorCode::kInternal, std::string("pipe: ") + strerror(errno));
  }
}

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

bool probe_isolation() {
  SandboxPolicy policy;
  policy.isolation = Isolation::kRequired;
  try {
    auto proc = Process::spawn({"/bin/true"}, policy);
    auto done = proc.wait(std::chrono::seconds(10), 1024, 1024);
    return done.exit_code == 0;
  } catch (const Error&) {
    return false;
  }
}

std::once_flag g_sigpipe_once;
std::once_flag g_probe_once;
bool g_isolation_supported = false;
thread_local bool t_probing = false;

}  // namespace

bool isolation_supported() {
  if (t_probing) return true;
  std::call_once(g_probe_once, [] {
    t_probing = true;
    g_isolation_supported = probe_isolation();
    t_probing = false;
  });
  return g_isolation_supported;
}

Process Process::spawn(const std::vector<std::string>& argv, const SandboxPolicy& policy) {
  std::call_once(g_sigpipe_once, [] { signal(SIGPIPE, SIG_IGN); });
  if (argv.empty()) throw Error(ErrorCode::kBadRequest, "empty argv");

  bool isolate = false;
  if (policy.isolation == Isolation::kRequired) {
    if (!isolation_supported()) {
      throw Error(ErrorCode::kSandboxUnavailable, "namespaces unavailable on this host");
    }
    isolate = true;
  } else if (policy.isolation == Isolation::kBestEffort) {
    isolate = isolation_supported();
  }

  Process proc;
  proc.isolated_ = isolate;
  const auto base = sandbox_base();

  std::string err_template = (base / "stderr-XXXXXX").string();
  int stderr_fd = mkstemp(err_template.data());
  if (stderr_fd < 0) throw Error(ErrorCode::kInternal, "cannot create stderr capture");
  proc.stderr_path_ = err_template;

  ChildPlan plan;
  plan.isolate = isolate;
  plan.limits = policy.limits;
  plan.workdir = policy.working_dir.empty() ? "/" : policy.working_dir.string();
  const bool root_user = geteuid() == 0;
  plan.drop = isolate && root_user && policy.drop_privileges;

  if (isolate) {
    std::string root_template = (base / "root-XXXXXX").string();
    if (!mkdtemp(root_template.data())) {
      ::close(stderr_fd);
      throw Error(ErrorCode::kSandboxUnavailable, "cannot create sandbox root");
    }
    proc.root_dir_ = root_template;
    const fs::path root = root_template;
    chmod(root.c_str(), 0755);
    plan.root = root.string();
    plan.user_namespace = !root_user;
    plan.uid_map = "0 " + std::to_string(getuid()) + " 1";
    plan.gid_map = "0 " + std::to_string(getgid()) + " 1";
    plan.tmpfs_opts = "size=" + std::to_string(policy.tmpfs_bytes) + ",mode=1777";

    for (const char* sys : {"/usr", "/bin", "/sbin", "/lib", "/lib32", "/lib64", "/libx32"}) {
      std::error_code ec;
      const fs::path p(sys);
      if (fs::is_symlink(p, ec)) {
        fs::create_directory_symlink(fs::read_symlink(p), root / p.relative_path(), ec);
      } else if (fs::is_directory(p, ec)) {
        make_mount_point(root, p, p);
        plan.mounts.push_back({p.string(), (root / p.relative_path()).string(),
                               locked_flags(p), false});
      }
    }
    for (const char* file : {"/etc/ld.so.cache", "/etc/localtime"}) {
      std::error_code ec;
      if (fs::is_regular_file(file, ec)) {
        make_mount_point(root, file, file);
        plan.mounts.push_back({file, (root / fs::path(file).relative_path()).string(),
                               locked_flags(file), false});
      }
    }
    for (const char* dev : {"/dev/null", "/dev/zero", "/dev/urandom", "/dev/random"}) {
      std::error_code ec;
      if (fs::exists(dev, ec)) {
        make_mount_point(root, dev, dev);
        plan.mounts.push_back({dev, (root / fs::path(dev).relative_path()).string(), 0, true});
      }
    }
    for (const auto& m : policy.mounts) {
      const fs::path inside = m.inside.empty() ? m.host : m.inside;
      if (!fs::exists(m.host)) {
        ::close(stderr_fd);
        proc.cleanup();
        throw Error(ErrorCode::kAssetUnavailable, "mount source missing: " + m.host.string());
      }
      make_mount_point(root, inside, m.host);
      if (const auto rel = inside.lexically_relative("/tmp");
          !rel.empty() && *rel.begin() != ".." && rel != ".") {
        fs::path at = root / "tmp";
        std::size_t left = std::distance(rel.begin(), rel.end());
        for (const auto& part : rel) {
          at /= part;
          if (--left == 0 && !fs::is_directory(m.host)) {
            plan.tmp_files.push_back(at.string());
          } else {
            plan.tmp_dirs.push_back(at.string());
          }
        }
      }
      if (m.writable && plan.drop) {
        if (chown(m.host.c_str(), kNobody, kNobody) != 0) {
          // Best effort: the mount stays usable for reading.
        }
      }
      plan.mounts.push_back({m.host.string(), (root / inside.relative_path()).string(),
                             locked_flags(m.host), m.writable});
    }
    fs::create_directories(root / "tmp");
    fs::create_directories(root / "proc");
    fs::create_directories(root / fs::path(plan.workdir).relative_path());
    chmod((root / "tmp").c_str(), 01777);
  }

  std::vector<std::string> env_strings;
  std::map<std::string, std::string> env = policy.env;
  env.try_emplace("PATH", "/usr/local/bin:/usr/bin:/bin");
  env.try_emplace("HOME", "/tmp");
  env.try_emplace("LANG", "C.UTF-8");
  for (const auto& [k, v] : env) env_strings.push_back(k + "=" + v);
  std::vector<std::string> args = argv;
  for (auto& a : args) plan.argv.push_back(a.data());
  plan.argv.push_back(nullptr);
  for (auto& e : env_strings) plan.envp.push_back(e.data());
  plan.envp.push_back(nullptr);

  std::shared_lock fork_guard(fork_lock);
  int in_pipe[2], out_pipe[2], setup_pipe[2];
  make_pipe(in_pipe, O_CLOEXEC);
  make_pipe(out_pipe, O_CLOEXEC);
  make_pipe(setup_pipe, O_CLOEXEC);
  plan.stdin_fd = in_pipe[0];
  plan.stdout_fd = out_pipe[1];
  plan.stderr_fd = stderr_fd;
  plan.setup_fd = setup_pipe[1];

  const pid_t pid = fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], setup_pipe[0],
                   setup_pipe[1], stderr_fd}) {
      ::close(fd);
    }
    proc.cleanup();
    throw Error(ErrorCode::kInternal, std::string("fork: ") + strerror(errno));
  }
  if (pid == 0) child_main(plan);

  proc.pid_ = pid;
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(setup_pipe[1]);
  ::close(stderr_fd);
  proc.stdin_fd_ = in_pipe[1];
  proc.stdout_fd_ = out_pipe[0];
  fcntl(proc.stdin_fd_, F_SETFL, O_NONBLOCK);
  fcntl(proc.stdout_fd_, F_SETFL, O_NONBLOCK);

  // The setup pipe closes on successful exec; anything written to it is a
  // setup failure report.
  std::string setup_error;
  char buf[512];
  for (;;) {
    const ssize_t n = ::read(setup_pipe[0], buf, sizeof buf);
    if (n > 0) {
      setup_error.append(buf, static_cast<std::size_t>(n));
    } else if (n == 0 || errno != EINTR) {
      break;
    }
  }
  ::close(setup_pipe[0]);
  fork_guard.unlock();
  if (!setup_error.empty()) {
    proc.kill();
    if (setup_error.rfind("sandbox:", 0) == 0) {
      throw Error(ErrorCode::kSandboxUnavailable, setup_error);
    }
    throw Error(ErrorCode::kEntrypointInvalid, "cannot execute " + argv[0] + ": " + setup_error);
  }
  return proc;
}

Process::Process(Process&& o) noexcept { *this = std::move(o); }

Process& Process::operator=(Process&& o) noexcept {
  if (this != &o) {
    cleanup();
    pid_ = std::exchange(o.pid_, -1);
    isolated_ = o.isolated_;
    reaped_ = std::exchange(o.reaped_, true);
    status_ = o.status_;
    stdin_fd_ = std::exchange(o.stdin_fd_, -1);
    stdout_fd_ = std::exchange(o.stdout_fd_, -1);
    pending_ = std::move(o.pending_);
    stderr_path_ = std::exchange(o.stderr_path_, {});
    root_dir_ = std::exchange(o.root_dir_, {});
  }
  return *this;
}

Process::~Process() { cleanup(); }

void Process::cleanup() {
  if (pid_ > 0 && !reaped_) kill();
  close_fd(stdin_fd_);
  close_fd(stdout_fd_);
  std::error_code ec;
  if (!stderr_path_.empty()) fs::remove(stderr_path_, ec);
  if (!root_dir_.empty()) fs::remove_all(root_dir_, ec);
  stderr_path_.clear();
  root_dir_.clear();
}

bool Process::write(std::string_view data, Duration timeout) {
  if (stdin_fd_ < 0) return false;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!data.empty()) {
    const ssize_t n = ::write(stdin_fd_, data.data(), data.size());
    if (n > 0) {
      data.remove_prefix(static_cast<std::size_t>(n));
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    if (n < 0 && errno != EAGAIN) return false;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return false;
    pollfd pfd{stdin_fd_, POLLOUT, 0};
    poll(&pfd, 1, static_cast<int>(left.count()));
  }
  return true;
}

void Process::close_stdin() { close_fd(stdin_fd_); }

Process::ReadStatus Process::read_line(std::string& line, Duration timeout,
                                       std::size_t max_bytes) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto nl = pending_.find('\n'); nl != std::string::npos) {
      if (nl > max_bytes) return ReadStatus::kTooLong;
      line = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return ReadStatus::kLine;
    }
    if (pending_.size() > max_bytes) return ReadStatus::kTooLong;
    if (stdout_fd_ < 0) return ReadStatus::kEof;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return ReadStatus::kTimeout;
    pollfd pfd{stdout_fd_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc == 0) return ReadStatus::kTimeout;
    char buf[8192];
    const ssize_t n = ::read(stdout_fd_, buf, sizeof buf);
    if (n > 0) {
      pending_.append(buf, static_cast<std::size_t>(n));
    } else if (n == 0) {
      close_fd(stdout_fd_);
    } else if (errno != EAGAIN && errno != EINTR) {
      close_fd(stdout_fd_);
    }
  }
}

Process::Completion Process::wait(Duration timeout, std::size_t max_out, std::size_t max_err,
                                  std::stop_token stop) {
  Completion c;
  close_stdin();
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  c.out = std::move(pending_);
  pending_.clear();
  if (c.out.size() > max_out) {
    c.out.resize(max_out);
    c.output_truncated = true;
  }
  auto expired = [&] { return std::chrono::steady_clock::now() >= deadline; };
  while (stdout_fd_ >= 0) {
    if (stop.stop_requested()) {
      c.cancelled = true;
      break;
    }
    if (expired()) {
      c.timed_out = true;
      break;
    }
    pollfd pfd{stdout_fd_, POLLIN, 0};
    const int rc = poll(&pfd, 1, 50);
    if (rc <= 0) continue;
    char buf[16384];
    const ssize_t n = ::read(stdout_fd_, buf, sizeof buf);
    if (n > 0) {
      const auto room = max_out - std::min(max_out, c.out.size());
      c.out.append(buf, std::min<std::size_t>(room, static_cast<std::size_t>(n)));
      if (static_cast<std::size_t>(n) > room) c.output_truncated = true;
    } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
      close_fd(stdout_fd_);
    }
  }
  while (!c.timed_out && !c.cancelled) {
    reap(false);
    if (reaped_) break;
    if (stop.stop_requested()) {
      c.cancelled = true;
    } else if (expired()) {
      c.timed_out = true;
    } else {
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }
  if (c.timed_out || c.cancelled) kill();
  reap(true);
  if (WIFEXITED(status_)) {
    const int code = WEXITSTATUS(status_);
    if (isolated_ && code > 128 && code < 128 + NSIG) {
      c.term_signal = code - 128;
    } else {
      c.exit_code = code;
    }
  } else if (WIFSIGNALED(status_)) {
    c.term_signal = WTERMSIG(status_);
  }
  c.err = stderr_text(max_err);
  return c;
}

void Process::kill() {
  if (pid_ <= 0 || reaped_) return;
  ::kill(-pid_, SIGKILL);
  ::kill(pid_, SIGKILL);
  reap(true);
}

bool Process::running() {
  reap(false);
  return pid_ > 0 && !reaped_;
}

void Process::reap(bool block) {
  if (pid_ <= 0 || reaped_) return;
  for (;;) {
    const pid_t r = waitpid(pid_, &status_, block ? 0 : WNOHANG);
    if (r == pid_) {
      reaped_ = true;
      // Stray descendants in non-isolated mode share the process group.
      if (!isolated_) ::kill(-pid_, SIGKILL);
      return;
    }
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) reaped_ = true;
    return;
  }
}

std::string Process::stderr_text(std::size_t max_bytes) {
  if (stderr_path_.empty()) return {};
  std::ifstream in(stderr_path_, std::ios::binary);
  std::string out(max_bytes, '\0');
  in.read(out.data(), static_cast<std::streamsize>(max_bytes));
  out.resize(static_cast<std::size_t>(in.gcount()));
  return out;
}

void write_executable_file(const fs::path& path, std::string_view data, mode_t mode) {
  std::unique_lock guard(fork_lock);
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (fd < 0) throw Error(ErrorCode::kInternal, "cannot write " + path.string());
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      ::close(fd);
      throw Error(ErrorCode::kInternal, "cannot write " + path.string());
    }
    done += static_cast<std::size_t>(n);
  }
  ::fchmod(fd, mode);
  if (::close(fd) != 0) throw Error(ErrorCode::kInternal, "cannot write " + path.string());
}

}  // namespace gauntlet
