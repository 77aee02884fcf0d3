#include "sae/process_backend.hpp"

#include "sae/error.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/mount.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/statvfs.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

extern char** environ;

namespace sae {

namespace fs = std::filesystem;

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::exited: return "exited";
        case Termination::cpu_limit: return "cpu_limit";
        case Termination::wall_limit: return "wall_limit";
        case Termination::memory_limit: return "memory_limit";
        case Termination::output_limit: return "output_limit";
        case Termination::sandbox_failure: return "sandbox_failure";
    }
    return "unknown";
}

struct ProcessBackend::State {
    ProcessBackendOptions options;
    std::mutex mu;
    std::condition_variable cv;
    std::size_t active = 0;

    void acquire() {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return active < std::max<std::size_t>(1, options.max_concurrent); });
        ++active;
    }
    void release() {
        {
            std::lock_guard lock(mu);
            --active;
        }
        cv.notify_one();
    }
};

namespace {

constexpr std::string_view kGuestWorkDir = "/box";

bool running_as_root() { return ::geteuid() == 0; }

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(Fd&& o) noexcept : fd(std::exchange(o.fd, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        reset();
        fd = std::exchange(o.fd, -1);
        return *this;
    }
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

std::pair<Fd, Fd> make_pipe() {
    int p[2];
    if (::pipe2(p, O_CLOEXEC) != 0) throw SandboxError(std::string("pipe2: ") + std::strerror(errno));
    return {Fd(p[0]), Fd(p[1])};
}

unsigned long locked_flags(const std::string& path) {
    struct statvfs sv{};
    if (::statvfs(path.c_str(), &sv) != 0) return 0;
    unsigned long f = 0;
    if (sv.f_flag & ST_NOSUID) f |= MS_NOSUID;
    if (sv.f_flag & ST_NODEV) f |= MS_NODEV;
    if (sv.f_flag & ST_NOEXEC) f |= MS_NOEXEC;
    if (sv.f_flag & ST_NOATIME) f |= MS_NOATIME;
    if (sv.f_flag & ST_NODIRATIME) f |= MS_NODIRATIME;
    if (sv.f_flag & ST_RELATIME) f |= MS_RELATIME;
    return f;
}

bool path_within(const std::string& path, std::string_view dir) {
    return path == dir || (path.size() > dir.size() && path.starts_with(dir) && path[dir.size()] == '/');
}

void write_file(const fs::path& p, std::string_view data, unsigned mode) {
    fs::create_directories(p.parent_path());
    int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC | O_NOFOLLOW, mode);
    if (fd < 0) throw SandboxError("cannot write " + p.string() + ": " + std::strerror(errno));
    Fd guard(fd);
    while (!data.empty()) {
        ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw SandboxError("cannot write " + p.string() + ": " + std::strerror(errno));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    ::fchmod(fd, mode);
}

// One bind mount performed inside the child's mount namespace.
struct BindOp {
    std::string source;
    std::string target;
    bool read_only = true;
    unsigned long extra_flags = 0;
};

// Child-side failure report: "<step>\0<errno>" written to the error pipe.
[[noreturn]] void child_fail(int err_fd, const char* step) {
    int e = errno;
    char buf[128];
    std::size_t len = 0;
    for (const char* p = step; *p && len < 100; ++p) buf[len++] = *p;
    buf[len++] = ':';
    char digits[16];
    int nd = 0;
    int v = e < 0 ? -e : e;
    do {
        digits[nd++] = static_cast<char>('0' + v % 10);
        v /= 10;
    } while (v && nd < 15);
    while (nd) buf[len++] = digits[--nd];
    [[maybe_unused]] auto n = ::write(err_fd, buf, len);
    ::_exit(127);
}

bool write_proc(const char* path, const char* data) {
    int fd = ::open(path, O_WRONLY | O_CLOEXEC);
    if (fd < 0) return false;
    auto len = std::strlen(data);
    bool ok = ::write(fd, data, len) == static_cast<ssize_t>(len);
    ::close(fd);
    return ok;
}

struct ProcSample {
    double cpu = 0.0;
    std::uint64_t rss = 0;
    bool ok = false;
};

ProcSample sample_proc(pid_t pid) {
    ProcSample s;
    char path[64];
    std::snprintf(path, sizeof path, "/proc/%d/stat", static_cast<int>(pid));
    std::ifstream in(path);
    std::string content;
    if (!std::getline(in, content)) return s;
    auto close = content.rfind(')');
    if (close == std::string::npos) return s;
    std::istringstream fields(content.substr(close + 2));
    std::vector<std::string> f;
    std::string tok;
    while (fields >> tok) f.push_back(tok);
    // fields after ')' start at index 3 (state); utime=14, stime=15, cutime=16, cstime=17, rss=24
    auto at = [&](int field) -> long long {
        std::size_t idx = static_cast<std::size_t>(field - 3);
        return idx < f.size() ? std::atoll(f[idx].c_str()) : 0;
    };
    static const long ticks = ::sysconf(_SC_CLK_TCK);
    static const long page = ::sysconf(_SC_PAGESIZE);
    s.cpu = static_cast<double>(at(14) + at(15) + at(16) + at(17)) / static_cast<double>(ticks);
    s.rss = static_cast<std::uint64_t>(at(24)) * static_cast<std::uint64_t>(page);
    s.ok = true;
    return s;
}

class ProcessSandbox final : public Sandbox {
public:
    ProcessSandbox(std::shared_ptr<ProcessBackend::State> state, SandboxPolicy policy)
        : state_(std::move(state)), policy_(std::move(policy)) {}

    ~ProcessSandbox() override { teardown(); }

    void setup() {
        const auto& opt = state_->options;
        std::error_code ec;
        fs::create_directories(opt.work_root, ec);
        if (ec) throw SandboxError("cannot create sandbox root " + opt.work_root.string() + ": " + ec.message());
        std::string templ = (opt.work_root / "box-XXXXXX").string();
        if (!::mkdtemp(templ.data())) throw SandboxError(std::string("mkdtemp: ") + std::strerror(errno));
        box_ = templ;
        ::chmod(box_.c_str(), 0755);

        drop_privileges_ = running_as_root();
        fs::create_directories(work_dir());
        fs::create_directories(root_dir());
        fs::create_directories(box_ / "tmp");
        fs::create_directories(box_ / "io");
        ::chmod(root_dir().c_str(), 0755);
        ::chmod((box_ / "tmp").c_str(), 01777);
        if (drop_privileges_) {
            own(work_dir());
            own(box_ / "tmp");
        }

        for (const auto& m : policy_.mounts) {
            if (!fs::exists(m.host_path, ec)) throw SandboxError("mount source missing: " + m.host_path);
            check_guest_path(m.guest_path);
        }

        std::vector<std::string> lib_paths;
        for (const auto& id : policy_.dependencies) {
            std::optional<Bundle> bundle;
            try {
                bundle = opt.bundles.find(id);
            } catch (const std::exception& e) {
                throw SandboxError("dependency bundle '" + id + "' unreadable: " + e.what());
            }
            if (!bundle) throw SandboxError("unknown dependency bundle '" + id + "'");
            check_guest_path(bundle->install_path);
            auto dest = box_ / "deps" / id;
            for (const auto& f : bundle->files) write_file(dest / f.path, f.data, (f.mode & 0111) ? 0755 : 0644);
            fs::create_directories(dest);
            binds_tail_.push_back({dest.string(), guest(bundle->install_path), true, 0});
            lib_paths.push_back(bundle->install_path);
        }

        for (const auto& m : policy_.mounts) {
            binds_tail_.push_back({fs::path(m.host_path).string(), guest(m.guest_path), m.read_only, 0});
        }

        build_skeleton();
        build_environment(lib_paths);
    }

    void put_file(const std::string& path, std::string_view data, bool executable) override {
        ensure_live();
        auto rel = fs::path(path).lexically_normal();
        if (rel.is_absolute() || rel.empty() || *rel.begin() == "..") throw InvalidArgument("bad sandbox path " + path);
        auto dest = work_dir() / rel;
        write_file(dest, data, executable ? 0755 : 0644);
        if (drop_privileges_) {
            for (auto p = dest; p != work_dir() && p.has_relative_path(); p = p.parent_path()) own(p);
        }
    }

    std::map<std::string, std::string> files() const override {
        std::map<std::string, std::string> out;
        std::error_code ec;
        for (auto it = fs::recursive_directory_iterator(work_dir(), ec); !ec && it != fs::recursive_directory_iterator();
             it.increment(ec)) {
            if (!it->is_regular_file(ec) || it->is_symlink(ec)) continue;
            std::ifstream in(it->path(), std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            out[fs::relative(it->path(), work_dir()).generic_string()] = std::move(ss).str();
        }
        return out;
    }

    ExecutionOutcome execute(const std::vector<std::string>& argv, std::optional<std::string_view> stdin_data) override;

    void teardown() noexcept override {
        if (torn_down_) return;
        torn_down_ = true;
        if (!box_.empty()) {
            std::error_code ec;
            fs::remove_all(box_, ec);
            if (ec) spdlog::warn("sandbox teardown: cannot remove {}: {}", box_.string(), ec.message());
        }
        if (slot_held_) {
            state_->release();
            slot_held_ = false;
        }
    }

    const SandboxPolicy& policy() const override { return policy_; }

    void hold_slot() { slot_held_ = true; }

private:
    fs::path work_dir() const { return box_ / "work"; }
    fs::path root_dir() const { return box_ / "root"; }
    std::string guest(const std::string& p) const { return (root_dir() / fs::path(p).relative_path()).string(); }

    void own(const fs::path& p) const {
        if (::lchown(p.c_str(), state_->options.run_uid, state_->options.run_gid) != 0)
            spdlog::debug("lchown {}: {}", p.string(), std::strerror(errno));
    }

    void ensure_live() const {
        if (torn_down_) throw SandboxError("sandbox already torn down");
    }

    void check_guest_path(const std::string& g) const {
        auto norm = fs::path(g).lexically_normal().string();
        if (norm.empty() || norm.front() != '/' || norm == "/")
            throw SandboxError("guest path '" + g + "' must be an absolute path below /");
        for (const auto& part : fs::path(g))
            if (part == "..") throw SandboxError("guest path '" + g + "' must not contain '..'");
        std::vector<std::string> reserved(state_->options.system_dirs.begin(), state_->options.system_dirs.end());
        for (auto r : {"/box", "/dev", "/proc", "/tmp"}) reserved.emplace_back(r);
        for (const auto& r : reserved)
            if (path_within(norm, r)) throw SandboxError("guest path '" + g + "' collides with reserved " + r);
    }

    void build_skeleton() {
        const auto root = root_dir();
        // The root itself is bound over itself first and made read-only last.
        binds_head_.push_back({root.string(), root.string(), false, 0});
        for (const auto& dir : state_->options.system_dirs) {
            struct stat st{};
            if (::lstat(dir.c_str(), &st) != 0) continue;
            auto target = root / fs::path(dir).relative_path();
            if (S_ISLNK(st.st_mode)) {
                std::error_code ec;
                auto link = fs::read_symlink(dir, ec);
                if (!ec) fs::create_symlink(link, target, ec);
            } else if (S_ISDIR(st.st_mode)) {
                fs::create_directories(target);
                binds_head_.push_back({dir, target.string(), true, locked_flags(dir)});
            }
        }
        fs::create_directories(root / "dev");
        for (auto dev : {"null", "zero", "random", "urandom"}) {
            auto host = std::string("/dev/") + dev;
            if (!fs::exists(host)) continue;
            write_file(root / "dev" / dev, "", 0666);
            binds_head_.push_back({host, (root / "dev" / dev).string(), false, 0});
        }
        fs::create_directories(root / "tmp");
        binds_head_.push_back({(box_ / "tmp").string(), (root / "tmp").string(), false, 0});
        fs::create_directories(root / fs::path(kGuestWorkDir).relative_path());
        binds_head_.push_back({work_dir().string(), guest(std::string(kGuestWorkDir)), false, 0});

        for (auto& op : binds_tail_) {
            std::error_code ec;
            if (fs::is_directory(op.source, ec)) fs::create_directories(op.target);
            else {
                fs::create_directories(fs::path(op.target).parent_path());
                write_file(op.target, "", 0644);
            }
            op.extra_flags = locked_flags(op.source);
        }
    }

    void build_environment(const std::vector<std::string>& lib_paths) {
        std::string path = "/usr/local/bin:/usr/bin:/bin";
        std::string joined;
        for (const auto& p : lib_paths) {
            path = p + "/bin:" + path;
            joined += (joined.empty() ? "" : ":") + p;
        }
        env_ = {"PATH=" + path, "HOME=" + std::string(kGuestWorkDir), "TMPDIR=/tmp", "LANG=C.UTF-8",
                "PYTHONDONTWRITEBYTECODE=1", "PYTHONUNBUFFERED=1"};
        if (!joined.empty()) {
            env_.push_back("PYTHONPATH=" + joined);
            env_.push_back("LD_LIBRARY_PATH=" + joined);
            env_.push_back("SAE_BUNDLES=" + joined);
        }
    }

    std::shared_ptr<ProcessBackend::State> state_;
    SandboxPolicy policy_;
    fs::path box_;
    bool drop_privileges_ = false;
    bool torn_down_ = false;
    bool slot_held_ = false;
    std::vector<BindOp> binds_head_;
    std::vector<BindOp> binds_tail_;
    std::vector<std::string> env_;
};

ExecutionOutcome ProcessSandbox::execute(const std::vector<std::string>& argv,
                                         std::optional<std::string_view> stdin_data) {
    ensure_live();
    ExecutionOutcome out;
    if (argv.empty()) {
        out.termination = Termination::sandbox_failure;
        out.failure_reason = "empty command";
        return out;
    }
    const auto& opt = state_->options;

    auto stdin_path = box_ / "io" / "stdin";
    write_file(stdin_path, stdin_data.value_or(std::string_view{}), 0600);
    Fd stdin_fd(::open(stdin_path.c_str(), O_RDONLY | O_CLOEXEC));
    if (stdin_fd.fd < 0) throw SandboxError("open stdin: " + std::string(std::strerror(errno)));
    auto [out_r, out_w] = make_pipe();
    auto [err_r, err_w] = make_pipe();
    auto [fail_r, fail_w] = make_pipe();

    // Everything the child touches is prepared here; after fork() it only
    // issues system calls.
    std::vector<const BindOp*> binds;
    for (const auto& b : binds_head_) binds.push_back(&b);
    for (const auto& b : binds_tail_) binds.push_back(&b);
    std::vector<char*> c_argv;
    for (const auto& a : argv) c_argv.push_back(const_cast<char*>(a.c_str()));
    c_argv.push_back(nullptr);
    std::vector<char*> c_env;
    for (const auto& e : env_) c_env.push_back(const_cast<char*>(e.c_str()));
    c_env.push_back(nullptr);
    const std::string root = root_dir().string();
    const unsigned long root_flags = locked_flags(root);
    const bool as_root = running_as_root();
    const std::string uid_map = "0 " + std::to_string(::geteuid()) + " 1";
    const std::string gid_map = "0 " + std::to_string(::getegid()) + " 1";
    int ns_flags = CLONE_NEWNS;
    if (!policy_.network_allowed) ns_flags |= CLONE_NEWNET;
    if (!as_root) ns_flags |= CLONE_NEWUSER;
    const rlim_t cpu_soft = static_cast<rlim_t>(std::ceil(policy_.cpu_time_limit));
    const rlim_t as_limit = static_cast<rlim_t>(std::max<std::uint64_t>(4 * policy_.memory_limit,
                                                                         policy_.memory_limit + 1024 * kMiB));
    const uid_t run_uid = opt.run_uid;
    const gid_t run_gid = opt.run_gid;
    const bool drop = drop_privileges_;

    const auto started = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) throw SandboxError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        const int ef = fail_w.fd;
        ::setpgid(0, 0);
        if (::dup2(stdin_fd.fd, 0) < 0 || ::dup2(out_w.fd, 1) < 0 || ::dup2(err_w.fd, 2) < 0) child_fail(ef, "dup2");
        if (::unshare(ns_flags) != 0) child_fail(ef, "unshare");
        if (!as_root) {
            if (!write_proc("/proc/self/setgroups", "deny")) child_fail(ef, "setgroups");
            if (!write_proc("/proc/self/uid_map", uid_map.c_str())) child_fail(ef, "uid_map");
            if (!write_proc("/proc/self/gid_map", gid_map.c_str())) child_fail(ef, "gid_map");
        }
        if (::mount(nullptr, "/", nullptr, MS_REC | MS_PRIVATE, nullptr) != 0) child_fail(ef, "mount-private");
        for (const BindOp* b : binds) {
            if (::mount(b->source.c_str(), b->target.c_str(), nullptr, MS_BIND | MS_REC, nullptr) != 0)
                child_fail(ef, "bind");
            if (b->read_only &&
                ::mount(nullptr, b->target.c_str(), nullptr, MS_BIND | MS_REMOUNT | MS_RDONLY | b->extra_flags,
                        nullptr) != 0)
                child_fail(ef, "remount-ro");
        }
        if (::mount(nullptr, root.c_str(), nullptr, MS_BIND | MS_REMOUNT | MS_RDONLY | root_flags,
                    nullptr) != 0)
            child_fail(ef, "remount-root");
        if (::chroot(root.c_str()) != 0) child_fail(ef, "chroot");
        if (::chdir(kGuestWorkDir.data()) != 0) child_fail(ef, "chdir");
        if (drop) {
            if (::syscall(SYS_setgroups, 0, nullptr) != 0) child_fail(ef, "setgroups");
            if (::syscall(SYS_setresgid, run_gid, run_gid, run_gid) != 0) child_fail(ef, "setgid");
            if (::syscall(SYS_setresuid, run_uid, run_uid, run_uid) != 0) child_fail(ef, "setuid");
        }
        struct rlimit rl{};
        rl.rlim_cur = cpu_soft;
        rl.rlim_max = cpu_soft + 1;
        if (::setrlimit(RLIMIT_CPU, &rl) != 0) child_fail(ef, "rlimit-cpu");
        rl.rlim_cur = rl.rlim_max = as_limit;
        if (::setrlimit(RLIMIT_AS, &rl) != 0) child_fail(ef, "rlimit-as");
        rl.rlim_cur = rl.rlim_max = 0;
        ::setrlimit(RLIMIT_CORE, &rl);
        rl.rlim_cur = rl.rlim_max = 256;
        ::setrlimit(RLIMIT_NOFILE, &rl);
        ::signal(SIGPIPE, SIG_DFL);
        environ = c_env.data();
        ::execvp(c_argv[0], c_argv.data());
        child_fail(ef, "exec");
    }

    fail_w.reset();
    out_w.reset();
    err_w.reset();
    stdin_fd.reset();

    std::string failure;
    {
        char buf[256];
        ssize_t n;
        while ((n = ::read(fail_r.fd, buf, sizeof buf)) != 0) {
            if (n < 0) {
                if (errno == EINTR) continue;
                break;
            }
            failure.append(buf, static_cast<std::size_t>(n));
        }
    }

    std::optional<Termination> kill_reason;
    ProcSample peak;
    auto kill_group = [&](Termination why) {
        if (!kill_reason) kill_reason = why;
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
    };

    std::string* sinks[2] = {&out.stdout_data, &out.stderr_data};
    int fds[2] = {out_r.fd, err_r.fd};
    bool open_fd[2] = {true, true};
    bool exited = false;
    int status = 0;
    struct rusage usage{};

    while (!exited || open_fd[0] || open_fd[1]) {
        pollfd pfds[2];
        int nfds = 0;
        int map[2];
        for (int i = 0; i < 2; ++i)
            if (open_fd[i]) {
                pfds[nfds] = {fds[i], POLLIN, 0};
                map[nfds++] = i;
            }
        int timeout = exited ? 50 : static_cast<int>(opt.poll_interval.count());
        if (nfds > 0) {
            int rc = ::poll(pfds, static_cast<nfds_t>(nfds), timeout);
            if (rc > 0) {
                for (int k = 0; k < nfds; ++k) {
                    if (!(pfds[k].revents & (POLLIN | POLLHUP | POLLERR))) continue;
                    int i = map[k];
                    char buf[65536];
                    ssize_t n = ::read(fds[i], buf, sizeof buf);
                    if (n <= 0) {
                        if (n < 0 && errno == EINTR) continue;
                        open_fd[i] = false;
                        continue;
                    }
                    auto room = policy_.max_output > sinks[i]->size() ? policy_.max_output - sinks[i]->size() : 0;
                    sinks[i]->append(buf, std::min<std::size_t>(room, static_cast<std::size_t>(n)));
                    if (static_cast<std::uint64_t>(n) > room && !exited) kill_group(Termination::output_limit);
                }
            } else if (rc == 0 && exited) {
                // Orphaned descendants can hold the pipes open; they were killed
                // with the group, so stop waiting.
                break;
            }
        } else if (!exited) {
            ::usleep(static_cast<useconds_t>(opt.poll_interval.count() * 1000));
        }

        if (!exited) {
            pid_t r = ::wait4(pid, &status, WNOHANG, &usage);
            if (r == pid) {
                exited = true;
                ::kill(-pid, SIGKILL);  // reap stragglers in the process group
                continue;
            }
            auto s = sample_proc(pid);
            if (s.ok) {
                peak.cpu = std::max(peak.cpu, s.cpu);
                peak.rss = std::max(peak.rss, s.rss);
                if (!kill_reason) {
                    if (s.cpu >= policy_.cpu_time_limit) kill_group(Termination::cpu_limit);
                    else if (s.rss >= policy_.memory_limit) kill_group(Termination::memory_limit);
                }
            }
            auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            if (!kill_reason && elapsed >= policy_.wall_time_limit) kill_group(Termination::wall_limit);
        }
    }
    out.wall_time_used = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    auto tv = [](const timeval& t) { return static_cast<double>(t.tv_sec) + static_cast<double>(t.tv_usec) / 1e6; };
    out.cpu_time_used = std::max(peak.cpu, tv(usage.ru_utime) + tv(usage.ru_stime));
    out.memory_peak = std::max(peak.rss, static_cast<std::uint64_t>(usage.ru_maxrss) * 1024);
    if (WIFSIGNALED(status)) out.signal = WTERMSIG(status);
    else if (WIFEXITED(status)) out.exit_code = WEXITSTATUS(status);

    if (!failure.empty()) {
        auto colon = failure.rfind(':');
        std::string step = failure.substr(0, colon);
        int err = colon == std::string::npos ? 0 : std::atoi(failure.c_str() + colon + 1);
        if (step == "exec") {
            // A missing or non-executable program is the submission's problem,
            // reported like a shell would.
            out.termination = Termination::exited;
            out.signal = 0;
            out.exit_code = 127;
            out.stderr_data = "cannot execute '" + argv[0] + "': " + std::strerror(err) + "\n";
            return out;
        }
        out.termination = Termination::sandbox_failure;
        out.failure_reason = "sandbox setup failed at " + step + ": " + std::strerror(err);
        return out;
    }

    if (kill_reason) {
        out.termination = *kill_reason;
    } else if (out.signal == SIGXCPU || (out.signal == SIGKILL && out.cpu_time_used >= policy_.cpu_time_limit)) {
        out.termination = Termination::cpu_limit;
    } else if (out.memory_peak >= policy_.memory_limit) {
        out.termination = Termination::memory_limit;
    } else {
        out.termination = Termination::exited;
    }
    if (out.termination == Termination::cpu_limit)
        out.cpu_time_used = std::max(out.cpu_time_used, policy_.cpu_time_limit);
    return out;
}

}  // namespace

ProcessBackend::ProcessBackend(ProcessBackendOptions options) : state_(std::make_shared<State>()) {
    state_->options = std::move(options);
}

ProcessBackend::~ProcessBackend() = default;

bool ProcessBackend::namespaces_available() {
    static const bool available = [] {
        pid_t pid = ::fork();
        if (pid < 0) return false;
        if (pid == 0) {
            int flags = CLONE_NEWNS | CLONE_NEWNET;
            if (::geteuid() != 0) flags |= CLONE_NEWUSER;
            ::_exit(::unshare(flags) == 0 ? 0 : 1);
        }
        int status = 0;
        ::waitpid(pid, &status, 0);
        return WIFEXITED(status) && WEXITSTATUS(status) == 0;
    }();
    return available;
}

SandboxCapabilities ProcessBackend::capabilities() const {
    bool ns = namespaces_available();
    return {ns, true};
}

std::unique_ptr<Sandbox> ProcessBackend::prepare(const SandboxPolicy& policy) {
    if (!namespaces_available()) throw SandboxError("process backend: namespaces unavailable on this host");
    auto box = std::make_unique<ProcessSandbox>(state_, policy);
    state_->acquire();
    box->hold_slot();
    box->setup();
    return box;
}

}  // namespace sae
