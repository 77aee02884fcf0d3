#pragma once

// Isolated execution of untrusted code. A SandboxBackend hands out Sandbox
// handles; each handle owns one private working directory and runs commands
// under a SandboxPolicy. Limit breaches are reported through
// ExecutionOutcome::termination, never by throwing.

#include "sae/model.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sae {

enum class Termination { exited, cpu_limit, wall_limit, memory_limit, output_limit, sandbox_failure };

std::string_view to_string(Termination t);

struct ExecutionOutcome {
    int exit_code = 0;    // valid when signal == 0
    int signal = 0;       // terminating signal, 0 if the process exited
    std::string stdout_data;  // truncated at max_output
    std::string stderr_data;  // truncated at max_output
    double cpu_time_used = 0.0;
    double wall_time_used = 0.0;
    std::uint64_t memory_peak = 0;
    Termination termination = Termination::exited;
    std::string failure_reason;  // sandbox_failure only

    bool succeeded() const { return termination == Termination::exited && signal == 0 && exit_code == 0; }
};

struct SandboxCapabilities {
    bool supports_network_isolation = false;
    bool supports_memory_limit = false;
};

/// One prepared, isolated working directory. Owned by a single job at a time.
class Sandbox {
public:
    virtual ~Sandbox() = default;

    /// Places a file in the working directory (relative path).
    virtual void put_file(const std::string& path, std::string_view data, bool executable = false) = 0;

    /// All regular files currently in the working directory, keyed by
    /// relative path.
    virtual std::map<std::string, std::string> files() const = 0;

    /// Runs argv with the working directory as cwd. `stdin_data` is fed as
    /// standard input when present.
    virtual ExecutionOutcome execute(const std::vector<std::string>& argv,
                                     std::optional<std::string_view> stdin_data = std::nullopt) = 0;

    /// Releases every resource; idempotent. Errors are logged, not thrown.
    virtual void teardown() noexcept = 0;

    virtual const SandboxPolicy& policy() const = 0;
};

class SandboxBackend {
public:
    virtual ~SandboxBackend() = default;

    virtual SandboxCapabilities capabilities() const = 0;

    /// Creates the isolated working directory, validates mounts and stages
    /// dependency bundles. Throws SandboxError before any code runs when a
    /// mount source or bundle is missing.
    virtual std::unique_ptr<Sandbox> prepare(const SandboxPolicy& policy) = 0;

    virtual std::string name() const = 0;
};

/// Tears the sandbox down when it leaves scope.
class SandboxGuard {
public:
    explicit SandboxGuard(std::unique_ptr<Sandbox> box) : box_(std::move(box)) {}
    ~SandboxGuard() {
        if (box_) box_->teardown();
    }
    SandboxGuard(SandboxGuard&&) = default;
    SandboxGuard& operator=(SandboxGuard&&) = delete;

    Sandbox* operator->() const { return box_.get(); }
    Sandbox& operator*() const { return *box_; }

private:
    std::unique_ptr<Sandbox> box_;
};

}  // namespace sae
