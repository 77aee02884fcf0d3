#pragma once

// Deterministic, process-free backend for scheduler, evaluator and API tests.
// Every execute() call is answered by a script function; files live in memory.

#include "sae/sandbox.hpp"

#include <functional>
#include <mutex>

namespace sae {

struct ExecRequest {
    std::vector<std::string> argv;
    std::string stdin_data;
    std::map<std::string, std::string> files;  // working directory at call time
    const SandboxPolicy* policy = nullptr;
};

/// May add or overwrite files in the working directory through the second argument.
using ExecScript = std::function<ExecutionOutcome(const ExecRequest&, std::map<std::string, std::string>& files)>;

class NullBackend final : public SandboxBackend {
public:
    explicit NullBackend(ExecScript script, SandboxCapabilities caps = {true, true});

    /// Script under which every execution exits 0 with the given stdout.
    static ExecScript constant_output(std::string stdout_data);

    SandboxCapabilities capabilities() const override { return caps_; }
    std::unique_ptr<Sandbox> prepare(const SandboxPolicy& policy) override;
    std::string name() const override { return "null"; }

    /// Makes prepare() throw SandboxError for policies naming this bundle.
    void set_known_bundles(std::vector<std::string> ids) { known_bundles_ = std::move(ids); }

    std::size_t prepared_count() const;
    std::size_t live_count() const;

private:
    ExecScript script_;
    SandboxCapabilities caps_;
    std::optional<std::vector<std::string>> known_bundles_;
    mutable std::mutex mu_;
    std::size_t prepared_ = 0;
    std::shared_ptr<std::size_t> live_ = std::make_shared<std::size_t>(0);
};

}  // namespace sae
