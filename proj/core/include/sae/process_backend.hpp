#pragma once

// Linux process backend. Each execution runs in fresh mount and (unless the
// policy allows networking) network namespaces, chrooted into a skeleton root
// that holds read-only binds of the system directories, the working directory
// at /box, a private /tmp, policy mounts and dependency bundles. CPU, wall and
// memory limits are enforced by a supervising poll loop backed by rlimits.

#include "sae/bundle.hpp"
#include "sae/sandbox.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace sae {

struct ProcessBackendOptions {
    std::filesystem::path work_root = std::filesystem::temp_directory_path() / "sae-sandbox";
    BundleRegistry bundles;
    std::size_t max_concurrent = 8;
    std::vector<std::string> system_dirs = {"/bin", "/sbin", "/lib", "/lib32", "/lib64", "/libx32", "/usr", "/etc"};
    /// Identity code runs as when the service itself runs as real root.
    unsigned run_uid = 65534;
    unsigned run_gid = 65534;
    std::chrono::milliseconds poll_interval{5};
};

class ProcessBackend final : public SandboxBackend {
public:
    explicit ProcessBackend(ProcessBackendOptions options = {});
    ~ProcessBackend() override;

    SandboxCapabilities capabilities() const override;
    std::unique_ptr<Sandbox> prepare(const SandboxPolicy& policy) override;
    std::string name() const override { return "process"; }

    /// Whether this host lets us create the namespaces the backend needs.
    static bool namespaces_available();

    struct State;

private:
    std::shared_ptr<State> state_;
};

}  // namespace sae
