#include "sae/null_backend.hpp"

#include "sae/error.hpp"

#include <algorithm>

namespace sae {

namespace {

class NullSandbox final : public Sandbox {
public:
    NullSandbox(const ExecScript& script, SandboxPolicy policy, std::mutex& mu, std::shared_ptr<std::size_t> live)
        : script_(script), policy_(std::move(policy)), mu_(mu), live_(std::move(live)) {}
    ~NullSandbox() override { teardown(); }

    void put_file(const std::string& path, std::string_view data, bool) override {
        if (torn_down_) throw SandboxError("sandbox already torn down");
        files_[path] = std::string(data);
    }

    std::map<std::string, std::string> files() const override { return files_; }

    ExecutionOutcome execute(const std::vector<std::string>& argv, std::optional<std::string_view> stdin_data) override {
        if (torn_down_) throw SandboxError("sandbox already torn down");
        ExecRequest req{argv, std::string(stdin_data.value_or("")), files_, &policy_};
        auto out = script_(req, files_);
        if (out.stdout_data.size() > policy_.max_output) out.stdout_data.resize(policy_.max_output);
        if (out.stderr_data.size() > policy_.max_output) out.stderr_data.resize(policy_.max_output);
        return out;
    }

    void teardown() noexcept override {
        if (torn_down_) return;
        torn_down_ = true;
        files_.clear();
        std::lock_guard lock(mu_);
        --*live_;
    }

    const SandboxPolicy& policy() const override { return policy_; }

private:
    const ExecScript& script_;
    SandboxPolicy policy_;
    std::mutex& mu_;
    std::shared_ptr<std::size_t> live_;
    std::map<std::string, std::string> files_;
    bool torn_down_ = false;
};

}  // namespace

NullBackend::NullBackend(ExecScript script, SandboxCapabilities caps) : script_(std::move(script)), caps_(caps) {}

ExecScript NullBackend::constant_output(std::string stdout_data) {
    return [out = std::move(stdout_data)](const ExecRequest&, std::map<std::string, std::string>&) {
        ExecutionOutcome o;
        o.stdout_data = out;
        return o;
    };
}

std::unique_ptr<Sandbox> NullBackend::prepare(const SandboxPolicy& policy) {
    if (known_bundles_) {
        for (const auto& dep : policy.dependencies)
            if (std::find(known_bundles_->begin(), known_bundles_->end(), dep) == known_bundles_->end())
                throw SandboxError("unknown dependency bundle '" + dep + "'");
    }
    std::lock_guard lock(mu_);
    ++prepared_;
    ++*live_;
    return std::make_unique<NullSandbox>(script_, policy, mu_, live_);
}

std::size_t NullBackend::prepared_count() const {
    std::lock_guard lock(mu_);
    return prepared_;
}

std::size_t NullBackend::live_count() const {
    std::lock_guard lock(mu_);
    return *live_;
}

}  // namespace sae
