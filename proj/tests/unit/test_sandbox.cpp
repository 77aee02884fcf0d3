#include "sae/error.hpp"
#include "sae/null_backend.hpp"
#include "sae/process_backend.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <future>

using namespace sae;
namespace fs = std::filesystem;
using sae::test::fixtures;
using sae::test::slurp;

namespace {

class ProcessSandbox : public ::testing::Test {
protected:
    void SetUp() override {
        if (!ProcessBackend::namespaces_available()) GTEST_SKIP() << "namespaces unavailable";
    }

    ExecutionOutcome run_program(const std::string& program, const SandboxPolicy& policy,
                                 std::optional<std::string> stdin_data = std::nullopt,
                                 std::vector<std::string> args = {}, ProcessBackend* backend = nullptr) {
        ProcessBackend local;
        auto& b = backend ? *backend : local;
        SandboxGuard box(b.prepare(policy));
        box->put_file("main.py", slurp(fixtures() / "programs" / program));
        std::vector<std::string> argv = {"python3", "main.py"};
        argv.insert(argv.end(), args.begin(), args.end());
        return box->execute(argv, stdin_data ? std::optional<std::string_view>(*stdin_data) : std::nullopt);
    }
};

}  // namespace

TEST_F(ProcessSandbox, RunsWithStdinAndExitCode) {
    ProcessBackend backend;
    SandboxGuard box(backend.prepare({}));
    box->put_file("a.sh", "read x; echo \"got $x\"; echo err >&2; exit 3\n");
    auto out = box->execute({"sh", "a.sh"}, std::string_view("hello\n"));
    EXPECT_EQ(out.termination, Termination::exited);
    EXPECT_EQ(out.exit_code, 3);
    EXPECT_EQ(out.stdout_data, "got hello\n");
    EXPECT_EQ(out.stderr_data, "err\n");
    EXPECT_FALSE(out.succeeded());
}

TEST_F(ProcessSandbox, MissingExecutableIsUserError) {
    ProcessBackend backend;
    SandboxGuard box(backend.prepare({}));
    auto out = box->execute({"./does-not-exist"});
    EXPECT_EQ(out.termination, Termination::exited);
    EXPECT_EQ(out.exit_code, 127);
    EXPECT_NE(out.stderr_data.find("does-not-exist"), std::string::npos);
}

TEST_F(ProcessSandbox, CpuLimitStopsInfiniteLoop) {
    SandboxPolicy p;
    p.cpu_time_limit = 1;
    p.wall_time_limit = 3;
    auto start = std::chrono::steady_clock::now();
    auto out = run_program("infinite_loop.py", p);
    auto wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_EQ(out.termination, Termination::cpu_limit);
    EXPECT_GE(out.cpu_time_used, 0.9);
    EXPECT_LT(wall, p.wall_time_limit + 2);
}

TEST_F(ProcessSandbox, WallLimitStopsSleeper) {
    ProcessBackend backend;
    SandboxPolicy p;
    p.cpu_time_limit = 1;
    p.wall_time_limit = 1;
    SandboxGuard box(backend.prepare(p));
    auto start = std::chrono::steady_clock::now();
    auto out = box->execute({"sleep", "30"});
    EXPECT_EQ(out.termination, Termination::wall_limit);
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(3));
}

TEST_F(ProcessSandbox, MemoryLimit) {
    SandboxPolicy p;
    p.memory_limit = 64 * kMiB;
    auto out = run_program("memory_hog.py", p);
    EXPECT_EQ(out.termination, Termination::memory_limit);
}

TEST_F(ProcessSandbox, OutputLimit) {
    ProcessBackend backend;
    SandboxPolicy p;
    p.max_output = 1000;
    SandboxGuard box(backend.prepare(p));
    auto out = box->execute({"yes"});
    EXPECT_EQ(out.termination, Termination::output_limit);
    EXPECT_LE(out.stdout_data.size(), 1000u);
}

TEST_F(ProcessSandbox, NetworkFollowsPolicy) {
    sae::test::PongServer server;
    SandboxPolicy p;
    auto blocked = run_program("net_probe.py", p, server.address());
    EXPECT_EQ(blocked.stdout_data, "tcp blocked\nudp blocked\n");
    p.network_allowed = true;
    auto open = run_program("net_probe.py", p, server.address());
    EXPECT_EQ(open.stdout_data, "tcp connected\nudp connected\n");
}

TEST_F(ProcessSandbox, CasesDoNotShareFiles) {
    ProcessBackend backend;
    auto w = run_program("canary_write.py", {}, std::nullopt, {}, &backend);
    EXPECT_EQ(w.stdout_data, "wrote\n");
    auto c = run_program("canary_check.py", {}, std::nullopt, {}, &backend);
    EXPECT_EQ(c.stdout_data, "clean\n");
}

TEST_F(ProcessSandbox, SystemDirectoriesAreReadOnly) {
    auto out = run_program("write_outside.py", {});
    EXPECT_EQ(out.stdout_data, "denied /etc/sae-escape\ndenied /usr/sae-escape\ndenied /sae-escape\n");
    EXPECT_FALSE(fs::exists("/etc/sae-escape"));
}

TEST_F(ProcessSandbox, FilesCollectsArtifacts) {
    ProcessBackend backend;
    SandboxGuard box(backend.prepare({}));
    box->put_file("a.txt", "x");
    auto out = box->execute({"sh", "-c", "mkdir -p sub && echo y > sub/b.txt"});
    ASSERT_TRUE(out.succeeded()) << out.stderr_data;
    auto files = box->files();
    EXPECT_EQ(files.at("a.txt"), "x");
    EXPECT_EQ(files.at("sub/b.txt"), "y\n");
}

TEST_F(ProcessSandbox, Mounts) {
    sae::test::TempDir dir;
    sae::test::spit(dir / "ro/data.txt", "shared data\n");
    fs::create_directories(dir / "rw");
    // The program runs unprivileged, so a writable mount must be writable by it.
    fs::permissions(dir.path(), fs::perms::all);
    fs::permissions(dir / "rw", fs::perms::all);
    SandboxPolicy p;
    p.mounts = {{(dir / "ro").string(), "/data", true}, {(dir / "rw").string(), "/scratch", false}};
    ProcessBackend backend;
    SandboxGuard box(backend.prepare(p));
    auto out = box->execute({"sh", "-c", "cat /data/data.txt; echo out > /scratch/o.txt; echo x > /data/y 2>/dev/null || echo ro"});
    EXPECT_EQ(out.stdout_data, "shared data\nro\n");
    EXPECT_EQ(slurp(dir / "rw/o.txt"), "out\n");

    SandboxPolicy missing;
    missing.mounts = {{(dir / "nope").string(), "/nope", true}};
    EXPECT_THROW(backend.prepare(missing), SandboxError);
}

TEST_F(ProcessSandbox, DependencyBundles) {
    sae::test::TempDir dir;
    sae::test::pack_fixture_bundles(dir.path());
    ProcessBackendOptions opts;
    opts.bundles = BundleRegistry(dir.path());
    ProcessBackend backend(opts);
    SandboxPolicy with;
    with.dependencies = {"numerics-v1"};
    auto ok = run_program("uses_numerics.py", with, "1 2 3 4", {}, &backend);
    EXPECT_EQ(ok.stdout_data, "2.500 1.250\n") << ok.stderr_data;
    auto without = run_program("uses_numerics.py", {}, "1 2 3 4", {}, &backend);
    EXPECT_EQ(without.exit_code, 1);
    EXPECT_NE(without.stderr_data.find("ModuleNotFoundError"), std::string::npos);

    SandboxPolicy unknown;
    unknown.dependencies = {"nope-v9"};
    EXPECT_THROW(backend.prepare(unknown), SandboxError);
}

TEST_F(ProcessSandbox, TeardownRemovesWorkDirectory) {
    sae::test::TempDir root;
    ProcessBackendOptions opts;
    opts.work_root = root.path();
    ProcessBackend backend(opts);
    auto box = backend.prepare({});
    box->put_file("x", "1");
    EXPECT_FALSE(fs::is_empty(root.path()));
    box->teardown();
    box->teardown();  // idempotent
    EXPECT_TRUE(fs::is_empty(root.path()));
}

TEST_F(ProcessSandbox, ConcurrencyCap) {
    ProcessBackendOptions opts;
    opts.max_concurrent = 1;
    ProcessBackend backend(opts);
    auto first = backend.prepare({});
    auto second = std::async(std::launch::async, [&] { return backend.prepare({}); });
    EXPECT_EQ(second.wait_for(std::chrono::milliseconds(200)), std::future_status::timeout);
    first->teardown();
    EXPECT_EQ(second.wait_for(std::chrono::seconds(5)), std::future_status::ready);
}

TEST(NullBackend, ScriptedAndTruncated) {
    NullBackend backend([](const ExecRequest& req, std::map<std::string, std::string>& files) {
        files["out.bin"] = "compiled";
        ExecutionOutcome o;
        o.stdout_data = std::string(50, 'x') + req.stdin_data;
        return o;
    });
    SandboxPolicy p;
    p.max_output = 10;
    {
        SandboxGuard box(backend.prepare(p));
        box->put_file("src", "code");
        auto out = box->execute({"run"}, std::string_view("in"));
        EXPECT_EQ(out.stdout_data.size(), 10u);
        EXPECT_EQ(box->files().at("out.bin"), "compiled");
        EXPECT_EQ(backend.live_count(), 1u);
    }
    EXPECT_EQ(backend.live_count(), 0u);
    EXPECT_EQ(backend.prepared_count(), 1u);
    backend.set_known_bundles({"a"});
    SandboxPolicy dep;
    dep.dependencies = {"b"};
    EXPECT_THROW(backend.prepare(dep), SandboxError);
}
