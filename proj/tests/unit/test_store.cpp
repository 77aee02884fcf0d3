#include "sae/error.hpp"
#include "sae/hash.hpp"
#include "sae/null_backend.hpp"
#include "sae/service.hpp"
#include "sae/store.hpp"
#include "sae/tar.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sys/wait.h>
#include <unistd.h>

using namespace sae;
namespace fs = std::filesystem;
using sae::test::TempDir;

TEST(Tar, RoundTripAndDeterminism) {
    std::mt19937 rng(7);
    for (int round = 0; round < 50; ++round) {
        std::vector<TarEntry> entries;
        int n = rng() % 6;
        for (int i = 0; i < n; ++i) {
            std::string data(rng() % 2000, '\0');
            for (auto& c : data) c = static_cast<char>(rng());
            entries.push_back({"dir" + std::to_string(i % 2) + "/f" + std::to_string(i), data, (rng() % 2) ? 0755u : 0644u});
        }
        auto a = write_tar(entries);
        EXPECT_EQ(a.size() % 512, 0u);
        EXPECT_EQ(read_tar(a), entries);
        EXPECT_EQ(write_tar(entries), a);
    }
}

TEST(Tar, RejectsUnsafeArchives) {
    std::vector<TarEntry> bad = {{"../x", "1"}};
    EXPECT_THROW(read_tar(write_tar(bad)), InvalidArgument);
    auto ok = write_tar(std::vector<TarEntry>{{"a", "hello"}});
    auto corrupt = ok;
    corrupt[0] = 'b';
    EXPECT_THROW(read_tar(corrupt), InvalidArgument);
    EXPECT_THROW(read_tar(ok.substr(0, 600)), InvalidArgument);
}

TEST(BlobStore, ContentAddressedAndIdempotent) {
    TempDir dir;
    BlobStore blobs(dir.path());
    auto a = blobs.put("hello");
    auto b = blobs.put("hello");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.hash, sha256_hex("hello"));
    EXPECT_EQ(a.size, 5u);
    EXPECT_EQ(blobs.get(a.hash), "hello");
    auto empty = blobs.put("");
    EXPECT_EQ(blobs.get(empty.hash), "");
    EXPECT_EQ(blobs.size(empty.hash), 0u);
    EXPECT_FALSE(blobs.contains(std::string(64, '0')));
    EXPECT_THROW(blobs.get(std::string(64, '0')), NotFound);
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir.path()))
        if (e.is_regular_file()) ++files;
    EXPECT_EQ(files, 2u);
}

TEST(RecordStore, RevisionsOrderAndPersistence) {
    TempDir dir;
    {
        RecordStore rs(dir / "db.sqlite");
        EXPECT_EQ(rs.put(Collection::tasks, "b", {{"v", 1}}), 1);
        EXPECT_EQ(rs.put(Collection::tasks, "a", {{"v", 1}}), 1);
        EXPECT_EQ(rs.put(Collection::tasks, "b", {{"v", 2}}), 2);
        EXPECT_FALSE(rs.get(Collection::users, "b"));
        EXPECT_TRUE(rs.remove(Collection::tasks, "a"));
        EXPECT_FALSE(rs.remove(Collection::tasks, "a"));
        EXPECT_THROW(rs.transaction([&] {
            rs.put(Collection::tasks, "c", 1);
            throw std::runtime_error("abort");
        }),
                     std::runtime_error);
    }
    RecordStore rs(dir / "db.sqlite");
    auto list = rs.list(Collection::tasks);
    ASSERT_EQ(list.size(), 1u);
    EXPECT_EQ(list[0].id, "b");
    EXPECT_EQ(list[0].revision, 2);
    EXPECT_EQ(list[0].body["v"], 2);
}

namespace {

TaskSpec two_slot_task(BlobStore& blobs) {
    auto t = sae::test::python_task(blobs, "t", {{"1", "", "x\n"}});
    t.file_slots = {"main", "helper"};
    return t;
}

}  // namespace

TEST(Store, SubmissionRoundTripAndBundle) {
    TempDir dir;
    Store store(dir.path());
    EXPECT_EQ(store.save_task(two_slot_task(store.blobs())), 1);
    EXPECT_EQ(store.save_task(two_slot_task(store.blobs())), 2);
    auto s = store.create_submission("u1", "t", {{"main", "print(1)\n"}, {"helper", "X = 1\n"}}, "python3");
    EXPECT_EQ(s.status, SubmissionStatus::queued);
    auto loaded = store.load_submission(s.submission_id);
    ASSERT_TRUE(loaded);
    EXPECT_EQ(loaded->files, s.files);
    EXPECT_EQ(store.list_submissions("u1", "t").size(), 1u);
    EXPECT_TRUE(store.list_submissions("u2", "t").empty());

    auto tar = store.bundle_submission(s.submission_id);
    EXPECT_EQ(store.bundle_submission(s.submission_id), tar);
    auto entries = read_tar(tar);
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_EQ(entries[0].path, "main.py");
    EXPECT_EQ(entries[0].data, "print(1)\n");
    EXPECT_EQ(entries[1].path, "helper.py");
    EXPECT_EQ(entries[2].path, "submission.json");
    auto meta = nlohmann::json::parse(entries[2].data);
    EXPECT_EQ(meta["submission_id"], s.submission_id);
    EXPECT_TRUE(meta["score"].is_null());
    EXPECT_THROW(store.bundle_submission("s-none"), NotFound);
}

TEST(Store, UpdateIsForwardOnly) {
    TempDir dir;
    Store store(dir.path());
    auto s = store.create_submission("u", "t", {{"main", "x"}}, "python3");
    store.update_submission(s.submission_id, [](Submission& x) { return advance_status(x, SubmissionStatus::running); });
    auto back = store.update_submission(s.submission_id,
                                        [](Submission& x) { return advance_status(x, SubmissionStatus::compiling); });
    EXPECT_EQ(back->status, SubmissionStatus::running);
    EXPECT_EQ(store.load_submission(s.submission_id)->status, SubmissionStatus::running);
    EXPECT_FALSE(store.update_submission("s-none", [](Submission&) { return true; }));
}

// Kills a child process at one persistence point and checks what survives.
class CrashPoint : public ::testing::TestWithParam<std::string> {};

TEST_P(CrashPoint, SubmissionIsAbsentOrQueued) {
    TempDir dir;
    const std::string point = GetParam();
    pid_t pid = ::fork();
    ASSERT_GE(pid, 0);
    if (pid == 0) {
        Store store(dir.path());
        store.set_fault_hook([&](std::string_view at) {
            if (at == point) ::_exit(42);
        });
        store.create_submission("u", "t", {{"a", "alpha"}, {"b", "beta"}}, "python3");
        ::_exit(0);
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 42);

    Store store(dir.path());
    auto subs = store.list_submissions();
    if (point == "after-commit") {
        ASSERT_EQ(subs.size(), 1u);
        EXPECT_EQ(subs[0].status, SubmissionStatus::queued);
        for (const auto& [slot, hash] : subs[0].files) EXPECT_TRUE(store.blobs().contains(hash)) << slot;
    } else {
        EXPECT_TRUE(subs.empty());
    }
}

INSTANTIATE_TEST_SUITE_P(Points, CrashPoint,
                         ::testing::Values("blob:a", "blob:b", "before-record", "before-commit", "after-commit"),
                         [](const auto& info) {
                             std::string n = info.param;
                             for (auto& c : n)
                                 if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
                             return n;
                         });

TEST(ServiceRestart, ReenqueuesOrphansAndClaimedJobs) {
    TempDir dir;
    std::string orphan, claimed;
    {
        Store store(dir.path());
        store.save_task(sae::test::python_task(store.blobs(), "t", {{"1", "", ""}}));
        orphan = store.create_submission("u", "t", {{"main", "a"}}, "python3").submission_id;
        claimed = store.create_submission("u", "t", {{"main", "b"}}, "python3").submission_id;
        EvaluationJob job;
        job.job_id = "j-7";
        job.submission_id = claimed;
        job.sequence = 3;
        job.state = JobState::claimed;
        job.claimed_by = "local-1";
        store.records().put(Collection::jobs, job.job_id, job);
    }
    ServiceConfig cfg;
    cfg.storage = dir.path();
    cfg.workers = 0;
    Service service(cfg, std::make_shared<NullBackend>(NullBackend::constant_output("")));
    service.start();
    auto snap = service.scheduler().snapshot();
    service.stop();
    ASSERT_EQ(snap.pending.size(), 2u);
    EXPECT_EQ(snap.pending[0].submission_id, claimed);
    EXPECT_EQ(snap.pending[0].attempts, 1);
    EXPECT_FALSE(snap.pending[0].claimed_by);
    EXPECT_EQ(snap.pending[1].submission_id, orphan);
    EXPECT_NE(snap.pending[1].job_id, "j-7");
}
