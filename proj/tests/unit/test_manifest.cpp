#include "sae/command.hpp"
#include "sae/hash.hpp"
#include "sae/keyvalue.hpp"
#include "sae/manifest.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace sae;
using sae::test::TempDir;

namespace {

FileResolver files_from(std::map<std::string, std::string> m) {
    return [m = std::move(m)](const std::string& p) -> std::optional<std::string> {
        auto it = m.find(p);
        if (it == m.end()) return std::nullopt;
        return it->second;
    };
}

const char* kBasic = R"(id = sum
title = Sum
slots = main
[language py]
run = python3 {main}
suffix = .py
[case a]
stdin = a.in
expected = a.out
weight = 2
[case b]
stdin = b.in
expected = b.out
feedback = verdict_only
)";

bool has_line_error(const std::vector<LineError>& errs, int line, const std::string& needle) {
    for (const auto& e : errs)
        if (e.line == line && e.message.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST(KeyValue, SectionsCommentsAndErrors) {
    auto r = parse_kv("# top\na = 1\n; also comment\n[case x]\nb = two words \n[bad\nnovalue\n");
    EXPECT_EQ(r.document.root.entries.size(), 1u);
    ASSERT_EQ(r.document.sections.size(), 1u);
    EXPECT_EQ(r.document.sections[0].kind, "case");
    EXPECT_EQ(r.document.sections[0].argument, "x");
    EXPECT_EQ(r.document.sections[0].find("b")->value, "two words");
    EXPECT_EQ(r.errors.size(), 2u);
    EXPECT_EQ(r.errors[0].line, 6);
    EXPECT_EQ(r.errors[1].line, 7);
    EXPECT_EQ((LineError{3, "boom"}.to_string()), "line 3: boom");
}

TEST(KeyValue, Scalars) {
    EXPECT_EQ(parse_size("512M"), 512 * kMiB);
    EXPECT_EQ(parse_size("64KiB"), std::optional<std::uint64_t>());
    EXPECT_EQ(parse_size("64KB"), 64u * 1024);
    EXPECT_EQ(parse_size("4096"), 4096u);
    EXPECT_FALSE(parse_size("-1"));
    EXPECT_EQ(parse_seconds("1.5s"), 1.5);
    EXPECT_EQ(parse_seconds("250ms"), 0.25);
    EXPECT_EQ(parse_bool("yes"), true);
    EXPECT_EQ(parse_bool("off"), false);
    EXPECT_EQ(split_list(" a, b ,c "), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Command, SplitAndInstantiate) {
    EXPECT_EQ(split_command(R"(gcc -o "my prog" 'a b' c\ d)"),
              (std::vector<std::string>{"gcc", "-o", "my prog", "a b", "c d"}));
    auto argv = instantiate_command("python3 {main} --flag {other}", {{"main", "main.py"}}, {"x"});
    EXPECT_EQ(argv, (std::vector<std::string>{"python3", "main.py", "--flag", "{other}", "x"}));
}

TEST(Manifest, ParsesBasicTask) {
    auto r = parse_task_manifest(kBasic, files_from({{"a.in", "1 2"}, {"a.out", "3"}, {"b.in", "2 2"}, {"b.out", "4"}}),
                                 {});
    ASSERT_TRUE(r.task) << (r.errors.empty() ? "" : r.errors[0].to_string());
    const auto& t = r.task->spec;
    EXPECT_EQ(t.task_id, "sum");
    EXPECT_EQ(t.test_cases.size(), 2u);
    EXPECT_EQ(t.test_cases[0].weight, (Weight{2, 1}));
    EXPECT_EQ(t.test_cases[1].visibility, FeedbackVisibility::verdict_only);
    EXPECT_EQ(*t.test_cases[0].expected_ref, sha256_hex("3"));
    EXPECT_EQ(r.task->blobs.at(sha256_hex("1 2")), "1 2");
}

TEST(Manifest, MissingExpectedFileNamesThePath) {
    auto r = parse_task_manifest(kBasic, files_from({{"a.in", "1 2"}, {"b.in", "2 2"}, {"b.out", "4"}}), {});
    EXPECT_FALSE(r.task);
    EXPECT_TRUE(has_line_error(r.errors, 9, "file not found: a.out"));
}

TEST(Manifest, ErrorsCarryLineNumbers) {
    std::string text = R"(id = t
slots = main
colour = blue
[language py]
run = python3 {mian}
[case a]
expected = a.out
weight = -1
[sandbox]
memory = lots
[mystery]
)";
    auto r = parse_task_manifest(text, files_from({{"a.out", "x"}}), {});
    EXPECT_FALSE(r.task);
    EXPECT_TRUE(has_line_error(r.errors, 3, "unknown key 'colour'"));
    EXPECT_TRUE(has_line_error(r.errors, 10, "invalid size"));
    EXPECT_FALSE(has_line_error(r.errors, 8, "weight"));  // parsed; rejected later by the invariant check
    EXPECT_TRUE(has_line_error(r.errors, 10, "invalid size"));
    EXPECT_TRUE(has_line_error(r.errors, 11, "unknown section"));
}

TEST(Manifest, InvariantErrorsMapToLines) {
    std::string text = "id = t\nslots = main\n[language py]\nrun = python3 {mian}\n[case a]\nexpected = a.out\n";
    auto r = parse_task_manifest(text, files_from({{"a.out", "x"}}), {});
    EXPECT_FALSE(r.task);
    EXPECT_TRUE(has_line_error(r.errors, 3, "undeclared slot 'mian'"));
}

TEST(Manifest, RejectsEscapingPaths) {
    std::string text = "id = t\nslots = main\n[language py]\nrun = x {main}\n[case a]\nexpected = ../secret\n";
    auto r = parse_task_manifest(text, files_from({{"../secret", "x"}}), {});
    EXPECT_FALSE(r.task);
    EXPECT_TRUE(has_line_error(r.errors, 6, "relative"));
}

TEST(Manifest, SandboxDefaultsAndMounts) {
    TempDir dir;
    std::filesystem::create_directories(dir / "data");
    std::string text = "id = t\nslots = main\n[language py]\nrun = x {main}\n[case a]\nexpected = a.out\n"
                       "[sandbox]\ncpu_time = 1s\nnetwork = true\nmount = data:/data\nmount = data:/scratch:rw\n"
                       "dependencies = numerics-v1\n";
    sae::test::spit(dir / "a.out", "1");
    sae::test::spit(dir / "task.manifest", text);
    auto r = load_task_dir(dir.path(), ManifestOptions{dir.path(), {}});
    ASSERT_TRUE(r.task) << r.errors[0].to_string();
    const auto& sb = r.task->spec.sandbox;
    EXPECT_EQ(sb.cpu_time_limit, 1.0);
    EXPECT_EQ(sb.wall_time_limit, 2.0);
    EXPECT_TRUE(sb.network_allowed);
    ASSERT_EQ(sb.mounts.size(), 2u);
    EXPECT_TRUE(sb.mounts[0].read_only);
    EXPECT_FALSE(sb.mounts[1].read_only);
    EXPECT_EQ(sb.dependencies, std::vector<std::string>{"numerics-v1"});

    sae::test::spit(dir / "task.manifest", text + "mount = missing:/m\n");
    r = load_task_dir(dir.path(), ManifestOptions{dir.path(), {}});
    EXPECT_FALSE(r.task);
    EXPECT_TRUE(has_line_error(r.errors, 13, "mount host path not found"));
}

TEST(Manifest, FixtureTaskLoads) {
    auto r = load_task_dir(sae::test::fixtures() / "tasks/orf");
    ASSERT_TRUE(r.task);
    EXPECT_EQ(r.task->spec.file_slots,
              (std::vector<std::string>{"data_io", "orf_finder", "sequences", "transcription", "translation"}));
    EXPECT_EQ(r.task->spec.statement_ref, "orf.statement");
    EXPECT_TRUE(r.task->statement);
}
