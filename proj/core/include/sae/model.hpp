#pragma once

// Domain types shared by every module, plus the scoring arithmetic.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sae {

using Timestamp = std::chrono::time_point<std::chrono::system_clock, std::chrono::milliseconds>;

Timestamp now_utc();

/// Positive rational test-case weight, kept exact so scores are reproducible.
/// Parses "3", "0.25" and "1/3".
struct Weight {
    std::int64_t num = 1;
    std::int64_t den = 1;

    static std::optional<Weight> parse(std::string_view text);
    std::string to_string() const;
    bool positive() const { return num > 0 && den > 0; }

    friend bool operator==(const Weight&, const Weight&) = default;
};

enum class Verdict { pass, wrong_output, runtime_error, time_limit, memory_limit, checker_error };
enum class FeedbackVisibility { full, verdict_only };
enum class CheckerKind { exact, token, numeric_token, custom };
enum class SubmissionStatus { queued, compiling, running, evaluated, internal_error };

std::string_view to_string(Verdict v);
std::string_view to_string(FeedbackVisibility v);
std::string_view to_string(CheckerKind k);
std::string_view to_string(SubmissionStatus s);

std::optional<Verdict> parse_verdict(std::string_view s);
std::optional<FeedbackVisibility> parse_visibility(std::string_view s);
std::optional<CheckerKind> parse_checker_kind(std::string_view s);
std::optional<SubmissionStatus> parse_status(std::string_view s);

struct TestCase {
    std::string case_id;
    std::optional<std::string> stdin_ref;
    std::vector<std::string> args;
    std::optional<std::string> expected_ref;
    Weight weight;
    FeedbackVisibility visibility = FeedbackVisibility::full;
};

struct CheckerPolicy {
    CheckerKind kind = CheckerKind::token;
    std::optional<double> numeric_epsilon;          // numeric_token only
    std::optional<std::string> custom_checker_ref;  // custom only
    double checker_time_limit = 10.0;               // seconds
};

struct Mount {
    std::string host_path;
    std::string guest_path;
    bool read_only = true;
};

inline constexpr std::uint64_t kMiB = 1024 * 1024;

struct SandboxPolicy {
    double cpu_time_limit = 10.0;   // seconds
    double wall_time_limit = 20.0;  // seconds
    std::uint64_t memory_limit = 512 * kMiB;
    std::uint64_t max_output = 1 * kMiB;
    std::vector<Mount> mounts;
    bool network_allowed = false;
    std::vector<std::string> dependencies;  // bundle ids
};

/// A language the task accepts. Command templates are whitespace-separated
/// argv words; `{slot}` expands to the file name of that slot in the sandbox.
struct LanguageProfile {
    std::string profile_id;
    std::string display_name;
    std::string source_suffix;
    std::optional<std::string> compile_command;
    std::string run_command;

    std::string file_name(std::string_view slot) const { return std::string(slot) + source_suffix; }
};

struct TaskSpec {
    std::string task_id;
    std::string title;
    std::string statement_ref;  // material id, may be empty
    std::vector<std::string> file_slots;
    std::vector<LanguageProfile> languages;
    std::vector<TestCase> test_cases;
    CheckerPolicy checker;
    SandboxPolicy sandbox;
    std::int64_t max_score = 100;
    std::int64_t unlock_day = 0;
    std::string affinity;  // optional worker-pool label; empty means any worker

    const LanguageProfile* find_language(std::string_view id) const;
};

struct CaseResult {
    std::string case_id;
    Verdict verdict = Verdict::pass;
    std::string message;
    double time_used = 0.0;
    std::uint64_t memory_used = 0;
    std::optional<std::string> stdout_ref;
    std::optional<std::string> stderr_ref;

    friend bool operator==(const CaseResult&, const CaseResult&) = default;
};

struct EvaluationReport {
    std::vector<CaseResult> per_case;
    std::int64_t score = 0;

    friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

struct Submission {
    std::string submission_id;
    std::string user_id;
    std::string task_id;
    std::map<std::string, std::string> files;  // slot -> blob hash
    std::string language;
    Timestamp submitted_at{};
    SubmissionStatus status = SubmissionStatus::queued;
    std::optional<EvaluationReport> results;
};

// ---------------------------------------------------------------------------
// Validation

struct ValidationErrors {
    std::vector<std::string> messages;
};

/// A TaskSpec whose invariants have been checked. Only validate_task makes one.
class ValidatedTask {
public:
    const TaskSpec& spec() const { return spec_; }
    const TaskSpec* operator->() const { return &spec_; }

private:
    friend std::variant<ValidatedTask, ValidationErrors> validate_task(TaskSpec spec);
    explicit ValidatedTask(TaskSpec spec) : spec_(std::move(spec)) {}
    TaskSpec spec_;
};

using TaskValidation = std::variant<ValidatedTask, ValidationErrors>;

TaskValidation validate_task(TaskSpec spec);

/// Placeholders `{name}` used by a command template, in order of appearance.
std::vector<std::string> template_placeholders(std::string_view command);

// ---------------------------------------------------------------------------
// Scoring

struct ScoredCase {
    Verdict verdict;
    Weight weight;
};

/// floor(max_score * passed weight / total weight). Throws InvalidArgument on
/// an empty list, a non-positive weight or a non-positive max_score.
std::int64_t aggregate_score(std::span<const ScoredCase> cases, std::int64_t max_score);

/// Highest score among evaluated submissions; 0 when none are evaluated.
std::int64_t best_score(std::span<const Submission> history);

// ---------------------------------------------------------------------------
// Submission lifecycle

/// True when `to` lies strictly after `from` on queued -> compiling -> running
/// -> {evaluated, internal_error}. Steps may be skipped; terminal states are final.
bool is_forward_transition(SubmissionStatus from, SubmissionStatus to);

/// Moves the submission to `to` when that is a forward transition.
/// Returns false (and leaves the submission untouched) otherwise.
bool advance_status(Submission& submission, SubmissionStatus to);

/// Attaches the report and moves to evaluated, if that is still a forward move.
bool record_evaluation(Submission& submission, EvaluationReport report);

bool is_terminal(SubmissionStatus s);

}  // namespace sae
