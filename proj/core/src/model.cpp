#include "sae/model.hpp"

#include "sae/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <numeric>
#include <set>

namespace sae {

Timestamp now_utc() {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

namespace {

constexpr std::int64_t kMaxWeightDenominator = 1'000'000;

std::optional<std::int64_t> parse_int(std::string_view s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

Weight reduced(std::int64_t num, std::int64_t den) {
    auto g = std::gcd(num, den);
    if (g == 0) g = 1;
    return Weight{num / g, den / g};
}

}  // namespace

std::optional<Weight> Weight::parse(std::string_view text) {
    if (text.empty()) return std::nullopt;
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        auto num = parse_int(text.substr(0, slash));
        auto den = parse_int(text.substr(slash + 1));
        if (!num || !den || *den <= 0 || *den > kMaxWeightDenominator) return std::nullopt;
        return reduced(*num, *den);
    }
    if (auto dot = text.find('.'); dot != std::string_view::npos) {
        auto whole = text.substr(0, dot);
        auto frac = text.substr(dot + 1);
        if (frac.empty() || frac.size() > 6) return std::nullopt;
        if (!std::all_of(frac.begin(), frac.end(), [](char c) { return c >= '0' && c <= '9'; })) return std::nullopt;
        bool negative = !whole.empty() && whole.front() == '-';
        auto w = whole.empty() || whole == "-" ? std::optional<std::int64_t>(0) : parse_int(whole);
        auto f = parse_int(frac);
        if (!w || !f) return std::nullopt;
        std::int64_t den = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
        std::int64_t num = std::abs(*w) * den + *f;
        return reduced(negative ? -num : num, den);
    }
    auto v = parse_int(text);
    if (!v) return std::nullopt;
    return Weight{*v, 1};
}

std::string Weight::to_string() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
}

// ---------------------------------------------------------------------------

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view s) {
    for (const auto& [e, name] : table)
        if (name == s) return e;
    return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E e) {
    for (const auto& [v, name] : table)
        if (v == e) return name;
    return "unknown";
}

constexpr std::array<std::pair<Verdict, std::string_view>, 6> kVerdicts{{
    {Verdict::pass, "pass"},
    {Verdict::wrong_output, "wrong_output"},
    {Verdict::runtime_error, "runtime_error"},
    {Verdict::time_limit, "time_limit"},
    {Verdict::memory_limit, "memory_limit"},
    {Verdict::checker_error, "checker_error"},
}};

constexpr std::array<std::pair<FeedbackVisibility, std::string_view>, 2> kVisibility{{
    {FeedbackVisibility::full, "full"},
    {FeedbackVisibility::verdict_only, "verdict_only"},
}};

constexpr std::array<std::pair<CheckerKind, std::string_view>, 4> kCheckerKinds{{
    {CheckerKind::exact, "exact"},
    {CheckerKind::token, "token"},
    {CheckerKind::numeric_token, "numeric_token"},
    {CheckerKind::custom, "custom"},
}};

constexpr std::array<std::pair<SubmissionStatus, std::string_view>, 5> kStatuses{{
    {SubmissionStatus::queued, "queued"},
    {SubmissionStatus::compiling, "compiling"},
    {SubmissionStatus::running, "running"},
    {SubmissionStatus::evaluated, "evaluated"},
    {SubmissionStatus::internal_error, "internal_error"},
}};

}  // namespace

std::string_view to_string(Verdict v) { return name_of(kVerdicts, v); }
std::string_view to_string(FeedbackVisibility v) { return name_of(kVisibility, v); }
std::string_view to_string(CheckerKind k) { return name_of(kCheckerKinds, k); }
std::string_view to_string(SubmissionStatus s) { return name_of(kStatuses, s); }

std::optional<Verdict> parse_verdict(std::string_view s) { return lookup(kVerdicts, s); }
std::optional<FeedbackVisibility> parse_visibility(std::string_view s) { return lookup(kVisibility, s); }
std::optional<CheckerKind> parse_checker_kind(std::string_view s) { return lookup(kCheckerKinds, s); }
std::optional<SubmissionStatus> parse_status(std::string_view s) { return lookup(kStatuses, s); }

const LanguageProfile* TaskSpec::find_language(std::string_view id) const {
    for (const auto& l : languages)
        if (l.profile_id == id) return &l;
    return nullptr;
}

// ---------------------------------------------------------------------------

std::vector<std::string> template_placeholders(std::string_view command) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = command.find('{', pos)) != std::string_view::npos) {
        auto close = command.find('}', pos + 1);
        if (close == std::string_view::npos) break;
        out.emplace_back(command.substr(pos + 1, close - pos - 1));
        pos = close + 1;
    }
    return out;
}

TaskValidation validate_task(TaskSpec spec) {
    std::vector<std::string> errors;
    auto err = [&](std::string m) { errors.push_back(std::move(m)); };

    if (spec.task_id.empty()) err("task_id empty");

    if (spec.file_slots.empty()) err("file_slots empty");
    std::set<std::string> slots;
    for (const auto& s : spec.file_slots) {
        if (s.empty()) err("empty slot name");
        else if (!slots.insert(s).second) err("duplicate slot '" + s + "'");
        else if (s.find('/') != std::string::npos || s == "." || s == "..") err("invalid slot name '" + s + "'");
    }

    if (spec.max_score <= 0) err("max_score must be > 0");
    if (spec.unlock_day < 0) err("unlock_day must be >= 0");

    if (spec.languages.empty()) err("languages empty");
    std::set<std::string> language_ids;
    for (const auto& lang : spec.languages) {
        if (lang.profile_id.empty()) err("language with empty id");
        else if (!language_ids.insert(lang.profile_id).second) err("duplicate language '" + lang.profile_id + "'");
        if (lang.run_command.empty()) err("language '" + lang.profile_id + "': run_command empty");
        auto check_refs = [&](const std::string& cmd, std::string_view what) {
            for (const auto& ref : template_placeholders(cmd))
                if (!slots.contains(ref))
                    err("language '" + lang.profile_id + "': " + std::string(what) +
                        " references undeclared slot '" + ref + "'");
        };
        check_refs(lang.run_command, "run_command");
        if (lang.compile_command) check_refs(*lang.compile_command, "compile_command");
    }

    const auto& checker = spec.checker;
    const bool comparison_based = checker.kind != CheckerKind::custom;
    if (checker.numeric_epsilon) {
        if (checker.kind != CheckerKind::numeric_token) err("checker: numeric_epsilon only applies to numeric_token");
        else if (!(*checker.numeric_epsilon >= 0.0)) err("checker: numeric_epsilon must be >= 0");
    } else if (checker.kind == CheckerKind::numeric_token) {
        err("checker: numeric_token requires numeric_epsilon");
    }
    if (checker.kind == CheckerKind::custom && !checker.custom_checker_ref) err("checker: custom requires a checker program");
    if (checker.kind != CheckerKind::custom && checker.custom_checker_ref) err("checker: program only applies to custom");
    if (!(checker.checker_time_limit > 0.0)) err("checker: time_limit must be > 0");

    if (spec.test_cases.empty()) err("test_cases empty");
    std::set<std::string> case_ids;
    for (const auto& tc : spec.test_cases) {
        if (tc.case_id.empty()) err("test case with empty id");
        else if (!case_ids.insert(tc.case_id).second) err("duplicate test case '" + tc.case_id + "'");
        if (!tc.weight.positive()) err("test case '" + tc.case_id + "': weight must be > 0");
        if (comparison_based && !tc.expected_ref)
            err("test case '" + tc.case_id + "': expected output required for " + std::string(to_string(checker.kind)) +
                " checker");
    }

    const auto& sb = spec.sandbox;
    if (!(sb.cpu_time_limit > 0.0)) err("sandbox: cpu_time_limit must be > 0");
    if (sb.wall_time_limit < sb.cpu_time_limit) err("sandbox: wall_time_limit must be >= cpu_time_limit");
    if (sb.memory_limit == 0) err("sandbox: memory_limit must be > 0");
    if (sb.max_output == 0) err("sandbox: max_output must be > 0");
    std::set<std::string> guests;
    for (const auto& m : sb.mounts) {
        if (m.guest_path.empty() || m.guest_path.front() != '/') err("sandbox: guest path '" + m.guest_path + "' must be absolute");
        if (!guests.insert(m.guest_path).second) err("sandbox: duplicate guest path '" + m.guest_path + "'");
    }

    if (!errors.empty()) return ValidationErrors{std::move(errors)};
    return ValidatedTask(std::move(spec));
}

// ---------------------------------------------------------------------------

std::int64_t aggregate_score(std::span<const ScoredCase> cases, std::int64_t max_score) {
    if (cases.empty()) throw InvalidArgument("aggregate_score: empty case list");
    if (max_score <= 0) throw InvalidArgument("aggregate_score: max_score must be > 0");

    using wide = __int128;
    wide common = 1;
    for (const auto& c : cases) {
        if (!c.weight.positive()) throw InvalidArgument("aggregate_score: weights must be > 0");
        common = std::lcm(static_cast<std::int64_t>(common), c.weight.den);
    }
    wide passed = 0;
    wide total = 0;
    for (const auto& c : cases) {
        wide scaled = static_cast<wide>(c.weight.num) * (common / c.weight.den);
        total += scaled;
        if (c.verdict == Verdict::pass) passed += scaled;
    }
    return static_cast<std::int64_t>((static_cast<wide>(max_score) * passed) / total);
}

std::int64_t best_score(std::span<const Submission> history) {
    std::int64_t best = 0;
    for (const auto& s : history)
        if (s.status == SubmissionStatus::evaluated && s.results) best = std::max(best, s.results->score);
    return best;
}

// ---------------------------------------------------------------------------

namespace {
int rank(SubmissionStatus s) {
    switch (s) {
        case SubmissionStatus::queued: return 0;
        case SubmissionStatus::compiling: return 1;
        case SubmissionStatus::running: return 2;
        case SubmissionStatus::evaluated:
        case SubmissionStatus::internal_error: return 3;
    }
    return 3;
}
}  // namespace

bool is_terminal(SubmissionStatus s) { return rank(s) == 3; }

bool is_forward_transition(SubmissionStatus from, SubmissionStatus to) {
    return !is_terminal(from) && rank(to) > rank(from);
}

bool advance_status(Submission& submission, SubmissionStatus to) {
    if (!is_forward_transition(submission.status, to)) return false;
    if (to == SubmissionStatus::evaluated && !submission.results) return false;
    if (to != SubmissionStatus::evaluated) submission.results.reset();
    submission.status = to;
    return true;
}

bool record_evaluation(Submission& submission, EvaluationReport report) {
    if (!is_forward_transition(submission.status, SubmissionStatus::evaluated)) return false;
    submission.results = std::move(report);
    submission.status = SubmissionStatus::evaluated;
    return true;
}

}  // namespace sae
