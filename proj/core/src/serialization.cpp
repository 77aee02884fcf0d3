#include "sae/serialization.hpp"

#include "sae/error.hpp"

#include <cstdio>
#include <ctime>

namespace sae {

using nlohmann::json;

std::string format_rfc3339(Timestamp t) {
    auto ms = t.time_since_epoch().count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    int millis = static_cast<int>(ms % 1000);
    if (millis < 0) {
        millis += 1000;
        --secs;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, millis);
    return buf;
}

std::optional<Timestamp> parse_rfc3339(std::string_view text) {
    std::tm tm{};
    int millis = 0;
    std::string s(text);
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%*1[Tt ]%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                    &tm.tm_min, &tm.tm_sec, &consumed) != 6 ||
        consumed != 19)
        return std::nullopt;
    static constexpr int kDays[] = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    bool leap = (tm.tm_year % 4 == 0 && tm.tm_year % 100 != 0) || tm.tm_year % 400 == 0;
    if (tm.tm_mon < 1 || tm.tm_mon > 12 || tm.tm_mday < 1 || tm.tm_mday > kDays[tm.tm_mon - 1] ||
        (tm.tm_mon == 2 && tm.tm_mday == 29 && !leap) || tm.tm_hour > 23 || tm.tm_min > 59 || tm.tm_sec > 60)
        return std::nullopt;
    std::string_view rest = std::string_view(s).substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest.front() == '.') {
        rest.remove_prefix(1);
        int digits = 0;
        while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') {
            if (digits < 3) millis = millis * 10 + (rest.front() - '0');
            ++digits;
            rest.remove_prefix(1);
        }
        if (digits == 0) return std::nullopt;
        for (int d = digits; d < 3; ++d) millis *= 10;
    }
    std::int64_t offset_min = 0;
    if (rest == "Z" || rest == "z") {
        // UTC
    } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
        int hh = 0, mm = 0;
        if (std::sscanf(std::string(rest.substr(1)).c_str(), "%2d:%2d", &hh, &mm) != 2 || hh > 23 || mm > 59)
            return std::nullopt;
        offset_min = (rest[0] == '-' ? -1 : 1) * (hh * 60 + mm);
    } else {
        return std::nullopt;
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    std::int64_t secs = static_cast<std::int64_t>(timegm(&tm)) - offset_min * 60;
    return Timestamp(std::chrono::milliseconds(secs * 1000 + millis));
}

namespace {

template <typename E>
E enum_from(const json& j, std::optional<E> (*parse)(std::string_view), const char* what) {
    auto v = parse(j.get<std::string>());
    if (!v) throw InvalidArgument(std::string("unknown ") + what + " '" + j.get<std::string>() + "'");
    return *v;
}

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& v) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) v = it->get<T>();
    else v.reset();
}

}  // namespace

void to_json(json& j, const Weight& w) { j = w.to_string(); }
void from_json(const json& j, Weight& w) {
    auto parsed = Weight::parse(j.is_string() ? j.get<std::string>() : j.dump());
    if (!parsed) throw InvalidArgument("bad weight " + j.dump());
    w = *parsed;
}

void to_json(json& j, const TestCase& c) {
    j = json{{"case_id", c.case_id}, {"args", c.args}, {"weight", c.weight},
             {"feedback", std::string(to_string(c.visibility))}};
    put_optional(j, "stdin_ref", c.stdin_ref);
    put_optional(j, "expected_ref", c.expected_ref);
}
void from_json(const json& j, TestCase& c) {
    j.at("case_id").get_to(c.case_id);
    c.args = j.value("args", std::vector<std::string>{});
    j.at("weight").get_to(c.weight);
    c.visibility = enum_from<FeedbackVisibility>(j.value("feedback", json("full")), parse_visibility, "feedback");
    get_optional(j, "stdin_ref", c.stdin_ref);
    get_optional(j, "expected_ref", c.expected_ref);
}

void to_json(json& j, const CheckerPolicy& p) {
    j = json{{"kind", std::string(to_string(p.kind))}, {"time_limit", p.checker_time_limit}};
    put_optional(j, "numeric_epsilon", p.numeric_epsilon);
    put_optional(j, "custom_checker_ref", p.custom_checker_ref);
}
void from_json(const json& j, CheckerPolicy& p) {
    p.kind = enum_from<CheckerKind>(j.at("kind"), parse_checker_kind, "checker kind");
    p.checker_time_limit = j.value("time_limit", 10.0);
    get_optional(j, "numeric_epsilon", p.numeric_epsilon);
    get_optional(j, "custom_checker_ref", p.custom_checker_ref);
}

void to_json(json& j, const Mount& m) {
    j = json{{"host_path", m.host_path}, {"guest_path", m.guest_path}, {"read_only", m.read_only}};
}
void from_json(const json& j, Mount& m) {
    j.at("host_path").get_to(m.host_path);
    j.at("guest_path").get_to(m.guest_path);
    m.read_only = j.value("read_only", true);
}

void to_json(json& j, const SandboxPolicy& p) {
    j = json{{"cpu_time_limit", p.cpu_time_limit},   {"wall_time_limit", p.wall_time_limit},
             {"memory_limit", p.memory_limit},       {"max_output", p.max_output},
             {"mounts", p.mounts},                   {"network_allowed", p.network_allowed},
             {"dependencies", p.dependencies}};
}
void from_json(const json& j, SandboxPolicy& p) {
    j.at("cpu_time_limit").get_to(p.cpu_time_limit);
    j.at("wall_time_limit").get_to(p.wall_time_limit);
    j.at("memory_limit").get_to(p.memory_limit);
    j.at("max_output").get_to(p.max_output);
    p.mounts = j.value("mounts", std::vector<Mount>{});
    p.network_allowed = j.value("network_allowed", false);
    p.dependencies = j.value("dependencies", std::vector<std::string>{});
}

void to_json(json& j, const LanguageProfile& l) {
    j = json{{"id", l.profile_id},
             {"display_name", l.display_name},
             {"suffix", l.source_suffix},
             {"run", l.run_command}};
    put_optional(j, "compile", l.compile_command);
}
void from_json(const json& j, LanguageProfile& l) {
    j.at("id").get_to(l.profile_id);
    l.display_name = j.value("display_name", l.profile_id);
    l.source_suffix = j.value("suffix", "");
    j.at("run").get_to(l.run_command);
    get_optional(j, "compile", l.compile_command);
}

void to_json(json& j, const TaskSpec& t) {
    j = json{{"task_id", t.task_id},       {"title", t.title},         {"statement_ref", t.statement_ref},
             {"file_slots", t.file_slots}, {"languages", t.languages}, {"test_cases", t.test_cases},
             {"checker", t.checker},       {"sandbox", t.sandbox},     {"max_score", t.max_score},
             {"unlock_day", t.unlock_day}, {"affinity", t.affinity}};
}
void from_json(const json& j, TaskSpec& t) {
    j.at("task_id").get_to(t.task_id);
    t.title = j.value("title", "");
    t.statement_ref = j.value("statement_ref", "");
    j.at("file_slots").get_to(t.file_slots);
    j.at("languages").get_to(t.languages);
    j.at("test_cases").get_to(t.test_cases);
    j.at("checker").get_to(t.checker);
    j.at("sandbox").get_to(t.sandbox);
    j.at("max_score").get_to(t.max_score);
    t.unlock_day = j.value("unlock_day", std::int64_t{0});
    t.affinity = j.value("affinity", "");
}

void to_json(json& j, const CaseResult& r) {
    j = json{{"case_id", r.case_id},
             {"verdict", std::string(to_string(r.verdict))},
             {"message", r.message},
             {"time_used", r.time_used},
             {"memory_used", r.memory_used}};
    put_optional(j, "stdout_ref", r.stdout_ref);
    put_optional(j, "stderr_ref", r.stderr_ref);
}
void from_json(const json& j, CaseResult& r) {
    j.at("case_id").get_to(r.case_id);
    r.verdict = enum_from<Verdict>(j.at("verdict"), parse_verdict, "verdict");
    r.message = j.value("message", "");
    r.time_used = j.value("time_used", 0.0);
    r.memory_used = j.value("memory_used", std::uint64_t{0});
    get_optional(j, "stdout_ref", r.stdout_ref);
    get_optional(j, "stderr_ref", r.stderr_ref);
}

void to_json(json& j, const EvaluationReport& r) { j = json{{"per_case", r.per_case}, {"score", r.score}}; }
void from_json(const json& j, EvaluationReport& r) {
    j.at("per_case").get_to(r.per_case);
    j.at("score").get_to(r.score);
}

void to_json(json& j, const Submission& s) {
    j = json{{"submission_id", s.submission_id},
             {"user_id", s.user_id},
             {"task_id", s.task_id},
             {"files", s.files},
             {"language", s.language},
             {"submitted_at", format_rfc3339(s.submitted_at)},
             {"status", std::string(to_string(s.status))}};
    if (s.results) j["results"] = *s.results;
}
void from_json(const json& j, Submission& s) {
    j.at("submission_id").get_to(s.submission_id);
    j.at("user_id").get_to(s.user_id);
    j.at("task_id").get_to(s.task_id);
    j.at("files").get_to(s.files);
    j.at("language").get_to(s.language);
    auto ts = parse_rfc3339(j.at("submitted_at").get<std::string>());
    if (!ts) throw InvalidArgument("bad submitted_at");
    s.submitted_at = *ts;
    s.status = enum_from<SubmissionStatus>(j.at("status"), parse_status, "status");
    get_optional(j, "results", s.results);
}

}  // namespace sae
