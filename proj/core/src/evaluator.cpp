#include "sae/evaluator.hpp"

#include "sae/checker.hpp"
#include "sae/command.hpp"
#include "sae/error.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>
#include <set>

namespace sae {

EvaluationPlan make_plan(const ValidatedTask& task, const Submission& submission) {
    const TaskSpec& spec = task.spec();
    if (submission.task_id != spec.task_id)
        throw InvalidArgument("submission " + submission.submission_id + " belongs to task " + submission.task_id);
    const LanguageProfile* lang = spec.find_language(submission.language);
    if (!lang) throw InvalidArgument("unknown language '" + submission.language + "'");

    EvaluationPlan plan;
    plan.submission_id = submission.submission_id;
    plan.language = *lang;
    plan.slots = spec.file_slots;
    for (const auto& slot : spec.file_slots) {
        auto it = submission.files.find(slot);
        if (it == submission.files.end()) throw InvalidArgument("missing file for slot '" + slot + "'");
        plan.files[slot] = it->second;
    }
    plan.sandbox = spec.sandbox;
    plan.cases = spec.test_cases;
    plan.checker = spec.checker;
    plan.max_score = spec.max_score;
    return plan;
}

std::string excerpt_stderr(std::string_view bytes, std::size_t limit) {
    if (bytes.size() > limit) {
        bytes.remove_prefix(bytes.size() - limit);
        std::size_t skip = 0;
        while (skip < bytes.size() && skip < 3 && (static_cast<unsigned char>(bytes[skip]) & 0xC0) == 0x80) ++skip;
        bytes.remove_prefix(skip);
    }
    return lossy_utf8(bytes);
}

namespace {

std::string seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g s", s);
    return buf;
}

std::string with_excerpt(std::string head, std::string_view stderr_data) {
    auto tail = excerpt_stderr(stderr_data);
    while (!tail.empty() && (tail.back() == '\n' || tail.back() == '\r' || tail.back() == ' ')) tail.pop_back();
    if (!tail.empty()) head += "\n" + tail;
    return head;
}

// Verdict for anything other than a clean exit 0; nullopt means "ask the checker".
std::optional<std::pair<Verdict, std::string>> runtime_verdict(const ExecutionOutcome& out,
                                                               const SandboxPolicy& policy) {
    switch (out.termination) {
        case Termination::cpu_limit:
            return std::pair{Verdict::time_limit, "CPU time limit of " + seconds(policy.cpu_time_limit) + " exceeded"};
        case Termination::wall_limit:
            return std::pair{Verdict::time_limit, "wall time limit of " + seconds(policy.wall_time_limit) + " exceeded"};
        case Termination::memory_limit:
            return std::pair{Verdict::memory_limit,
                             "memory limit of " + std::to_string(policy.memory_limit / kMiB) + " MiB exceeded"};
        case Termination::output_limit:
            return std::pair{Verdict::runtime_error,
                             "output limit of " + std::to_string(policy.max_output) + " bytes exceeded"};
        case Termination::sandbox_failure:
        case Termination::exited: break;
    }
    if (out.signal != 0)
        return std::pair{Verdict::runtime_error,
                         with_excerpt("terminated by signal " + std::to_string(out.signal), out.stderr_data)};
    if (out.exit_code != 0)
        return std::pair{Verdict::runtime_error,
                         with_excerpt("exited with status " + std::to_string(out.exit_code), out.stderr_data)};
    return std::nullopt;
}

Verdict to_verdict(CheckOutcome o) {
    switch (o) {
        case CheckOutcome::pass: return Verdict::pass;
        case CheckOutcome::wrong_output: return Verdict::wrong_output;
        case CheckOutcome::checker_error: return Verdict::checker_error;
    }
    return Verdict::checker_error;
}

struct Infra {
    std::string reason;
};

}  // namespace

EvaluationResult Evaluator::evaluate(const EvaluationPlan& plan, const StatusCallback& on_status) {
    auto publish = [&](SubmissionStatus s) {
        if (on_status) on_status(s);
    };

    try {
        std::map<std::string, std::string> slot_files;  // slot -> file name in the sandbox
        std::map<std::string, std::string> artifacts;    // file name -> bytes
        for (const auto& slot : plan.slots) {
            auto name = plan.language.file_name(slot);
            slot_files[slot] = name;
            artifacts[name] = blobs_.get(plan.files.at(slot));
        }
        std::set<std::string> sources;
        for (const auto& [name, _] : artifacts) sources.insert(name);

        std::vector<CaseResult> results;
        std::optional<std::string> compile_error;

        if (plan.language.compile_command) {
            publish(SubmissionStatus::compiling);
            SandboxGuard box(backend_.prepare(plan.sandbox));
            for (const auto& [name, data] : artifacts) box->put_file(name, data);
            auto out = box->execute(instantiate_command(*plan.language.compile_command, slot_files));
            if (out.termination == Termination::sandbox_failure) return InfraFailure{"compile: " + out.failure_reason};
            if (auto bad = runtime_verdict(out, plan.sandbox)) {
                std::string_view diag = out.stderr_data.empty() ? out.stdout_data : out.stderr_data;
                compile_error = with_excerpt("compilation failed: " + bad->second.substr(0, bad->second.find('\n')),
                                             diag);
            } else {
                artifacts = box->files();
            }
        }

        publish(SubmissionStatus::running);

        std::optional<std::string> checker_program;
        if (plan.checker.kind == CheckerKind::custom && !compile_error) {
            if (!plan.checker.custom_checker_ref) return InfraFailure{"custom checker has no program"};
            checker_program = blobs_.get(*plan.checker.custom_checker_ref);
        }

        for (const auto& tc : plan.cases) {
            CaseResult r;
            r.case_id = tc.case_id;
            if (compile_error) {
                r.verdict = Verdict::runtime_error;
                r.message = *compile_error;
                results.push_back(std::move(r));
                continue;
            }
            std::string input = tc.stdin_ref ? blobs_.get(*tc.stdin_ref) : std::string();
            std::string expected = tc.expected_ref ? blobs_.get(*tc.expected_ref) : std::string();

            ExecutionOutcome out;
            {
                SandboxGuard box(backend_.prepare(plan.sandbox));
                for (const auto& [name, data] : artifacts) box->put_file(name, data, !sources.count(name));
                out = box->execute(instantiate_command(plan.language.run_command, slot_files, tc.args),
                                   tc.stdin_ref ? std::optional<std::string_view>(input) : std::nullopt);
            }  // torn down before a custom checker claims a sandbox slot
            if (out.termination == Termination::sandbox_failure)
                return InfraFailure{"case " + tc.case_id + ": " + out.failure_reason};

            r.time_used = out.cpu_time_used;
            r.memory_used = out.memory_peak;
            r.stdout_ref = blobs_.put(out.stdout_data).hash;
            r.stderr_ref = blobs_.put(out.stderr_data).hash;

            if (auto bad = runtime_verdict(out, plan.sandbox)) {
                r.verdict = bad->first;
                r.message = std::move(bad->second);
            } else {
                CheckVerdict cv = plan.checker.kind == CheckerKind::custom
                                      ? run_custom_checker({*checker_program, input, expected, out.stdout_data},
                                                           plan.checker, plan.sandbox, backend_)
                                      : check_output(expected, out.stdout_data, plan.checker);
                r.verdict = to_verdict(cv.outcome);
                r.message = std::move(cv.message);
                if (r.verdict == Verdict::checker_error)
                    spdlog::warn("checker error on submission {} case {}: {}", plan.submission_id, tc.case_id,
                                 r.message);
            }
            results.push_back(std::move(r));
        }

        std::vector<ScoredCase> scored;
        scored.reserve(results.size());
        for (std::size_t i = 0; i < results.size(); ++i) scored.push_back({results[i].verdict, plan.cases[i].weight});
        EvaluationReport report;
        report.score = aggregate_score(scored, plan.max_score);
        report.per_case = std::move(results);
        return report;
    } catch (const SandboxError& e) {
        return InfraFailure{std::string("sandbox: ") + e.what()};
    } catch (const NotFound& e) {
        return InfraFailure{std::string("missing blob: ") + e.what()};
    } catch (const IoError& e) {
        return InfraFailure{std::string("io: ") + e.what()};
    }
}

}  // namespace sae
