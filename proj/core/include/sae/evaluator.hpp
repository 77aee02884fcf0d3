#pragma once

// Worker-side pipeline: compile once, run each test case in a fresh sandbox,
// check its output and fold the verdicts into a report.

#include "sae/model.hpp"
#include "sae/sandbox.hpp"
#include "sae/scheduler.hpp"
#include "sae/store.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace sae {

struct EvaluationPlan {
    std::string submission_id;
    LanguageProfile language;
    std::vector<std::string> slots;
    std::map<std::string, std::string> files;  // slot -> blob hash
    SandboxPolicy sandbox;
    std::vector<TestCase> cases;
    CheckerPolicy checker;
    std::int64_t max_score = 100;
};

/// Throws InvalidArgument when the submission does not fit the task (wrong
/// task, unknown language, missing slot).
EvaluationPlan make_plan(const ValidatedTask& task, const Submission& submission);

inline constexpr std::size_t kStderrExcerptLimit = 2048;

/// Last `limit` bytes of `bytes`, lossily decoded to UTF-8. Leading UTF-8
/// continuation bytes left by the cut are dropped.
std::string excerpt_stderr(std::string_view bytes, std::size_t limit = kStderrExcerptLimit);

using EvaluationResult = std::variant<EvaluationReport, InfraFailure>;
using StatusCallback = std::function<void(SubmissionStatus)>;

class Evaluator {
public:
    /// Input blobs (sources, stdin, expected, checker) are read from `blobs`;
    /// each case's stdout and stderr are written back to it.
    Evaluator(SandboxBackend& backend, BlobStore& blobs) : backend_(backend), blobs_(blobs) {}

    /// Never throws for user-code behaviour. Sandbox setup problems and
    /// missing blobs come back as InfraFailure so the job can be retried.
    EvaluationResult evaluate(const EvaluationPlan& plan, const StatusCallback& on_status = {});

private:
    SandboxBackend& backend_;
    BlobStore& blobs_;
};

}  // namespace sae
