#include "sae/service.hpp"

#include "sae/error.hpp"
#include "sae/null_backend.hpp"
#include "sae/process_backend.hpp"
#include "sae/serialization.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace sae {

using nlohmann::json;

std::shared_ptr<SandboxBackend> make_backend(const ServiceConfig& config) {
    if (config.backend == "null") {
        // Demo backend: every run exits 0 with empty output.
        return std::make_shared<NullBackend>(NullBackend::constant_output(""));
    }
    ProcessBackendOptions opts;
    if (!config.sandbox_root.empty()) opts.work_root = config.sandbox_root;
    if (!config.bundles_dir.empty()) opts.bundles = BundleRegistry(config.bundles_dir);
    opts.max_concurrent = config.max_concurrent_sandboxes;
    return std::make_shared<ProcessBackend>(std::move(opts));
}

JobResult run_evaluation(Store& store, SandboxBackend& backend, const std::string& submission_id) {
    try {
        auto sub = store.load_submission(submission_id);
        if (!sub) return InfraFailure{"submission " + submission_id + " not found"};
        auto spec = store.load_task(sub->task_id);
        if (!spec) return InfraFailure{"task " + sub->task_id + " not found"};
        auto validated = validate_task(*spec);
        if (auto* errs = std::get_if<ValidationErrors>(&validated))
            return InfraFailure{"stored task is invalid: " + errs->messages.front()};
        auto plan = make_plan(std::get<ValidatedTask>(validated), *sub);
        Evaluator evaluator(backend, store.blobs());
        auto result = evaluator.evaluate(plan, [&](SubmissionStatus s) {
            store.update_submission(submission_id, [s](Submission& x) { return advance_status(x, s); });
        });
        if (auto* r = std::get_if<EvaluationReport>(&result)) return *r;
        return std::get<InfraFailure>(result);
    } catch (const std::exception& e) {
        return InfraFailure{e.what()};
    }
}

Service::Service(ServiceConfig config, std::shared_ptr<SandboxBackend> backend)
    : config_(std::move(config)),
      store_(config_.storage),
      users_(store_),
      materials_(store_),
      backend_(backend ? std::move(backend) : make_backend(config_)) {
    if (config_.course_start) calendar_ = CourseCalendar::parse(*config_.course_start);

    SchedulerOptions opts;
    opts.max_attempts = config_.max_attempts;
    opts.heartbeat_window = config_.heartbeat_window;
    SchedulerHooks hooks;
    hooks.submission_exists = [this](const std::string& id) { return store_.load_submission(id).has_value(); };
    hooks.job_changed = [this](const EvaluationJob& job) { store_.records().put(Collection::jobs, job.job_id, job); };
    hooks.evaluated = [this](const std::string& id, const EvaluationReport& r) { on_evaluated(id, r); };
    hooks.internal_error = [this](const std::string& id, const std::string& reason) {
        spdlog::error("submission {} failed permanently: {}", id, reason);
        store_.update_submission(id, [](Submission& s) { return advance_status(s, SubmissionStatus::internal_error); });
    };
    scheduler_ = std::make_unique<Scheduler>(opts, std::move(hooks));
}

Service::~Service() { stop(); }

void Service::on_evaluated(const std::string& submission_id, const EvaluationReport& report) {
    auto sub = store_.load_submission(submission_id);
    if (!sub) return;
    auto task = store_.load_task(sub->task_id);
    // A report is only accepted when its score is what its verdicts imply.
    bool consistent = false;
    if (task && report.per_case.size() == task->test_cases.size()) {
        std::vector<ScoredCase> scored;
        bool ids_match = true;
        for (std::size_t i = 0; i < report.per_case.size(); ++i) {
            ids_match = ids_match && report.per_case[i].case_id == task->test_cases[i].case_id;
            scored.push_back({report.per_case[i].verdict, task->test_cases[i].weight});
        }
        consistent = ids_match && aggregate_score(scored, task->max_score) == report.score;
    }
    if (!consistent) {
        spdlog::error("rejecting inconsistent report for submission {}", submission_id);
        store_.update_submission(submission_id,
                                 [](Submission& s) { return advance_status(s, SubmissionStatus::internal_error); });
        return;
    }
    store_.update_submission(submission_id, [&](Submission& s) { return record_evaluation(s, report); });
}

std::int64_t Service::course_day() const {
    if (auto r = const_cast<Store&>(store_).records().get(Collection::settings, "course_day"))
        return r->body.get<std::int64_t>();
    if (calendar_) return calendar_->day_of(now_utc());
    return 0;
}

std::optional<std::chrono::milliseconds> Service::time_left(Timestamp now) const {
    if (!config_.course_end) return std::nullopt;
    auto left = *config_.course_end - now;
    return std::max(std::chrono::milliseconds(0), std::chrono::duration_cast<std::chrono::milliseconds>(left));
}

ImportOutcome Service::import_task(const ParsedTask& task) {
    auto validated = validate_task(task.spec);
    if (auto* errs = std::get_if<ValidationErrors>(&validated)) throw InvalidArgument(errs->messages.front());
    for (const auto& [hash, bytes] : task.blobs) {
        auto ref = store_.blobs().put(bytes);
        if (ref.hash != hash) throw InvalidArgument("blob hash mismatch for " + hash);
    }
    if (task.statement) {
        auto name = std::filesystem::path(task.statement_file).filename().string();
        materials_.add(task.spec.statement_ref, task.spec.title.empty() ? task.spec.task_id : task.spec.title,
                       *task.statement, task.spec.unlock_day, MaterialCategory::exercise, name);
    }
    if (auto problem = materials_.check_statement(task.spec)) throw InvalidArgument(*problem);
    return {task.spec.task_id, store_.save_task(task.spec)};
}

Submission Service::submit(const std::string& user_id, const std::string& task_id,
                           const std::map<std::string, std::string>& files, const std::string& language) {
    auto task = store_.load_task(task_id);
    if (!task) throw NotFound("task " + task_id + " not found");
    for (const auto& slot : task->file_slots)
        if (!files.count(slot)) throw InvalidArgument("missing file for slot '" + slot + "'");
    for (const auto& [slot, _] : files)
        if (std::find(task->file_slots.begin(), task->file_slots.end(), slot) == task->file_slots.end())
            throw InvalidArgument("unknown slot '" + slot + "'");
    if (!task->find_language(language)) throw InvalidArgument("unknown language '" + language + "'");

    auto sub = store_.create_submission(user_id, task_id, files, language);
    scheduler_->enqueue(sub.submission_id, task->affinity);
    return sub;
}

void Service::persist_worker(const WorkerRecord& w) { store_.records().put(Collection::workers, w.worker_id, w); }

void Service::register_worker(const std::string& worker_id, std::vector<std::string> labels) {
    scheduler_->register_worker(worker_id, std::move(labels));
    if (auto r = store_.records().get(Collection::workers, worker_id)) {
        auto state = parse_worker_state(r->body.value("admin_state", "active"));
        if (state == WorkerAdminState::disabled) scheduler_->set_worker_state(worker_id, *state);
    }
    for (const auto& w : scheduler_->snapshot().workers)
        if (w.worker_id == worker_id) persist_worker(w);
}

void Service::set_worker_state(const std::string& worker_id, WorkerAdminState state) {
    scheduler_->set_worker_state(worker_id, state);
    for (const auto& w : scheduler_->snapshot().workers)
        if (w.worker_id == worker_id) persist_worker(w);
}

std::vector<CheckerAlert> Service::checker_alerts() const {
    std::vector<CheckerAlert> out;
    for (const auto& s : store_.list_submissions()) {
        if (!s.results) continue;
        for (const auto& c : s.results->per_case)
            if (c.verdict == Verdict::checker_error) out.push_back({s.submission_id, s.task_id, c.case_id, c.message});
    }
    return out;
}

void Service::start() {
    if (running_.exchange(true)) return;

    std::vector<EvaluationJob> jobs;
    for (const auto& r : store_.records().list(Collection::jobs)) jobs.push_back(r.body.get<EvaluationJob>());
    scheduler_->recover(jobs);
    // Submissions persisted just before a crash may have no job yet.
    for (const auto& s : store_.list_submissions()) {
        if (is_terminal(s.status)) continue;
        auto task = store_.load_task(s.task_id);
        scheduler_->enqueue(s.submission_id, task ? task->affinity : "");
    }
    std::size_t open = scheduler_->snapshot().pending.size();
    if (open) spdlog::info("recovered {} pending job(s)", open);

    for (int i = 1; i <= config_.workers; ++i) {
        auto id = "local-" + std::to_string(i);
        register_worker(id, config_.worker_labels);
        local_workers_.push_back(id);
        threads_.emplace_back([this, id] { worker_loop(id); });
    }
    threads_.emplace_back([this] { reaper_loop(); });
}

void Service::stop() {
    if (!running_.exchange(false)) return;
    {
        std::lock_guard lock(stop_mu_);
    }
    stop_cv_.notify_all();
    scheduler_->notify_all();
    for (auto& t : threads_)
        if (t.joinable()) t.join();
    threads_.clear();
    local_workers_.clear();
}

void Service::worker_loop(std::string worker_id) {
    while (running_) {
        std::optional<EvaluationJob> job;
        try {
            job = scheduler_->claim_next_wait(worker_id, std::chrono::milliseconds(200));
        } catch (const std::exception& e) {
            spdlog::error("worker {}: {}", worker_id, e.what());
            std::this_thread::sleep_for(std::chrono::milliseconds(200));
            continue;
        }
        if (!job) continue;
        spdlog::debug("worker {} evaluating {}", worker_id, job->submission_id);
        auto result = run_evaluation(store_, *backend_, job->submission_id);
        if (auto* f = std::get_if<InfraFailure>(&result))
            spdlog::warn("worker {}: job {} failed: {}", worker_id, job->job_id, f->reason);
        scheduler_->complete(job->job_id, worker_id, result);
    }
}

void Service::reaper_loop() {
    auto period = std::clamp(config_.heartbeat_window / 4, std::chrono::milliseconds(10), std::chrono::milliseconds(1000));
    std::unique_lock lock(stop_mu_);
    while (running_) {
        lock.unlock();
        try {
            // In-process workers live exactly as long as this loop does.
            for (const auto& id : local_workers_) scheduler_->heartbeat(id);
            for (const auto& job : scheduler_->reap_dead_workers())
                spdlog::warn("job {} returned to the queue: {}", job.job_id, job.last_error);
            for (const auto& w : scheduler_->snapshot().workers) persist_worker(w);
        } catch (const std::exception& e) {
            spdlog::error("reaper: {}", e.what());
        }
        lock.lock();
        stop_cv_.wait_for(lock, period, [this] { return !running_; });
    }
}

}  // namespace sae
