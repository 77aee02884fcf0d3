#include "sae/scheduler.hpp"

#include "sae/error.hpp"
#include "sae/serialization.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace sae {

using nlohmann::json;

std::string_view to_string(JobState s) {
    switch (s) {
        case JobState::pending: return "pending";
        case JobState::claimed: return "claimed";
        case JobState::done: return "done";
        case JobState::failed: return "failed";
    }
    return "unknown";
}

std::string_view to_string(WorkerAdminState s) { return s == WorkerAdminState::active ? "active" : "disabled"; }
std::string_view to_string(WorkerLiveness s) { return s == WorkerLiveness::alive ? "alive" : "missed_heartbeat"; }

std::optional<WorkerAdminState> parse_worker_state(std::string_view s) {
    if (s == "active") return WorkerAdminState::active;
    if (s == "disabled") return WorkerAdminState::disabled;
    return std::nullopt;
}

namespace {
std::optional<JobState> parse_job_state(std::string_view s) {
    for (auto st : {JobState::pending, JobState::claimed, JobState::done, JobState::failed})
        if (to_string(st) == s) return st;
    return std::nullopt;
}
}  // namespace

void to_json(json& j, const EvaluationJob& job) {
    j = json{{"job_id", job.job_id},
             {"submission_id", job.submission_id},
             {"affinity", job.affinity},
             {"enqueued_at", format_rfc3339(job.enqueued_at)},
             {"sequence", job.sequence},
             {"state", std::string(to_string(job.state))},
             {"attempts", job.attempts},
             {"claimed_by", job.claimed_by ? json(*job.claimed_by) : json(nullptr)},
             {"last_error", job.last_error}};
}

void from_json(const json& j, EvaluationJob& job) {
    j.at("job_id").get_to(job.job_id);
    j.at("submission_id").get_to(job.submission_id);
    job.affinity = j.value("affinity", "");
    job.enqueued_at = parse_rfc3339(j.at("enqueued_at").get<std::string>()).value_or(Timestamp{});
    job.sequence = j.value("sequence", std::uint64_t{0});
    auto st = parse_job_state(j.at("state").get<std::string>());
    if (!st) throw InvalidArgument("bad job state");
    job.state = *st;
    job.attempts = j.value("attempts", 0);
    if (auto it = j.find("claimed_by"); it != j.end() && it->is_string()) job.claimed_by = it->get<std::string>();
    else job.claimed_by.reset();
    job.last_error = j.value("last_error", "");
}

void to_json(json& j, const WorkerRecord& w) {
    j = json{{"worker_id", w.worker_id},
             {"admin_state", std::string(to_string(w.admin_state))},
             {"liveness", std::string(to_string(w.liveness))},
             {"current_job", w.current_job ? json(*w.current_job) : json(nullptr)},
             {"completed_count", w.completed_count},
             {"labels", w.labels}};
}

// ---------------------------------------------------------------------------

Scheduler::Scheduler(SchedulerOptions options, SchedulerHooks hooks)
    : options_(std::move(options)), hooks_(std::move(hooks)) {
    if (options_.max_attempts < 1) options_.max_attempts = 1;
}

void Scheduler::changed(const EvaluationJob& job) {
    if (hooks_.job_changed) hooks_.job_changed(job);
}

EvaluationJob Scheduler::enqueue(const std::string& submission_id, const std::string& affinity) {
    std::unique_lock lock(mu_);
    if (auto it = open_by_submission_.find(submission_id); it != open_by_submission_.end()) return jobs_.at(it->second);
    if (hooks_.submission_exists && !hooks_.submission_exists(submission_id))
        throw NotFound("unknown submission " + submission_id);

    EvaluationJob job;
    job.job_id = "j-" + std::to_string(next_job_++);
    job.submission_id = submission_id;
    job.affinity = affinity;
    job.enqueued_at = now_utc();
    job.sequence = next_sequence_++;
    pending_[job.sequence] = job.job_id;
    open_by_submission_[submission_id] = job.job_id;
    jobs_[job.job_id] = job;
    changed(job);
    lock.unlock();
    cv_.notify_all();
    return job;
}

void Scheduler::register_worker(const std::string& worker_id, std::vector<std::string> labels) {
    {
        std::lock_guard lock(mu_);
        auto& w = workers_[worker_id];
        w.worker_id = worker_id;
        w.labels = std::move(labels);
        w.liveness = WorkerLiveness::alive;
        last_seen_[worker_id] = options_.clock();
    }
    cv_.notify_all();
}

std::optional<EvaluationJob> Scheduler::claim_locked(const std::string& worker_id) {
    auto wit = workers_.find(worker_id);
    if (wit == workers_.end()) throw NotFound("unknown worker " + worker_id);
    auto& w = wit->second;
    if (w.admin_state != WorkerAdminState::active || w.liveness != WorkerLiveness::alive || w.current_job)
        return std::nullopt;
    for (auto it = pending_.begin(); it != pending_.end(); ++it) {
        auto& job = jobs_.at(it->second);
        if (!job.affinity.empty() && std::find(w.labels.begin(), w.labels.end(), job.affinity) == w.labels.end())
            continue;
        pending_.erase(it);
        job.state = JobState::claimed;
        job.claimed_by = worker_id;
        w.current_job = job.job_id;
        changed(job);
        return job;
    }
    return std::nullopt;
}

std::optional<EvaluationJob> Scheduler::claim_next(const std::string& worker_id) {
    std::lock_guard lock(mu_);
    return claim_locked(worker_id);
}

std::optional<EvaluationJob> Scheduler::claim_next_wait(const std::string& worker_id,
                                                        std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
        if (auto job = claim_locked(worker_id)) return job;
        if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) return claim_locked(worker_id);
    }
}

void Scheduler::requeue_locked(EvaluationJob& job, const std::string& reason) {
    job.attempts += 1;
    job.claimed_by.reset();
    job.last_error = reason;
    open_by_submission_.erase(job.submission_id);
    if (job.attempts >= options_.max_attempts) {
        job.state = JobState::failed;
        changed(job);
        if (hooks_.internal_error) hooks_.internal_error(job.submission_id, reason);
        return;
    }
    job.state = JobState::pending;
    job.sequence = next_sequence_++;
    pending_[job.sequence] = job.job_id;
    open_by_submission_[job.submission_id] = job.job_id;
    changed(job);
}

bool Scheduler::complete(const std::string& job_id, const std::string& worker_id, const JobResult& result) {
    std::unique_lock lock(mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end() || it->second.state != JobState::claimed || it->second.claimed_by != worker_id) {
        spdlog::warn("complete({}) by {} ignored: job is not claimed by that worker", job_id, worker_id);
        return false;
    }
    auto& job = it->second;
    auto& w = workers_.at(worker_id);
    w.current_job.reset();
    if (const auto* report = std::get_if<EvaluationReport>(&result)) {
        job.state = JobState::done;
        job.claimed_by.reset();
        open_by_submission_.erase(job.submission_id);
        w.completed_count += 1;
        changed(job);
        if (hooks_.evaluated) hooks_.evaluated(job.submission_id, *report);
    } else {
        requeue_locked(job, std::get<InfraFailure>(result).reason);
    }
    lock.unlock();
    cv_.notify_all();
    return true;
}

void Scheduler::set_worker_state(const std::string& worker_id, WorkerAdminState state) {
    {
        std::lock_guard lock(mu_);
        auto it = workers_.find(worker_id);
        if (it == workers_.end()) throw NotFound("unknown worker " + worker_id);
        it->second.admin_state = state;
    }
    cv_.notify_all();
}

void Scheduler::heartbeat(const std::string& worker_id) {
    std::lock_guard lock(mu_);
    auto it = workers_.find(worker_id);
    if (it == workers_.end()) throw NotFound("unknown worker " + worker_id);
    last_seen_[worker_id] = options_.clock();
    it->second.liveness = WorkerLiveness::alive;
}

void Scheduler::release_worker_job_locked(WorkerRecord& w, const std::string& reason,
                                          std::vector<EvaluationJob>& out) {
    if (!w.current_job) return;
    auto& job = jobs_.at(*w.current_job);
    w.current_job.reset();
    requeue_locked(job, reason);
    out.push_back(job);
}

std::vector<EvaluationJob> Scheduler::reap_dead_workers() {
    std::vector<EvaluationJob> out;
    {
        std::lock_guard lock(mu_);
        auto now = options_.clock();
        for (auto& [id, w] : workers_) {
            if (now - last_seen_[id] <= options_.heartbeat_window) continue;
            if (w.liveness == WorkerLiveness::alive) spdlog::warn("worker {} missed its heartbeat", id);
            w.liveness = WorkerLiveness::missed_heartbeat;
            release_worker_job_locked(w, "worker " + id + " missed its heartbeat", out);
        }
    }
    if (!out.empty()) cv_.notify_all();
    return out;
}

std::vector<EvaluationJob> Scheduler::forget_worker(const std::string& worker_id) {
    std::vector<EvaluationJob> out;
    {
        std::lock_guard lock(mu_);
        auto it = workers_.find(worker_id);
        if (it == workers_.end()) throw NotFound("unknown worker " + worker_id);
        it->second.liveness = WorkerLiveness::missed_heartbeat;
        release_worker_job_locked(it->second, "worker " + worker_id + " stopped", out);
    }
    cv_.notify_all();
    return out;
}

void Scheduler::recover(std::vector<EvaluationJob> jobs) {
    {
        std::lock_guard lock(mu_);
        std::sort(jobs.begin(), jobs.end(),
                  [](const EvaluationJob& a, const EvaluationJob& b) { return a.sequence < b.sequence; });
        for (auto& job : jobs) {
            next_sequence_ = std::max(next_sequence_, job.sequence + 1);
            if (job.job_id.starts_with("j-")) {
                try {
                    next_job_ = std::max<std::uint64_t>(next_job_, std::stoull(job.job_id.substr(2)) + 1);
                } catch (const std::exception&) {
                }
            }
        }
        for (auto& job : jobs) {
            auto [it, inserted] = jobs_.emplace(job.job_id, job);
            if (!inserted) continue;
            auto& j = it->second;
            if (j.state == JobState::claimed) {
                auto reason = "recovered after restart (was claimed by " + j.claimed_by.value_or("?") + ")";
                requeue_locked(j, reason);
            } else if (j.state == JobState::pending) {
                pending_[j.sequence] = j.job_id;
                open_by_submission_[j.submission_id] = j.job_id;
            }
        }
    }
    cv_.notify_all();
}

SchedulerSnapshot Scheduler::snapshot() const {
    std::lock_guard lock(mu_);
    SchedulerSnapshot s;
    for (const auto& [seq, id] : pending_) s.pending.push_back(jobs_.at(id));
    for (const auto& [id, job] : jobs_) {
        if (job.state == JobState::claimed) s.claimed.push_back(job);
        else if (job.state == JobState::done) ++s.done;
        else if (job.state == JobState::failed) ++s.failed;
    }
    std::sort(s.claimed.begin(), s.claimed.end(),
              [](const EvaluationJob& a, const EvaluationJob& b) { return a.sequence < b.sequence; });
    for (const auto& [id, w] : workers_) s.workers.push_back(w);
    return s;
}

std::optional<EvaluationJob> Scheduler::job(const std::string& job_id) const {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

void Scheduler::notify_all() { cv_.notify_all(); }

}  // namespace sae
