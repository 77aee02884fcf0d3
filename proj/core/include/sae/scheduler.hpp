#pragma once

// FIFO job queue with a pull-based worker pool. Workers claim the oldest
// pending job they are eligible for; failed infrastructure runs go back to the
// tail until max_attempts; workers that stop heartbeating have their job
// returned to the queue. All operations are linearizable under one mutex.

#include "sae/model.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sae {

enum class JobState { pending, claimed, done, failed };
enum class WorkerAdminState { active, disabled };
enum class WorkerLiveness { alive, missed_heartbeat };

std::string_view to_string(JobState s);
std::string_view to_string(WorkerAdminState s);
std::string_view to_string(WorkerLiveness s);
std::optional<WorkerAdminState> parse_worker_state(std::string_view s);

struct EvaluationJob {
    std::string job_id;
    std::string submission_id;
    std::string affinity;  // empty: any worker
    Timestamp enqueued_at{};
    std::uint64_t sequence = 0;  // FIFO position; refreshed on re-queue
    JobState state = JobState::pending;
    int attempts = 0;
    std::optional<std::string> claimed_by;
    std::string last_error;
};

struct WorkerRecord {
    std::string worker_id;
    WorkerAdminState admin_state = WorkerAdminState::active;
    WorkerLiveness liveness = WorkerLiveness::alive;
    std::optional<std::string> current_job;
    std::int64_t completed_count = 0;
    std::vector<std::string> labels;  // affinity labels this worker serves
};

void to_json(nlohmann::json& j, const EvaluationJob& job);
void from_json(const nlohmann::json& j, EvaluationJob& job);
void to_json(nlohmann::json& j, const WorkerRecord& w);

struct InfraFailure {
    std::string reason;
};

using JobResult = std::variant<EvaluationReport, InfraFailure>;

struct SchedulerSnapshot {
    std::vector<EvaluationJob> pending;  // FIFO order
    std::vector<EvaluationJob> claimed;
    std::vector<WorkerRecord> workers;
    std::size_t done = 0;
    std::size_t failed = 0;
};

struct SchedulerOptions {
    int max_attempts = 3;
    std::chrono::milliseconds heartbeat_window{15000};
    std::function<std::chrono::steady_clock::time_point()> clock = [] { return std::chrono::steady_clock::now(); };
};

/// Hooks the owner installs to persist state and react to terminal results.
/// They are invoked with the scheduler lock held and must not call back in.
struct SchedulerHooks {
    std::function<bool(const std::string& submission_id)> submission_exists;
    std::function<void(const EvaluationJob&)> job_changed;
    std::function<void(const std::string& submission_id, const EvaluationReport&)> evaluated;
    std::function<void(const std::string& submission_id, const std::string& reason)> internal_error;
};

class Scheduler {
public:
    explicit Scheduler(SchedulerOptions options = {}, SchedulerHooks hooks = {});

    /// Appends a job for the submission, or returns the existing unfinished
    /// one. Throws NotFound when `submission_exists` rejects the id.
    EvaluationJob enqueue(const std::string& submission_id, const std::string& affinity = "");

    void register_worker(const std::string& worker_id, std::vector<std::string> labels = {});

    /// Oldest eligible pending job, now claimed by this worker; nullopt if the
    /// worker is disabled, missed its heartbeat, already holds a job, or
    /// nothing is eligible. Throws NotFound for unknown workers.
    std::optional<EvaluationJob> claim_next(const std::string& worker_id);

    /// claim_next, blocking up to `timeout` for work to appear.
    std::optional<EvaluationJob> claim_next_wait(const std::string& worker_id, std::chrono::milliseconds timeout);

    /// Finishes a claimed job. Returns false (and changes nothing) when the job
    /// is not currently claimed by `worker_id`.
    bool complete(const std::string& job_id, const std::string& worker_id, const JobResult& result);

    void set_worker_state(const std::string& worker_id, WorkerAdminState state);

    void heartbeat(const std::string& worker_id);

    /// Marks workers past the heartbeat window as missed_heartbeat and returns
    /// their claimed jobs to the queue (or fails them at max_attempts).
    std::vector<EvaluationJob> reap_dead_workers();

    /// Returns a dead worker's job immediately, e.g. when its thread is gone.
    std::vector<EvaluationJob> forget_worker(const std::string& worker_id);

    /// Loads persisted jobs after a restart; claimed jobs go back to pending.
    void recover(std::vector<EvaluationJob> jobs);

    SchedulerSnapshot snapshot() const;
    std::optional<EvaluationJob> job(const std::string& job_id) const;

    /// Wakes threads blocked in claim_next_wait.
    void notify_all();

private:
    std::optional<EvaluationJob> claim_locked(const std::string& worker_id);
    void requeue_locked(EvaluationJob& job, const std::string& reason);
    void release_worker_job_locked(WorkerRecord& w, const std::string& reason, std::vector<EvaluationJob>& out);
    void changed(const EvaluationJob& job);

    SchedulerOptions options_;
    SchedulerHooks hooks_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::string, EvaluationJob> jobs_;
    std::map<std::uint64_t, std::string> pending_;  // sequence -> job id
    std::map<std::string, std::string> open_by_submission_;
    std::map<std::string, WorkerRecord> workers_;
    std::map<std::string, std::chrono::steady_clock::time_point> last_seen_;
    std::uint64_t next_sequence_ = 1;
    std::uint64_t next_job_ = 1;
};

}  // namespace sae
