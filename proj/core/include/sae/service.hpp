#pragma once

// The long-running composition: store, scheduler (persisting through the
// store), evaluation backend, in-process workers and the heartbeat reaper.

#include "sae/auth.hpp"
#include "sae/config.hpp"
#include "sae/evaluator.hpp"
#include "sae/manifest.hpp"
#include "sae/materials.hpp"
#include "sae/sandbox.hpp"
#include "sae/scheduler.hpp"
#include "sae/store.hpp"

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <thread>

namespace sae {

/// Builds the backend named in the config ("process" or "null").
std::shared_ptr<SandboxBackend> make_backend(const ServiceConfig& config);

/// Loads a submission and its task, evaluates it and publishes status
/// changes to the store. Shared by in-process and external workers.
JobResult run_evaluation(Store& store, SandboxBackend& backend, const std::string& submission_id);

struct ImportOutcome {
    std::string task_id;
    std::int64_t revision = 0;
};

struct CheckerAlert {
    std::string submission_id;
    std::string task_id;
    std::string case_id;
    std::string message;
};

class Service {
public:
    /// `backend` overrides the one named in the config.
    explicit Service(ServiceConfig config, std::shared_ptr<SandboxBackend> backend = nullptr);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Recovers persisted jobs, then starts workers and the reaper.
    void start();
    void stop();

    Store& store() { return store_; }
    Scheduler& scheduler() { return *scheduler_; }
    UserDirectory& users() { return users_; }
    MaterialCatalog& materials() { return materials_; }
    SandboxBackend& backend() { return *backend_; }
    const ServiceConfig& config() const { return config_; }

    /// Manual override when set by an admin, else the calendar day, else 0.
    std::int64_t course_day() const;
    void set_course_day(std::int64_t day) { store_.set_course_day(day); }
    std::optional<std::chrono::milliseconds> time_left(Timestamp now = now_utc()) const;

    /// Stores blobs, the statement material and the task record. Throws
    /// InvalidArgument when the statement would unlock after the task.
    ImportOutcome import_task(const ParsedTask& task);

    /// Validates slots and language, persists and enqueues. Throws NotFound
    /// for an unknown task and InvalidArgument naming the offending slot or
    /// language.
    Submission submit(const std::string& user_id, const std::string& task_id,
                      const std::map<std::string, std::string>& files, const std::string& language);

    /// Registers an (external or in-process) worker, restoring a persisted
    /// disabled state.
    void register_worker(const std::string& worker_id, std::vector<std::string> labels = {});
    void set_worker_state(const std::string& worker_id, WorkerAdminState state);

    std::vector<CheckerAlert> checker_alerts() const;

private:
    void on_evaluated(const std::string& submission_id, const EvaluationReport& report);
    void persist_worker(const WorkerRecord& w);
    void worker_loop(std::string worker_id);
    void reaper_loop();

    ServiceConfig config_;
    Store store_;
    UserDirectory users_;
    MaterialCatalog materials_;
    std::shared_ptr<SandboxBackend> backend_;
    std::unique_ptr<Scheduler> scheduler_;
    std::optional<CourseCalendar> calendar_;

    std::vector<std::string> local_workers_;
    std::vector<std::thread> threads_;
    std::atomic<bool> running_{false};
    std::mutex stop_mu_;
    std::condition_variable stop_cv_;
};

}  // namespace sae
