#pragma once

// Single-node persistence: a content-addressed blob directory and an embedded
// SQLite record store. On-disk layout is documented in docs/storage.md.

#include "sae/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

struct sqlite3;

namespace sae {

struct BlobRef {
    std::string hash;  // lower-case hex sha256
    std::uint64_t size = 0;

    friend bool operator==(const BlobRef&, const BlobRef&) = default;
};

/// Immutable content-addressed blobs under `<root>/<hh>/<hash>`.
/// Writes go through a temp file and an atomic rename, so concurrent puts of
/// the same bytes are harmless.
class BlobStore {
public:
    explicit BlobStore(std::filesystem::path root);

    BlobRef put(std::string_view bytes);
    std::string get(const std::string& hash) const;  // throws NotFound
    bool contains(const std::string& hash) const;
    std::optional<std::uint64_t> size(const std::string& hash) const;

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path path_for(const std::string& hash) const;
    std::filesystem::path root_;
};

enum class Collection { tasks, submissions, jobs, workers, users, materials, settings };

std::string_view to_string(Collection c);

struct Record {
    std::string id;
    std::int64_t revision = 0;
    nlohmann::json body;
};

/// Durable keyed JSON records with a per-record revision counter. Every put is
/// atomic; `transaction` groups several writes into one commit.
class RecordStore {
public:
    explicit RecordStore(const std::filesystem::path& db_file);
    ~RecordStore();
    RecordStore(const RecordStore&) = delete;
    RecordStore& operator=(const RecordStore&) = delete;

    /// Inserts or replaces; returns the new revision (1 for a new record).
    std::int64_t put(Collection c, const std::string& id, const nlohmann::json& body);
    std::optional<Record> get(Collection c, const std::string& id) const;
    /// Records in insertion order.
    std::vector<Record> list(Collection c) const;
    bool remove(Collection c, const std::string& id);

    void transaction(const std::function<void()>& body);

private:
    void exec(const char* sql) const;
    sqlite3* db_ = nullptr;
    mutable std::recursive_mutex mu_;
    int depth_ = 0;
};

/// Typed facade over both stores.
class Store {
public:
    explicit Store(const std::filesystem::path& root);

    BlobStore& blobs() { return blobs_; }
    const BlobStore& blobs() const { return blobs_; }
    RecordStore& records() { return *records_; }

    std::int64_t save_task(const TaskSpec& task);
    std::optional<TaskSpec> load_task(const std::string& task_id) const;
    std::vector<TaskSpec> list_tasks() const;

    void save_submission(const Submission& s);
    std::optional<Submission> load_submission(const std::string& id) const;
    std::vector<Submission> list_submissions() const;
    std::vector<Submission> list_submissions(const std::string& user_id, const std::string& task_id) const;

    /// Stores the uploaded files and a queued submission record in one commit.
    /// `files` maps slot name to bytes.
    Submission create_submission(const std::string& user_id, const std::string& task_id,
                                 const std::map<std::string, std::string>& files, const std::string& language);

    /// Applies `mutate` to the stored submission under the store's write lock
    /// and persists the result when `mutate` returns true.
    std::optional<Submission> update_submission(const std::string& id,
                                                const std::function<bool(Submission&)>& mutate);

    /// Deterministic tar of the submission: one file per slot plus
    /// `submission.json`. Throws NotFound for an unknown id.
    std::string bundle_submission(const std::string& submission_id) const;

    std::int64_t course_day() const;
    void set_course_day(std::int64_t day);

    /// Test hook invoked at named points while persisting a submission.
    using FaultHook = std::function<void(std::string_view point)>;
    void set_fault_hook(FaultHook hook) { fault_hook_ = std::move(hook); }

private:
    void fault(std::string_view point) const {
        if (fault_hook_) fault_hook_(point);
    }

    BlobStore blobs_;
    std::unique_ptr<RecordStore> records_;
    FaultHook fault_hook_;
};

}  // namespace sae
