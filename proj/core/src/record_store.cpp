#include "sae/error.hpp"
#include "sae/hash.hpp"
#include "sae/serialization.hpp"
#include "sae/store.hpp"
#include "sae/tar.hpp"

#include <sqlite3.h>

#include <algorithm>

namespace sae {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Collection c) {
    switch (c) {
        case Collection::tasks: return "tasks";
        case Collection::submissions: return "submissions";
        case Collection::jobs: return "jobs";
        case Collection::workers: return "workers";
        case Collection::users: return "users";
        case Collection::materials: return "materials";
        case Collection::settings: return "settings";
    }
    return "unknown";
}

namespace {

class Statement {
public:
    Statement(sqlite3* db, const char* sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK)
            throw IoError(std::string("sqlite prepare: ") + sqlite3_errmsg(db));
    }
    ~Statement() { sqlite3_finalize(stmt_); }
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    Statement& bind(int idx, std::string_view text) {
        sqlite3_bind_text(stmt_, idx, text.data(), static_cast<int>(text.size()), SQLITE_TRANSIENT);
        return *this;
    }

    bool step() {
        int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        throw IoError(std::string("sqlite step: ") + sqlite3_errmsg(db_));
    }

    std::string text(int col) const {
        auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
        return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col))) : std::string();
    }
    std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }

private:
    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

}  // namespace

RecordStore::RecordStore(const fs::path& db_file) {
    if (sqlite3_open_v2(db_file.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                        nullptr) != SQLITE_OK) {
        std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
        sqlite3_close(db_);
        throw IoError("cannot open record store " + db_file.string() + ": " + msg);
    }
    sqlite3_busy_timeout(db_, 10000);
    exec("PRAGMA journal_mode=WAL");
    exec("PRAGMA synchronous=FULL");
    exec(
        "CREATE TABLE IF NOT EXISTS records ("
        " collection TEXT NOT NULL,"
        " id TEXT NOT NULL,"
        " revision INTEGER NOT NULL,"
        " body TEXT NOT NULL,"
        " PRIMARY KEY (collection, id))");
}

RecordStore::~RecordStore() { sqlite3_close(db_); }

void RecordStore::exec(const char* sql) const {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw IoError(std::string("sqlite: ") + msg + " in: " + sql);
    }
}

std::int64_t RecordStore::put(Collection c, const std::string& id, const json& body) {
    std::lock_guard lock(mu_);
    Statement st(db_,
                 "INSERT INTO records (collection, id, revision, body) VALUES (?1, ?2, 1, ?3) "
                 "ON CONFLICT (collection, id) DO UPDATE SET revision = revision + 1, body = excluded.body "
                 "RETURNING revision");
    auto text = body.dump();
    st.bind(1, to_string(c)).bind(2, id).bind(3, text);
    if (!st.step()) throw IoError("sqlite: upsert returned no revision");
    auto rev = st.integer(0);
    while (st.step()) {
    }
    return rev;
}

std::optional<Record> RecordStore::get(Collection c, const std::string& id) const {
    std::lock_guard lock(mu_);
    Statement st(db_, "SELECT revision, body FROM records WHERE collection = ?1 AND id = ?2");
    st.bind(1, to_string(c)).bind(2, id);
    if (!st.step()) return std::nullopt;
    return Record{id, st.integer(0), json::parse(st.text(1))};
}

std::vector<Record> RecordStore::list(Collection c) const {
    std::lock_guard lock(mu_);
    Statement st(db_, "SELECT id, revision, body FROM records WHERE collection = ?1 ORDER BY rowid");
    st.bind(1, to_string(c));
    std::vector<Record> out;
    while (st.step()) out.push_back(Record{st.text(0), st.integer(1), json::parse(st.text(2))});
    return out;
}

bool RecordStore::remove(Collection c, const std::string& id) {
    std::lock_guard lock(mu_);
    Statement st(db_, "DELETE FROM records WHERE collection = ?1 AND id = ?2");
    st.bind(1, to_string(c)).bind(2, id);
    st.step();
    return sqlite3_changes(db_) > 0;
}

void RecordStore::transaction(const std::function<void()>& body) {
    std::lock_guard lock(mu_);
    if (depth_ > 0) {
        ++depth_;
        try {
            body();
        } catch (...) {
            --depth_;
            throw;
        }
        --depth_;
        return;
    }
    exec("BEGIN IMMEDIATE");
    depth_ = 1;
    try {
        body();
        exec("COMMIT");
    } catch (...) {
        depth_ = 0;
        sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
        throw;
    }
    depth_ = 0;
}

// ---------------------------------------------------------------------------

Store::Store(const fs::path& root) : blobs_(root / "blobs") {
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create storage directory " + root.string() + ": " + ec.message());
    records_ = std::make_unique<RecordStore>(root / "records.db");
}

std::int64_t Store::save_task(const TaskSpec& task) { return records_->put(Collection::tasks, task.task_id, task); }

std::optional<TaskSpec> Store::load_task(const std::string& task_id) const {
    auto r = records_->get(Collection::tasks, task_id);
    if (!r) return std::nullopt;
    return r->body.get<TaskSpec>();
}

std::vector<TaskSpec> Store::list_tasks() const {
    std::vector<TaskSpec> out;
    for (auto& r : records_->list(Collection::tasks)) out.push_back(r.body.get<TaskSpec>());
    return out;
}

void Store::save_submission(const Submission& s) { records_->put(Collection::submissions, s.submission_id, s); }

std::optional<Submission> Store::load_submission(const std::string& id) const {
    auto r = records_->get(Collection::submissions, id);
    if (!r) return std::nullopt;
    return r->body.get<Submission>();
}

std::vector<Submission> Store::list_submissions() const {
    std::vector<Submission> out;
    for (auto& r : records_->list(Collection::submissions)) out.push_back(r.body.get<Submission>());
    return out;
}

std::vector<Submission> Store::list_submissions(const std::string& user_id, const std::string& task_id) const {
    auto all = list_submissions();
    std::erase_if(all, [&](const Submission& s) { return s.user_id != user_id || s.task_id != task_id; });
    return all;
}

Submission Store::create_submission(const std::string& user_id, const std::string& task_id,
                                    const std::map<std::string, std::string>& files, const std::string& language) {
    Submission s;
    s.submission_id = "s-" + random_hex(8);
    s.user_id = user_id;
    s.task_id = task_id;
    s.language = language;
    s.submitted_at = now_utc();
    s.status = SubmissionStatus::queued;
    // Blobs first: a crash here leaves only unreferenced, immutable blobs.
    for (const auto& [slot, bytes] : files) {
        s.files[slot] = blobs_.put(bytes).hash;
        fault("blob:" + slot);
    }
    fault("before-record");
    records_->transaction([&] {
        records_->put(Collection::submissions, s.submission_id, s);
        fault("before-commit");
    });
    fault("after-commit");
    return s;
}

std::optional<Submission> Store::update_submission(const std::string& id,
                                                   const std::function<bool(Submission&)>& mutate) {
    std::optional<Submission> result;
    records_->transaction([&] {
        auto s = load_submission(id);
        if (!s) return;
        if (mutate(*s)) save_submission(*s);
        result = std::move(s);
    });
    return result;
}

std::string Store::bundle_submission(const std::string& submission_id) const {
    auto s = load_submission(submission_id);
    if (!s) throw NotFound("submission " + submission_id + " not found");
    auto task = load_task(s->task_id);

    const LanguageProfile* lang = task ? task->find_language(s->language) : nullptr;
    std::vector<std::string> order;
    if (task) {
        for (const auto& slot : task->file_slots)
            if (s->files.contains(slot)) order.push_back(slot);
    }
    for (const auto& [slot, _] : s->files)
        if (std::find(order.begin(), order.end(), slot) == order.end()) order.push_back(slot);

    std::vector<TarEntry> entries;
    for (const auto& slot : order) {
        auto name = lang ? lang->file_name(slot) : slot;
        entries.push_back({name, blobs_.get(s->files.at(slot))});
    }
    json meta{{"submission_id", s->submission_id},
              {"task_id", s->task_id},
              {"user_id", s->user_id},
              {"language", s->language},
              {"submitted_at", format_rfc3339(s->submitted_at)},
              {"status", std::string(to_string(s->status))}};
    if (s->results) meta["score"] = s->results->score;
    else meta["score"] = nullptr;
    if (task) meta["max_score"] = task->max_score;
    entries.push_back({"submission.json", meta.dump(2) + "\n"});
    return write_tar(entries);
}

std::int64_t Store::course_day() const {
    auto r = records_->get(Collection::settings, "course_day");
    if (!r) return 0;
    return r->body.get<std::int64_t>();
}

void Store::set_course_day(std::int64_t day) {
    if (day < 0) throw InvalidArgument("course day must be >= 0");
    records_->put(Collection::settings, "course_day", day);
}

}  // namespace sae
