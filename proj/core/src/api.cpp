#include "sae/api.hpp"

#include "sae/error.hpp"
#include "sae/serialization.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <thread>

namespace sae {

using nlohmann::json;

std::string format_hms(std::chrono::milliseconds d) {
    auto total = std::max<std::int64_t>(0, std::chrono::duration_cast<std::chrono::seconds>(d).count());
    char buf[48];
    std::snprintf(buf, sizeof buf, "%lld:%02lld:%02lld", static_cast<long long>(total / 3600),
                  static_cast<long long>(total / 60 % 60), static_cast<long long>(total % 60));
    return buf;
}

std::string status_label(SubmissionStatus s) {
    switch (s) {
        case SubmissionStatus::queued: return "Queued";
        case SubmissionStatus::compiling: return "Compiling";
        case SubmissionStatus::running: return "Running";
        case SubmissionStatus::evaluated: return "Evaluated";
        case SubmissionStatus::internal_error: return "Internal error";
    }
    return "Unknown";
}

const std::vector<RouteInfo>& ApiServer::routes() {
    static const std::vector<RouteInfo> kRoutes = {
        {"GET", "/api/me", false},
        {"GET", "/api/time", false},
        {"GET", "/api/tasks", false},
        {"GET", "/api/tasks/{id}", false},
        {"GET", "/api/tasks/{id}/statement", false},
        {"GET", "/api/tasks/{id}/submissions", false},
        {"POST", "/api/tasks/{id}/submissions", false},
        {"GET", "/api/submissions/{id}", false},
        {"GET", "/api/submissions/{id}/bundle", false},
        {"GET", "/api/materials", false},
        {"GET", "/api/materials/{id}", false},
        {"POST", "/api/admin/tasks", true},
        {"GET", "/api/admin/queue", true},
        {"POST", "/api/admin/workers/{id}/state", true},
        {"POST", "/api/admin/day", true},
        {"GET", "/api/admin/alerts", true},
        {"POST", "/api/admin/materials", true},
        {"DELETE", "/api/admin/materials/{id}", true},
        {"POST", "/api/workers/{id}/register", true},
        {"POST", "/api/workers/{id}/heartbeat", true},
        {"POST", "/api/workers/{id}/claim", true},
        {"POST", "/api/workers/{id}/complete", true},
    };
    return kRoutes;
}

namespace {

class HttpError : public Error {
public:
    HttpError(int status, std::string message) : Error(std::move(message)), status(status) {}
    int status;
};

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, json{{"error", message}});
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw HttpError(400, "request body must be a JSON object");
    return j;
}

}  // namespace

struct ApiServer::Impl {
    Service& service;
    httplib::Server server;
    std::thread thread;
    int bound_port = -1;

    explicit Impl(Service& s) : service(s) { install(); }

    // ---------------------------------------------------------------- helpers

    Session authenticate(const httplib::Request& req) const {
        auto header = req.get_header_value("Authorization");
        constexpr std::string_view kBearer = "Bearer ";
        if (!std::string_view(header).starts_with(kBearer)) throw HttpError(401, "missing bearer token");
        auto session = service.users().authenticate(header.substr(kBearer.size()));
        if (!session) throw HttpError(401, "invalid or expired token");
        return *session;
    }

    bool task_visible(const TaskSpec& t, const Session& s) const {
        return s.is_teacher() || t.unlock_day <= service.course_day();
    }

    TaskSpec visible_task(const std::string& id, const Session& s) const {
        auto t = service.store().load_task(id);
        if (!t || !task_visible(*t, s)) throw HttpError(404, "task '" + id + "' not found");
        return *t;
    }

    Submission visible_submission(const std::string& id, const Session& s) const {
        auto sub = service.store().load_submission(id);
        // Someone else's submission looks exactly like a missing one.
        if (!sub || (!s.is_teacher() && sub->user_id != s.user_id))
            throw HttpError(404, "submission '" + id + "' not found");
        return *sub;
    }

    json submission_view(const Submission& s, const std::optional<TaskSpec>& task) const {
        json files = json::array();
        for (const auto& [slot, _] : s.files) files.push_back(slot);
        json j{{"submission_id", s.submission_id},
               {"task_id", s.task_id},
               {"user_id", s.user_id},
               {"language", s.language},
               {"submitted_at", format_rfc3339(s.submitted_at)},
               {"status", std::string(to_string(s.status))},
               {"status_label", status_label(s.status)},
               {"files", files},
               {"max_score", task ? task->max_score : 0},
               {"score", nullptr},
               {"per_case", json::array()}};
        if (s.results) {
            j["score"] = s.results->score;
            for (const auto& c : s.results->per_case) {
                json cj{{"case_id", c.case_id},
                        {"verdict", std::string(to_string(c.verdict))},
                        {"time_used", c.time_used},
                        {"memory_used", c.memory_used}};
                auto visibility = FeedbackVisibility::full;
                if (task)
                    for (const auto& tc : task->test_cases)
                        if (tc.case_id == c.case_id) visibility = tc.visibility;
                if (visibility == FeedbackVisibility::full) cj["message"] = c.message;
                j["per_case"].push_back(std::move(cj));
            }
        }
        return j;
    }

    json task_view(const TaskSpec& t, const Session& s) const {
        json langs = json::array();
        for (const auto& l : t.languages) langs.push_back({{"id", l.profile_id}, {"display_name", l.display_name}});
        auto history = service.store().list_submissions(s.user_id, t.task_id);
        return json{{"task_id", t.task_id},
                    {"title", t.title},
                    {"slots", t.file_slots},
                    {"languages", langs},
                    {"max_score", t.max_score},
                    {"unlock_day", t.unlock_day},
                    {"locked", t.unlock_day > service.course_day()},
                    {"has_statement", !t.statement_ref.empty()},
                    {"best_score", best_score(history)},
                    {"submission_count", history.size()}};
    }

    json queue_view() const {
        auto snap = service.scheduler().snapshot();
        json workers = json::array();
        for (const auto& w : snap.workers) workers.push_back(w);
        return json{{"pending", snap.pending},
                    {"running", snap.claimed},
                    {"workers", workers},
                    {"done", snap.done},
                    {"failed", snap.failed}};
    }

    using Handler = std::function<void(const Session&, const httplib::Request&, httplib::Response&)>;

    // Wraps a handler with authentication, the role check and error mapping.
    httplib::Server::Handler wrap(bool teacher_only, Handler h) {
        return [this, teacher_only, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
            try {
                auto session = authenticate(req);
                if (teacher_only && !session.is_teacher()) throw HttpError(403, "teacher role required");
                h(session, req, res);
            } catch (const HttpError& e) {
                send_error(res, e.status, e.what());
            } catch (const NotFound& e) {
                send_error(res, 404, e.what());
            } catch (const InvalidArgument& e) {
                send_error(res, 422, e.what());
            } catch (const json::exception& e) {
                send_error(res, 400, std::string("malformed request: ") + e.what());
            } catch (const std::exception& e) {
                spdlog::error("{} {}: {}", req.method, req.path, e.what());
                send_error(res, 500, "internal error");
            }
        };
    }

    // Registers a route from its documented pattern, translating `{id}` to a capture group.
    void route(const std::string& method, const std::string& pattern, Handler h) {
        const RouteInfo* info = nullptr;
        for (const auto& r : ApiServer::routes())
            if (r.method == method && r.pattern == pattern) info = &r;
        if (!info) throw std::logic_error("undocumented route " + method + " " + pattern);
        std::string regex;
        for (std::size_t i = 0; i < pattern.size(); ++i) {
            if (pattern.compare(i, 4, "{id}") == 0) {
                regex += "([^/]+)";
                i += 3;
            } else {
                regex += pattern[i];
            }
        }
        auto handler = wrap(info->teacher_only, std::move(h));
        if (method == "GET") server.Get(regex, handler);
        else if (method == "POST") server.Post(regex, handler);
        else if (method == "DELETE") server.Delete(regex, handler);
    }

    static std::string part(const httplib::Request& req, const std::string& name) {
        return req.has_file(name) ? req.get_file_value(name).content : std::string();
    }

    // ----------------------------------------------------------------- routes

    void install() {
        const auto& cfg = service.config();
        server.set_payload_max_length(cfg.upload_limit * 64 + kMiB);
        if (!cfg.static_dir.empty()) server.set_mount_point("/", cfg.static_dir.string());

        route("GET", "/api/me", [](const Session& s, const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"user_id", s.user_id}, {"role", std::string(to_string(s.role))}});
        });

        route("GET", "/api/time", [this](const Session&, const httplib::Request&, httplib::Response& res) {
            auto now = now_utc();
            auto left = service.time_left(now);
            auto iso = format_rfc3339(now);
            send_json(res, 200,
                      {{"server_time", iso},
                       {"server_time_display", iso.substr(11, 8)},
                       {"course_day", service.course_day()},
                       {"time_left", left ? json(format_hms(*left)) : json(nullptr)},
                       {"time_left_seconds", left ? json(left->count() / 1000) : json(nullptr)}});
        });

        route("GET", "/api/tasks", [this](const Session& s, const httplib::Request&, httplib::Response& res) {
            json out = json::array();
            for (const auto& t : service.store().list_tasks())
                if (task_visible(t, s)) out.push_back(task_view(t, s));
            send_json(res, 200, out);
        });

        route("GET", "/api/tasks/{id}", [this](const Session& s, const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, task_view(visible_task(req.matches[1], s), s));
        });

        route("GET", "/api/tasks/{id}/statement",
              [this](const Session& s, const httplib::Request& req, httplib::Response& res) {
                  auto t = visible_task(req.matches[1], s);
                  auto m = t.statement_ref.empty() ? std::nullopt : service.materials().get(t.statement_ref);
                  if (!m || (!s.is_teacher() && m->unlock_day > service.course_day()))
                      throw HttpError(404, "task '" + t.task_id + "' has no statement");
                  res.set_content(service.store().blobs().get(m->blob.hash), "text/plain; charset=utf-8");
              });

        route("GET", "/api/tasks/{id}/submissions",
              [this](const Session& s, const httplib::Request& req, httplib::Response& res) {
                  auto t = visible_task(req.matches[1], s);
                  json out = json::array();
                  for (const auto& sub : service.store().list_submissions())
                      if (sub.task_id == t.task_id && (s.is_teacher() || sub.user_id == s.user_id))
                          out.push_back(submission_view(sub, t));
                  send_json(res, 200, out);
              });

        route("POST", "/api/tasks/{id}/submissions",
              [this](const Session& s, const httplib::Request& req, httplib::Response& res) {
                  auto t = visible_task(req.matches[1], s);
                  if (!req.is_multipart_form_data()) throw HttpError(400, "expected multipart/form-data");
                  const auto limit = service.config().upload_limit;
                  std::map<std::string, std::string> files;
                  for (const auto& slot : t.file_slots) {
                      if (!req.has_file(slot)) throw HttpError(422, "missing file for slot '" + slot + "'");
                      auto content = req.get_file_value(slot).content;
                      if (content.size() > limit)
                          throw HttpError(413, "file for slot '" + slot + "' exceeds " + std::to_string(limit) +
                                                   " bytes");
                      files[slot] = std::move(content);
                  }
                  auto language = part(req, "language");
                  if (!t.find_language(language)) throw HttpError(422, "unknown language '" + language + "'");
                  auto sub = service.submit(s.user_id, t.task_id, files, language);
                  send_json(res, 201,
                            {{"submission_id", sub.submission_id},
                             {"status", std::string(to_string(sub.status))},
                             {"status_label", status_label(sub.status)}});
              });

        route("GET", "/api/submissions/{id}",
              [this](const Session& s, const httplib::Request& req, httplib::Response& res) {
                  auto sub = visible_submission(req.matches[1], s);
                  send_json(res, 200, submission_view(sub, service.store().load_task(sub.task_id)));
              });

        route("GET", "/api/submissions/{id}/bundle",
              [this](const Session& s, const httplib::Request& req, httplib::Response& res) {
                  auto sub = visible_submission(req.matches[1], s);
                  res.set_header("Content-Disposition", "attachment; filename=\"" + sub.submission_id + ".tar\"");
                  res.set_content(service.store().bundle_submission(sub.submission_id), "application/x-tar");
              });

        route("GET", "/api/materials", [this](const Session& s, const httplib::Request&, httplib::Response& res) {
            auto day = service.course_day();
            auto list = s.is_teacher() ? visible(service.materials().list(), INT64_MAX)
                                       : service.materials().visible_on(day);
            json out = json::array();
            for (const auto& m : list) {
                json j = m;
                j["locked"] = m.unlock_day > day;
                out.push_back(std::move(j));
            }
            send_json(res, 200, out);
        });

        route("GET", "/api/materials/{id}",
              [this](const Session& s, const httplib::Request& req, httplib::Response& res) {
                  std::string id = req.matches[1];
                  auto m = service.materials().get(id);
                  if (!m || (!s.is_teacher() && m->unlock_day > service.course_day()))
                      throw HttpError(404, "material '" + id + "' not found");
                  if (!m->file_name.empty())
                      res.set_header("Content-Disposition", "attachment; filename=\"" + m->file_name + "\"");
                  res.set_content(service.store().blobs().get(m->blob.hash), "application/octet-stream");
              });

        // ------------------------------------------------------------- admin

        route("POST", "/api/admin/tasks", [this](const Session&, const httplib::Request& req, httplib::Response& res) {
            if (!req.is_multipart_form_data() || !req.has_file("manifest"))
                throw HttpError(400, "expected multipart/form-data with a 'manifest' part");
            FileResolver resolve = [&req](const std::string& path) -> std::optional<std::string> {
                if (req.has_file(path)) return req.get_file_value(path).content;
                for (const auto& [name, f] : req.files)
                    if (f.filename == path) return f.content;
                return std::nullopt;
            };
            ManifestOptions opts;
            opts.sandbox_defaults = service.config().sandbox_defaults;
            auto parsed = parse_task_manifest(req.get_file_value("manifest").content, resolve, opts);
            if (!parsed.task) {
                json errs = json::array();
                for (const auto& e : parsed.errors) errs.push_back({{"line", e.line}, {"message", e.message}});
                send_json(res, 422, {{"error", "invalid task manifest"}, {"errors", errs}});
                return;
            }
            auto outcome = service.import_task(*parsed.task);
            send_json(res, 201, {{"task_id", outcome.task_id}, {"revision", outcome.revision}});
        });

        route("GET", "/api/admin/queue", [this](const Session&, const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, queue_view());
        });

        route("POST", "/api/admin/workers/{id}/state",
              [this](const Session&, const httplib::Request& req, httplib::Response& res) {
                  auto body = parse_body(req);
                  auto state = parse_worker_state(body.value("state", ""));
                  if (!state) throw HttpError(422, "state must be 'active' or 'disabled'");
                  std::string id = req.matches[1];
                  service.set_worker_state(id, *state);
                  send_json(res, 200, {{"worker_id", id}, {"admin_state", std::string(to_string(*state))}});
              });

        route("POST", "/api/admin/day", [this](const Session&, const httplib::Request& req, httplib::Response& res) {
            auto body = parse_body(req);
            if (!body.contains("day") || !body["day"].is_number_integer() || body["day"].get<std::int64_t>() < 0)
                throw HttpError(422, "day must be a non-negative integer");
            service.set_course_day(body["day"].get<std::int64_t>());
            send_json(res, 200, {{"course_day", service.course_day()}});
        });

        route("GET", "/api/admin/alerts", [this](const Session&, const httplib::Request&, httplib::Response& res) {
            json out = json::array();
            for (const auto& a : service.checker_alerts())
                out.push_back({{"submission_id", a.submission_id},
                               {"task_id", a.task_id},
                               {"case_id", a.case_id},
                               {"message", a.message}});
            send_json(res, 200, out);
        });

        route("POST", "/api/admin/materials",
              [this](const Session&, const httplib::Request& req, httplib::Response& res) {
                  if (!req.is_multipart_form_data() || !req.has_file("file"))
                      throw HttpError(400, "expected multipart/form-data with a 'file' part");
                  auto day = parse_integer(part(req, "unlock_day").empty() ? "0" : part(req, "unlock_day"));
                  if (!day) throw HttpError(422, "unlock_day must be an integer");
                  auto category = parse_material_category(part(req, "category").empty() ? "data" : part(req, "category"));
                  if (!category) throw HttpError(422, "unknown category");
                  const auto& file = req.get_file_value("file");
                  auto id = part(req, "material_id");
                  if (id.empty()) id = file.filename;
                  auto m = service.materials().add(id, part(req, "title"), file.content, *day, *category, file.filename);
                  send_json(res, 201, m);
              });

        route("DELETE", "/api/admin/materials/{id}",
              [this](const Session&, const httplib::Request& req, httplib::Response& res) {
                  std::string id = req.matches[1];
                  if (!service.materials().remove(id)) throw HttpError(404, "material '" + id + "' not found");
                  send_json(res, 200, {{"removed", id}});
              });

        // ----------------------------------------------------------- workers

        route("POST", "/api/workers/{id}/register",
              [this](const Session&, const httplib::Request& req, httplib::Response& res) {
                  auto body = parse_body(req);
                  std::string id = req.matches[1];
                  service.register_worker(id, body.value("labels", std::vector<std::string>{}));
                  send_json(res, 200,
                            {{"worker_id", id},
                             {"heartbeat_window_ms", service.config().heartbeat_window.count()}});
              });

        route("POST", "/api/workers/{id}/heartbeat",
              [this](const Session&, const httplib::Request& req, httplib::Response& res) {
                  service.scheduler().heartbeat(req.matches[1]);
                  send_json(res, 200, {{"ok", true}});
              });

        route("POST", "/api/workers/{id}/claim",
              [this](const Session&, const httplib::Request& req, httplib::Response& res) {
                  auto body = parse_body(req);
                  auto wait = std::clamp<std::int64_t>(body.value("wait_ms", std::int64_t{0}), 0, 30000);
                  auto job = service.scheduler().claim_next_wait(req.matches[1], std::chrono::milliseconds(wait));
                  if (!job) {
                      res.status = 204;
                      return;
                  }
                  send_json(res, 200, {{"job", *job}});
              });

        route("POST", "/api/workers/{id}/complete",
              [this](const Session&, const httplib::Request& req, httplib::Response& res) {
                  auto body = parse_body(req);
                  auto job_id = body.at("job_id").get<std::string>();
                  JobResult result = body.contains("report")
                                         ? JobResult(body["report"].get<EvaluationReport>())
                                         : JobResult(InfraFailure{body.value("infra_failure", "unspecified failure")});
                  bool accepted = service.scheduler().complete(job_id, req.matches[1], result);
                  send_json(res, accepted ? 200 : 409, {{"accepted", accepted}});
              });

        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) {
                if (res.status == 413) send_error(res, 413, "payload too large");
                else if (res.status == 404) send_error(res, 404, "no such endpoint");
            }
        });
    }
};

ApiServer::ApiServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) impl_->bound_port = impl_->server.bind_to_any_port(host);
    else impl_->bound_port = impl_->server.bind_to_port(host, port) ? port : -1;
    if (impl_->bound_port < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return impl_->bound_port;
}

void ApiServer::start() {
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void ApiServer::run() { impl_->server.listen_after_bind(); }

void ApiServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int ApiServer::port() const { return impl_->bound_port; }

}  // namespace sae
