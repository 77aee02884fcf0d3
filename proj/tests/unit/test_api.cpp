#include "sae/api.hpp"
#include "sae/null_backend.hpp"
#include "sae/serialization.hpp"
#include "sae/tar.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <random>
#include <regex>

using namespace sae;
using namespace std::chrono_literals;
using nlohmann::json;
using sae::test::fixtures;
using sae::test::slurp;

namespace {

// Echoes stdin unless the submitted source asks for a wrong answer; custom
// checkers always crash.
ExecutionOutcome echo(const ExecRequest& req, std::map<std::string, std::string>&) {
    ExecutionOutcome o;
    if (req.argv[0] == "./checker") {
        o.exit_code = 3;
        o.stdout_data = "checker bug";
        return o;
    }
    auto src = req.files.count("main.py") ? req.files.at("main.py") : "";
    o.stdout_data = src.find("WRONG") != std::string::npos ? "nope\n" : req.stdin_data;
    return o;
}

const std::string kTeacher = "teacher-token";

class Api : public ::testing::Test {
protected:
    void start(int workers = 2) {
        ServiceConfig cfg;
        cfg.storage = dir.path();
        cfg.workers = workers;
        cfg.upload_limit = 4096;
        cfg.heartbeat_window = 2000ms;
        cfg.course_end = now_utc() + std::chrono::hours(76256) + 27min + 30s;
        backend = std::make_shared<NullBackend>(echo);
        service = std::make_unique<Service>(cfg, backend);
        service->users().add_with_token("teacher", Role::teacher, kTeacher);
        for (const auto* u : {"alice", "bob", "carol", "dave", "erin"})
            service->users().add_with_token(u, Role::student, std::string(u) + "-token");

        add_task("echo", {{"1", "a b\n", "a b\n"}, {"2", "c\n", "c\n"}, {"3", "d\n", "d\n"}, {"4", "e\n", "e\n"}});
        auto& hidden = add_task("hidden", {{"shown", "x\n", "x\n"}, {"secret", "y\n", "y\n"}});
        hidden.test_cases[1].visibility = FeedbackVisibility::verdict_only;
        import(hidden);
        auto& later = add_task("later", {{"1", "", ""}});
        later.unlock_day = 5;
        import(later);
        auto& custom = add_task("custom", {{"1", "", ""}});
        custom.checker.kind = CheckerKind::custom;
        custom.checker.custom_checker_ref = service->store().blobs().put("#!/bin/sh\nexit 3\n").hash;
        import(custom);
        service->materials().add("intro", "Intro slides", "slides", 0, MaterialCategory::slides, "intro.pdf");
        service->materials().add("finale", "Finale", "secret", 9, MaterialCategory::slides);

        service->start();
        server = std::make_unique<ApiServer>(*service);
        server->bind("127.0.0.1", 0);
        server->start();
        client = std::make_unique<httplib::Client>("127.0.0.1", server->port());
        client->set_read_timeout(30, 0);
    }

    void TearDown() override {
        if (server) server->stop();
        if (service) service->stop();
    }

    TaskSpec& add_task(const std::string& id, const std::vector<sae::test::CaseSpec>& cases) {
        tasks[id] = sae::test::python_task(service->store().blobs(), id, cases);
        import(tasks[id]);
        return tasks[id];
    }
    void import(const TaskSpec& spec) {
        ParsedTask p;
        p.spec = spec;
        service->import_task(p);
    }

    static httplib::Headers auth(const std::string& token) { return {{"Authorization", "Bearer " + token}}; }

    httplib::Result get(const std::string& path, const std::string& token) { return client->Get(path, auth(token)); }
    httplib::Result post(const std::string& path, const std::string& token, const json& body = json::object()) {
        return client->Post(path, auth(token), body.dump(), "application/json");
    }
    httplib::Result submit(const std::string& task, const std::string& token, const std::string& source,
                           const std::string& language = "python3") {
        httplib::MultipartFormDataItems items = {{"main", source, "main.py", "text/x-python"},
                                                 {"language", language, "", ""}};
        return client->Post("/api/tasks/" + task + "/submissions", auth(token), items);
    }
    json wait_evaluated(const std::string& id, const std::string& token, std::vector<std::string>* seen = nullptr) {
        auto deadline = std::chrono::steady_clock::now() + 30s;
        while (std::chrono::steady_clock::now() < deadline) {
            auto r = get("/api/submissions/" + id, token);
            auto j = json::parse(r->body);
            if (seen) seen->push_back(j["status"]);
            if (j["status"] == "evaluated" || j["status"] == "internal_error") return j;
            std::this_thread::sleep_for(5ms);
        }
        throw std::runtime_error("timed out waiting for " + id);
    }

    sae::test::TempDir dir;
    std::shared_ptr<NullBackend> backend;
    std::unique_ptr<Service> service;
    std::unique_ptr<ApiServer> server;
    std::unique_ptr<httplib::Client> client;
    std::map<std::string, TaskSpec> tasks;
};

}  // namespace

TEST(ApiFormat, HmsAndLabels) {
    EXPECT_EQ(format_hms(std::chrono::seconds(76256 * 3600 + 27 * 60 + 4)), "76256:27:04");
    EXPECT_EQ(format_hms(0ms), "0:00:00");
    EXPECT_EQ(format_hms(-5s), "0:00:00");
    EXPECT_EQ(format_hms(59999ms), "0:00:59");
    EXPECT_EQ(status_label(SubmissionStatus::evaluated), "Evaluated");
    EXPECT_EQ(status_label(SubmissionStatus::queued), "Queued");
}

TEST_F(Api, SubmitAndPollMonotonically) {
    start();
    auto r = submit("echo", "alice-token", "print(input())");
    ASSERT_EQ(r->status, 201) << r->body;
    auto created = json::parse(r->body);
    EXPECT_EQ(created["status"], "queued");
    EXPECT_EQ(created["status_label"], "Queued");
    std::vector<std::string> seen;
    auto view = wait_evaluated(created["submission_id"], "alice-token", &seen);
    EXPECT_EQ(view["status_label"], "Evaluated");
    EXPECT_EQ(view["score"], 100);
    EXPECT_EQ(view["max_score"], 100);
    EXPECT_EQ(view["per_case"].size(), 4u);
    std::vector<std::string> order = {"queued", "compiling", "running", "evaluated"};
    int last = -1;
    for (const auto& s : seen) {
        int rank = static_cast<int>(std::find(order.begin(), order.end(), s) - order.begin());
        ASSERT_LT(rank, 4) << s;
        EXPECT_GE(rank, last);
        last = rank;
    }

    auto tasks_list = json::parse(get("/api/tasks/echo", "alice-token")->body);
    EXPECT_EQ(tasks_list["best_score"], 100);
    EXPECT_EQ(tasks_list["submission_count"], 1);
    EXPECT_EQ(tasks_list["languages"][0]["display_name"], "Python 3 / CPython");
}

TEST_F(Api, SubmissionValidation) {
    start();
    httplib::MultipartFormDataItems none = {{"language", "python3", "", ""}};
    auto missing = client->Post("/api/tasks/echo/submissions", auth("bob-token"), none);
    EXPECT_EQ(missing->status, 422);
    EXPECT_NE(missing->body.find("'main'"), std::string::npos);
    EXPECT_EQ(submit("echo", "bob-token", "x", "cobol")->status, 422);
    EXPECT_EQ(submit("echo", "bob-token", std::string(5000, 'x'))->status, 413);
    EXPECT_EQ(submit("nope", "bob-token", "x")->status, 404);
    EXPECT_EQ(submit("echo", "bob-token", std::string(4096, 'x'))->status, 201);
}

TEST_F(Api, UsersOnlySeeTheirOwnSubmissions) {
    start(0);
    std::vector<std::string> users = {"alice", "bob", "carol", "dave", "erin"};
    std::map<std::string, std::string> owner;
    for (const auto& u : users)
        for (int i = 0; i < 2; ++i) {
            auto r = submit("echo", u + "-token", "print(input())");
            ASSERT_EQ(r->status, 201);
            owner[json::parse(r->body)["submission_id"]] = u;
        }
    std::mt19937 rng(3);
    std::vector<std::string> ids;
    for (auto& [id, _] : owner) ids.push_back(id);
    for (int i = 0; i < 60; ++i) {
        const auto& id = ids[rng() % ids.size()];
        const auto& viewer = users[rng() % users.size()];
        int expect = owner[id] == viewer ? 200 : 404;
        EXPECT_EQ(get("/api/submissions/" + id, viewer + "-token")->status, expect);
        EXPECT_EQ(get("/api/submissions/" + id + "/bundle", viewer + "-token")->status, expect);
    }
    for (const auto& u : users) {
        auto list = json::parse(get("/api/tasks/echo/submissions", u + "-token")->body);
        EXPECT_EQ(list.size(), 2u);
        for (const auto& s : list) EXPECT_EQ(s["user_id"], u);
    }
    EXPECT_EQ(json::parse(get("/api/tasks/echo/submissions", kTeacher)->body).size(), 10u);
    EXPECT_EQ(get("/api/submissions/" + ids[0], kTeacher)->status, 200);
}

TEST_F(Api, AuthenticationAndRoles) {
    start(0);
    for (const auto& route : ApiServer::routes()) {
        auto path = std::regex_replace(route.pattern, std::regex("\\{id\\}"), "x");
        httplib::Result anon = route.method == "GET"    ? client->Get(path)
                               : route.method == "POST" ? client->Post(path, "{}", "application/json")
                                                        : client->Delete(path);
        EXPECT_EQ(anon->status, 401) << route.method << " " << path;
        httplib::Headers bad = auth("wrong-token-123");
        EXPECT_EQ(client->Get("/api/me", bad)->status, 401);
        if (!route.teacher_only) continue;
        auto h = auth("alice-token");
        httplib::Result student = route.method == "GET"    ? client->Get(path, h)
                                  : route.method == "POST" ? client->Post(path, h, "{}", "application/json")
                                                           : client->Delete(path, h);
        EXPECT_EQ(student->status, 403) << route.method << " " << path;
    }
    auto me = json::parse(get("/api/me", kTeacher)->body);
    EXPECT_EQ(me["role"], "teacher");
    auto expired = service->users().add("temp", Role::student, now_utc() - 1s);
    EXPECT_EQ(get("/api/me", expired)->status, 401);
    auto fresh = service->users().add("temp2", Role::student, now_utc() + 1h);
    EXPECT_EQ(get("/api/me", fresh)->status, 200);
}

TEST_F(Api, VerdictOnlyCasesHideMessages) {
    start();
    auto r = submit("hidden", "carol-token", "WRONG");
    auto view = wait_evaluated(json::parse(r->body)["submission_id"], "carol-token");
    ASSERT_EQ(view["per_case"].size(), 2u);
    EXPECT_EQ(view["per_case"][0]["verdict"], "wrong_output");
    EXPECT_TRUE(view["per_case"][0].contains("message"));
    EXPECT_EQ(view["per_case"][1]["verdict"], "wrong_output");
    EXPECT_FALSE(view["per_case"][1].contains("message"));
    EXPECT_EQ(view["score"], 0);
}

TEST_F(Api, LockedContentIsNotFound) {
    start(0);
    EXPECT_EQ(get("/api/tasks/later", "dave-token")->status, 404);
    EXPECT_EQ(submit("later", "dave-token", "x")->status, 404);
    for (const auto& t : json::parse(get("/api/tasks", "dave-token")->body)) EXPECT_NE(t["task_id"], "later");
    EXPECT_EQ(get("/api/tasks/later", kTeacher)->status, 200);
    EXPECT_EQ(json::parse(get("/api/tasks/later", kTeacher)->body)["locked"], true);

    EXPECT_EQ(get("/api/materials/finale", "dave-token")->status, 404);
    auto intro = get("/api/materials/intro", "dave-token");
    EXPECT_EQ(intro->status, 200);
    EXPECT_EQ(intro->body, "slides");
    EXPECT_EQ(json::parse(get("/api/materials", "dave-token")->body).size(), 1u);
    EXPECT_EQ(json::parse(get("/api/materials", kTeacher)->body).size(), 2u);

    EXPECT_EQ(post("/api/admin/day", "dave-token", {{"day", 9}})->status, 403);
    EXPECT_EQ(post("/api/admin/day", kTeacher, {{"day", -1}})->status, 422);
    EXPECT_EQ(post("/api/admin/day", kTeacher, {{"day", 9}})->status, 200);
    EXPECT_EQ(get("/api/tasks/later", "dave-token")->status, 200);
    EXPECT_EQ(get("/api/materials/finale", "dave-token")->status, 200);
    EXPECT_EQ(json::parse(get("/api/time", "dave-token")->body)["course_day"], 9);
}

TEST_F(Api, TimeEndpoint) {
    start(0);
    auto t = json::parse(get("/api/time", "erin-token")->body);
    EXPECT_TRUE(parse_rfc3339(t["server_time"].get<std::string>()));
    EXPECT_TRUE(std::regex_match(t["server_time_display"].get<std::string>(), std::regex(R"(\d\d:\d\d:\d\d)")));
    auto left = t["time_left"].get<std::string>();
    EXPECT_TRUE(left == "76256:27:29" || left == "76256:27:28") << left;
    EXPECT_NEAR(t["time_left_seconds"].get<double>(), 76256.0 * 3600 + 27 * 60 + 29, 2);
}

TEST_F(Api, BundleDownload) {
    start();
    auto r = submit("echo", "alice-token", "print(input())");
    std::string id = json::parse(r->body)["submission_id"];
    wait_evaluated(id, "alice-token");
    auto b = get("/api/submissions/" + id + "/bundle", "alice-token");
    ASSERT_EQ(b->status, 200);
    auto entries = read_tar(b->body);
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].path, "main.py");
    EXPECT_EQ(entries[0].data, "print(input())");
    EXPECT_EQ(json::parse(entries[1].data)["score"], 100);
}

TEST_F(Api, AdminTaskUpload) {
    start(0);
    auto dir = fixtures() / "tasks/orf";
    httplib::MultipartFormDataItems items = {{"manifest", slurp(dir / "task.manifest"), "task.manifest", ""}};
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().filename() == "task.manifest") continue;
        auto rel = std::filesystem::relative(e.path(), dir).string();
        items.push_back({rel, slurp(e.path()), rel, ""});
    }
    auto ok = client->Post("/api/admin/tasks", auth(kTeacher), items);
    ASSERT_EQ(ok->status, 201) << ok->body;
    EXPECT_EQ(json::parse(ok->body)["revision"], 1);
    EXPECT_EQ(client->Post("/api/admin/tasks", auth(kTeacher), items)->status, 201);
    EXPECT_EQ(json::parse(get("/api/tasks/orf", kTeacher)->body)["has_statement"], true);
    EXPECT_EQ(get("/api/tasks/orf/statement", "bob-token")->status, 200);

    items.resize(1);  // drop every referenced file
    auto bad = client->Post("/api/admin/tasks", auth(kTeacher), items);
    ASSERT_EQ(bad->status, 422);
    auto errs = json::parse(bad->body)["errors"];
    ASSERT_FALSE(errs.empty());
    EXPECT_GT(errs[0]["line"].get<int>(), 0);
    EXPECT_NE(errs[0]["message"].get<std::string>().find("not found"), std::string::npos);
}

TEST_F(Api, AdminMaterials) {
    start(0);
    httplib::MultipartFormDataItems items = {{"file", "a,b\n1,2\n", "genes.csv", "text/csv"},
                                             {"material_id", "genes", "", ""},
                                             {"title", "Gene table", "", ""},
                                             {"unlock_day", "0", "", ""},
                                             {"category", "data", "", ""}};
    ASSERT_EQ(client->Post("/api/admin/materials", auth(kTeacher), items)->status, 201);
    EXPECT_EQ(get("/api/materials/genes", "bob-token")->body, "a,b\n1,2\n");
    EXPECT_EQ(client->Delete("/api/admin/materials/genes", auth(kTeacher))->status, 200);
    EXPECT_EQ(get("/api/materials/genes", "bob-token")->status, 404);
    EXPECT_EQ(client->Delete("/api/admin/materials/genes", auth(kTeacher))->status, 404);
}

TEST_F(Api, QueueWorkersAndAlerts) {
    start(1);
    auto r = submit("custom", "erin-token", "print()");
    auto view = wait_evaluated(json::parse(r->body)["submission_id"], "erin-token");
    EXPECT_EQ(view["per_case"][0]["verdict"], "checker_error");
    auto alerts = json::parse(get("/api/admin/alerts", kTeacher)->body);
    ASSERT_EQ(alerts.size(), 1u);
    EXPECT_EQ(alerts[0]["task_id"], "custom");

    EXPECT_EQ(post("/api/admin/workers/local-1/state", kTeacher, {{"state", "paused"}})->status, 422);
    ASSERT_EQ(post("/api/admin/workers/local-1/state", kTeacher, {{"state", "disabled"}})->status, 200);
    auto queued = submit("echo", "erin-token", "x");
    std::this_thread::sleep_for(300ms);
    auto q = json::parse(get("/api/admin/queue", kTeacher)->body);
    ASSERT_EQ(q["pending"].size(), 1u);
    EXPECT_EQ(q["workers"][0]["admin_state"], "disabled");
    ASSERT_EQ(post("/api/admin/workers/local-1/state", kTeacher, {{"state", "active"}})->status, 200);
    wait_evaluated(json::parse(queued->body)["submission_id"], "erin-token");
}

TEST_F(Api, ExternalWorkerProtocol) {
    start(0);
    auto reg = post("/api/workers/ext-1/register", kTeacher, {{"labels", json::array()}});
    ASSERT_EQ(reg->status, 200);
    EXPECT_EQ(json::parse(reg->body)["heartbeat_window_ms"], 2000);
    EXPECT_EQ(post("/api/workers/ext-1/claim", kTeacher, {{"wait_ms", 10}})->status, 204);

    std::string good = json::parse(submit("echo", "alice-token", "ok")->body)["submission_id"];
    std::string bogus = json::parse(submit("echo", "alice-token", "ok")->body)["submission_id"];
    for (const auto& [sub, tamper] : {std::pair{good, false}, std::pair{bogus, true}}) {
        EXPECT_EQ(post("/api/workers/ext-1/heartbeat", kTeacher)->status, 200);
        auto claim = post("/api/workers/ext-1/claim", kTeacher, {{"wait_ms", 1000}});
        ASSERT_EQ(claim->status, 200);
        auto job = json::parse(claim->body)["job"];
        EXPECT_EQ(job["submission_id"], sub);
        auto result = run_evaluation(service->store(), *backend, sub);
        auto report = std::get<EvaluationReport>(result);
        if (tamper) report.score = 99;
        json body{{"job_id", job["job_id"]}, {"report", report}};
        EXPECT_EQ(post("/api/workers/other/complete", kTeacher, body)->status, 409);
        EXPECT_EQ(post("/api/workers/ext-1/complete", kTeacher, body)->status, 200);
    }
    EXPECT_EQ(json::parse(get("/api/submissions/" + good, "alice-token")->body)["score"], 100);
    EXPECT_EQ(json::parse(get("/api/submissions/" + bogus, "alice-token")->body)["status"], "internal_error");
}
