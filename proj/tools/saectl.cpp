// saectl: operator tool for the submission-evaluation service.

#include "sae/api.hpp"
#include "sae/bundle.hpp"
#include "sae/error.hpp"
#include "sae/manifest.hpp"
#include "sae/null_backend.hpp"
#include "sae/process_backend.hpp"
#include "sae/serialization.hpp"
#include "sae/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kIo = 2;

// Thrown by subcommands to leave with a specific exit code.
struct Exit {
    int code;
    std::string message;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Exit{kIo, "cannot read " + p.string()};
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, std::string_view data) {
    std::ofstream out(p, std::ios::binary);
    if (!out.write(data.data(), static_cast<std::streamsize>(data.size()))) throw Exit{kIo, "cannot write " + p.string()};
}

sae::ServiceConfig config_from(const std::string& config_file, const std::string& storage) {
    sae::ServiceConfig cfg;
    if (!config_file.empty()) {
        auto r = sae::load_config(config_file);
        if (!r.config) {
            for (const auto& e : r.errors) std::cerr << config_file << ": " << e.to_string() << "\n";
            throw Exit{r.errors.size() == 1 && r.errors[0].line == 0 ? kIo : kValidation, ""};
        }
        cfg = *r.config;
    }
    if (!storage.empty()) cfg.storage = storage;
    return cfg;
}

// Storage-only access for offline admin commands.
struct Offline {
    std::string config_file;
    std::string storage;

    void add_options(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "Service config file (for its storage path)");
        cmd->add_option("--storage", storage, "Storage directory (overrides the config)");
    }

    sae::Store open() const {
        auto cfg = config_from(config_file, storage);
        try {
            return sae::Store(cfg.storage);
        } catch (const std::exception& e) {
            throw Exit{kIo, e.what()};
        }
    }
};

sae::ParsedTask load_task_or_exit(const fs::path& dir, const sae::SandboxPolicy& defaults) {
    if (!fs::is_directory(dir)) throw Exit{kIo, dir.string() + " is not a directory"};
    if (!fs::exists(dir / sae::kManifestFileName))
        throw Exit{kIo, "no " + std::string(sae::kManifestFileName) + " in " + dir.string()};
    sae::ManifestOptions opts;
    opts.base_dir = fs::absolute(dir);
    opts.sandbox_defaults = defaults;
    auto r = sae::load_task_dir(dir, opts);
    if (!r.task) {
        for (const auto& e : r.errors)
            std::cerr << (dir / sae::kManifestFileName).string() << ":" << e.to_string() << "\n";
        throw Exit{kValidation, ""};
    }
    return std::move(*r.task);
}

std::shared_ptr<sae::SandboxBackend> backend_from(const std::string& name, const std::string& bundles,
                                                  const std::string& sandbox_root) {
    sae::ServiceConfig cfg;
    cfg.backend = name;
    cfg.bundles_dir = bundles;
    cfg.sandbox_root = sandbox_root;
    if (name != "process" && name != "null") throw Exit{kValidation, "unknown backend '" + name + "'"};
    return sae::make_backend(cfg);
}

void print_report(const sae::EvaluationReport& r, std::int64_t max_score) {
    for (const auto& c : r.per_case) {
        std::cout << c.case_id << "\t" << sae::to_string(c.verdict) << "\t" << c.time_used << "s";
        if (!c.message.empty()) {
            std::string msg = c.message;
            for (auto& ch : msg)
                if (ch == '\n') ch = ' ';
            std::cout << "\t" << msg;
        }
        std::cout << "\n";
    }
    std::cout << "score " << r.score << " / " << max_score << "\n";
}

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

// ------------------------------------------------------------------ commands

int cmd_serve(const std::string& config_file, int port_override) {
    auto cfg = config_from(config_file, "");
    spdlog::set_level(spdlog::level::from_str(cfg.log_level));
    if (port_override >= 0) cfg.port = port_override;

    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);  // inherited by every thread we start

    sae::Service service(cfg);
    sae::ApiServer api(service);
    int port = 0;
    try {
        port = api.bind(cfg.listen_host, cfg.port);
    } catch (const sae::IoError& e) {
        throw Exit{kIo, e.what()};
    }
    service.start();
    api.start();
    std::cout << "listening on http://" << cfg.listen_host << ":" << port << std::endl;
    spdlog::info("storage {}, {} worker(s), backend {}", cfg.storage.string(), cfg.workers, service.backend().name());

    int sig = 0;
    sigwait(&set, &sig);
    spdlog::info("signal {} received, shutting down", sig);
    api.stop();
    service.stop();
    return kOk;
}

struct WorkerArgs {
    std::string url;
    std::string token;
    std::string id;
    std::vector<std::string> labels;
    std::string backend = "process";
    std::string bundles;
    std::string sandbox_root;
    int max_jobs = 0;  // 0: unlimited
    Offline storage;
};

int cmd_worker_connect(WorkerArgs& a) {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    if (a.token.empty()) {
        if (const char* t = std::getenv("SAE_TOKEN")) a.token = t;
    }
    if (a.id.empty()) a.id = "ext-" + std::to_string(::getpid());
    auto store = a.storage.open();
    auto backend = backend_from(a.backend, a.bundles, a.sandbox_root);

    httplib::Client http(a.url);
    http.set_bearer_token_auth(a.token);
    http.set_read_timeout(std::chrono::seconds(60));
    auto post = [&](const std::string& path, const json& body) {
        auto res = http.Post(path, body.dump(), "application/json");
        if (!res) throw Exit{kIo, "cannot reach " + a.url + ": " + httplib::to_string(res.error())};
        if (res->status == 401 || res->status == 403) throw Exit{kValidation, "token rejected (" + res->body + ")"};
        return res;
    };

    auto base = "/api/workers/" + a.id;
    auto reg = post(base + "/register", {{"labels", a.labels}});
    if (reg->status != 200) throw Exit{kIo, "register failed: " + reg->body};
    auto window = json::parse(reg->body).value("heartbeat_window_ms", 15000);
    std::cout << "worker " << a.id << " registered with " << a.url << std::endl;

    std::atomic<bool> done{false};
    std::thread beat([&] {
        httplib::Client hb(a.url);
        hb.set_bearer_token_auth(a.token);
        while (!done && !g_stop) {
            hb.Post(base + "/heartbeat", "{}", "application/json");
            for (int i = 0; i < 10 && !done && !g_stop; ++i)
                std::this_thread::sleep_for(std::chrono::milliseconds(std::max(10, window / 30)));
        }
    });

    int completed = 0;
    int rc = kOk;
    try {
        while (!g_stop && (a.max_jobs == 0 || completed < a.max_jobs)) {
            auto res = post(base + "/claim", {{"wait_ms", 1000}});
            if (res->status == 204) continue;
            if (res->status != 200) throw Exit{kIo, "claim failed: " + res->body};
            auto job = json::parse(res->body).at("job").get<sae::EvaluationJob>();
            spdlog::info("claimed {} for {}", job.job_id, job.submission_id);
            auto result = sae::run_evaluation(store, *backend, job.submission_id);
            json body{{"job_id", job.job_id}};
            if (auto* r = std::get_if<sae::EvaluationReport>(&result)) body["report"] = *r;
            else body["infra_failure"] = std::get<sae::InfraFailure>(result).reason;
            auto c = post(base + "/complete", body);
            if (c->status != 200) spdlog::warn("completion of {} not accepted: {}", job.job_id, c->body);
            ++completed;
        }
    } catch (const Exit& e) {
        std::cerr << e.message << "\n";
        rc = e.code;
    }
    done = true;
    beat.join();
    return rc;
}

int cmd_task_validate(const fs::path& dir) {
    auto task = load_task_or_exit(dir, {});
    std::cout << "ok: task '" << task.spec.task_id << "' (" << task.spec.file_slots.size() << " slots, "
              << task.spec.test_cases.size() << " cases)\n";
    return kOk;
}

int cmd_task_import(const fs::path& dir, const Offline& off) {
    auto cfg = config_from(off.config_file, off.storage);
    auto task = load_task_or_exit(dir, cfg.sandbox_defaults);
    cfg.workers = 0;
    sae::Service service(cfg, std::make_shared<sae::NullBackend>(sae::NullBackend::constant_output("")));
    try {
        auto outcome = service.import_task(task);
        std::cout << outcome.task_id << " revision " << outcome.revision << "\n";
    } catch (const sae::InvalidArgument& e) {
        throw Exit{kValidation, e.what()};
    }
    return kOk;
}

int cmd_eval_local(const fs::path& task_dir, const fs::path& solution_dir, const std::string& language,
                   const std::string& backend_name, const std::string& bundles, bool as_json) {
    auto task = load_task_or_exit(task_dir, {});
    const auto* lang = task.spec.find_language(language);
    if (!lang) throw Exit{kValidation, "task has no language '" + language + "'"};
    std::map<std::string, std::string> files;
    for (const auto& slot : task.spec.file_slots) {
        auto with_suffix = solution_dir / lang->file_name(slot);
        auto bare = solution_dir / slot;
        if (fs::exists(with_suffix)) files[slot] = read_file(with_suffix);
        else if (fs::exists(bare)) files[slot] = read_file(bare);
        else throw Exit{kValidation, "missing file for slot '" + slot + "' (looked for " + with_suffix.string() + ")"};
    }

    auto tmp = fs::temp_directory_path() / ("sae-eval-" + std::to_string(::getpid()));
    struct Cleanup {
        fs::path p;
        ~Cleanup() {
            std::error_code ec;
            fs::remove_all(p, ec);
        }
    } cleanup{tmp};

    auto backend = backend_from(backend_name, bundles, "");
    sae::Store store(tmp);
    for (const auto& [hash, bytes] : task.blobs) store.blobs().put(bytes);
    store.save_task(task.spec);
    auto sub = store.create_submission("local", task.spec.task_id, files, language);
    auto result = sae::run_evaluation(store, *backend, sub.submission_id);
    if (auto* f = std::get_if<sae::InfraFailure>(&result)) throw Exit{kIo, "evaluation failed: " + f->reason};
    const auto& report = std::get<sae::EvaluationReport>(result);
    if (as_json) std::cout << json(report).dump(2) << "\n";
    else print_report(report, task.spec.max_score);
    return kOk;
}

std::string pad(std::string s, std::size_t n) {
    if (s.size() < n) s.resize(n, ' ');
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"saectl: submission and automated evaluation service"};
    app.require_subcommand(1);
    spdlog::set_level(spdlog::level::warn);

    std::string config_file;
    int port_override = -1;
    auto* serve = app.add_subcommand("serve", "Run the API, scheduler and in-process workers");
    serve->add_option("--config", config_file, "Config file")->required()->check(CLI::ExistingFile);
    serve->add_option("--port", port_override, "Override the configured port (0 picks a free port)");

    WorkerArgs wa;
    auto* worker = app.add_subcommand("worker", "Worker commands");
    worker->add_option("--connect", wa.url, "Service URL; runs an external worker against it");
    worker->add_option("--token", wa.token, "Teacher token (default: $SAE_TOKEN)");
    worker->add_option("--id", wa.id, "Worker id");
    worker->add_option("--labels", wa.labels, "Affinity labels")->delimiter(',');
    worker->add_option("--backend", wa.backend, "process or null");
    worker->add_option("--bundles", wa.bundles, "Dependency bundle directory");
    worker->add_option("--sandbox-root", wa.sandbox_root, "Sandbox scratch directory");
    worker->add_option("--max-jobs", wa.max_jobs, "Exit after this many jobs");
    wa.storage.add_options(worker);
    auto* worker_list = worker->add_subcommand("list", "List known workers");
    Offline worker_off;
    worker_off.add_options(worker_list);

    auto* task = app.add_subcommand("task", "Task commands");
    task->require_subcommand(1);
    std::string task_dir;
    Offline task_off;
    auto* task_import = task->add_subcommand("import", "Import (or update) a task directory");
    task_import->add_option("dir", task_dir)->required();
    task_off.add_options(task_import);
    auto* task_validate = task->add_subcommand("validate", "Check a task directory without side effects");
    task_validate->add_option("dir", task_dir)->required();

    std::string solution_dir, language, backend_name = "process", bundles;
    bool as_json = false;
    auto* eval = app.add_subcommand("eval-local", "Evaluate a solution against a task directory locally");
    eval->add_option("task_dir", task_dir)->required();
    eval->add_option("solution_dir", solution_dir)->required()->check(CLI::ExistingDirectory);
    eval->add_option("--language", language, "Language profile id")->required();
    eval->add_option("--backend", backend_name, "process or null");
    eval->add_option("--bundles", bundles, "Dependency bundle directory");
    eval->add_flag("--json", as_json, "Print the report as JSON");

    auto* user = app.add_subcommand("user", "User commands");
    user->require_subcommand(1);
    std::string user_id, role = "student", token;
    int expires_days = 0;
    Offline user_off;
    auto* user_add = user->add_subcommand("add", "Create a user and print its token");
    user_add->add_option("user_id", user_id)->required();
    user_add->add_option("--role", role, "student or teacher");
    user_add->add_option("--token", token, "Use this token instead of a random one");
    user_add->add_option("--expires-days", expires_days, "Token lifetime in days (0: no expiry)");
    user_off.add_options(user_add);
    auto* user_list = user->add_subcommand("list", "List users");
    user_off.add_options(user_list);

    auto* day = app.add_subcommand("day", "Course day commands");
    day->require_subcommand(1);
    std::int64_t day_value = 0;
    Offline day_off;
    auto* day_set = day->add_subcommand("set", "Set the current course day");
    day_set->add_option("day", day_value)->required()->check(CLI::NonNegativeNumber);
    day_off.add_options(day_set);

    auto* bundle = app.add_subcommand("bundle", "Dependency bundle commands");
    bundle->require_subcommand(1);
    std::string bundle_dir, bundle_out;
    auto* bundle_pack = bundle->add_subcommand("pack", "Pack a bundle directory into <id>.tar");
    bundle_pack->add_option("dir", bundle_dir)->required()->check(CLI::ExistingDirectory);
    bundle_pack->add_option("-o,--output", bundle_out, "Output file (default: <id>.tar)");

    auto* material = app.add_subcommand("material", "Course material commands");
    material->require_subcommand(1);
    std::string mat_file, mat_id, mat_title, mat_category = "data";
    std::int64_t mat_day = 0;
    Offline mat_off;
    auto* material_add = material->add_subcommand("add", "Add a material file");
    material_add->add_option("file", mat_file)->required()->check(CLI::ExistingFile);
    material_add->add_option("--id", mat_id, "Material id (default: file name)");
    material_add->add_option("--title", mat_title, "Title");
    material_add->add_option("--day", mat_day, "Unlock day")->check(CLI::NonNegativeNumber);
    material_add->add_option("--category", mat_category, "slides, exercise, example_code or data");
    mat_off.add_options(material_add);
    auto* material_list = material->add_subcommand("list", "List materials");
    mat_off.add_options(material_list);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) return cmd_serve(config_file, port_override);

        if (*worker) {
            if (*worker_list) {
                auto store = worker_off.open();
                for (const auto& r : store.records().list(sae::Collection::workers)) {
                    const auto& b = r.body;
                    std::cout << pad(r.id, 16) << pad(b.value("admin_state", "?"), 10)
                              << pad(b.value("liveness", "?"), 18) << "completed "
                              << b.value("completed_count", 0) << "\n";
                }
                return kOk;
            }
            if (wa.url.empty()) throw Exit{kValidation, "worker: pass --connect <url> or use 'worker list'"};
            return cmd_worker_connect(wa);
        }

        if (*task_validate) return cmd_task_validate(task_dir);
        if (*task_import) return cmd_task_import(task_dir, task_off);
        if (*eval) return cmd_eval_local(task_dir, solution_dir, language, backend_name, bundles, as_json);

        if (*user_add) {
            auto r = sae::parse_role(role);
            if (!r) throw Exit{kValidation, "role must be student or teacher"};
            auto store = user_off.open();
            sae::UserDirectory users(store);
            std::optional<sae::Timestamp> expiry;
            if (expires_days > 0) expiry = sae::now_utc() + std::chrono::hours(24 * expires_days);
            try {
                if (token.empty()) token = users.add(user_id, *r, expiry);
                else users.add_with_token(user_id, *r, token, expiry);
            } catch (const sae::InvalidArgument& e) {
                throw Exit{kValidation, e.what()};
            }
            std::cout << token << "\n";
            return kOk;
        }
        if (*user_list) {
            auto store = user_off.open();
            for (const auto& u : sae::UserDirectory(store).list())
                std::cout << pad(u.user_id, 20) << pad(std::string(sae::to_string(u.role)), 9)
                          << (u.expires_at ? "expires " + sae::format_rfc3339(*u.expires_at) : "") << "\n";
            return kOk;
        }

        if (*day_set) {
            auto store = day_off.open();
            store.set_course_day(day_value);
            std::cout << "course day " << day_value << "\n";
            return kOk;
        }

        if (*bundle_pack) {
            std::string archive;
            try {
                archive = sae::pack_bundle_dir(bundle_dir);
            } catch (const sae::InvalidArgument& e) {
                throw Exit{kValidation, e.what()};
            }
            if (bundle_out.empty()) bundle_out = sae::parse_bundle(archive).id + ".tar";
            write_file(bundle_out, archive);
            std::cout << bundle_out << "\n";
            return kOk;
        }

        if (*material_add) {
            auto category = sae::parse_material_category(mat_category);
            if (!category) throw Exit{kValidation, "unknown category '" + mat_category + "'"};
            auto store = mat_off.open();
            auto name = fs::path(mat_file).filename().string();
            auto m = sae::MaterialCatalog(store).add(mat_id.empty() ? name : mat_id, mat_title, read_file(mat_file),
                                                     mat_day, *category, name);
            std::cout << m.material_id << " " << m.blob.hash << "\n";
            return kOk;
        }
        if (*material_list) {
            auto store = mat_off.open();
            for (const auto& m : sae::MaterialCatalog(store).list())
                std::cout << pad(m.material_id, 24) << "day " << pad(std::to_string(m.unlock_day), 4)
                          << pad(std::string(sae::to_string(m.category)), 14) << m.title << "\n";
            return kOk;
        }
    } catch (const Exit& e) {
        if (!e.message.empty()) std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const sae::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const sae::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    }
    return kOk;
}
