#include "sae/manifest.hpp"

#include "sae/command.hpp"
#include "sae/hash.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace sae {

namespace fs = std::filesystem;

std::string statement_material_id(std::string_view task_id) { return std::string(task_id) + ".statement"; }

namespace {

bool safe_relative(const std::string& p) {
    if (p.empty() || p.front() == '/') return false;
    for (const auto& part : fs::path(p))
        if (part == "..") return false;
    return true;
}

class ManifestParser {
public:
    ManifestParser(const FileResolver& files, const ManifestOptions& options) : files_(files), options_(options) {}

    ManifestResult run(std::string_view text) {
        auto parsed = parse_kv(text);
        errors_ = std::move(parsed.errors);
        const auto& doc = parsed.document;

        spec_.sandbox = options_.sandbox_defaults;
        parse_root(doc.root);
        bool saw_checker = false, saw_sandbox = false;
        for (const auto& section : doc.sections) {
            if (section.kind == "checker") {
                if (saw_checker) error(section.line, "duplicate [checker] section");
                saw_checker = true;
                checker_line_ = section.line;
                parse_checker(section);
            } else if (section.kind == "sandbox") {
                if (saw_sandbox) error(section.line, "duplicate [sandbox] section");
                saw_sandbox = true;
                sandbox_line_ = section.line;
                parse_sandbox(section);
            } else if (section.kind == "language") {
                parse_language(section);
            } else if (section.kind == "case") {
                parse_case(section);
            } else {
                error(section.line, "unknown section [" + section.kind + "]");
            }
        }

        if (errors_.empty()) {
            auto validated = validate_task(spec_);
            if (auto* bad = std::get_if<ValidationErrors>(&validated)) {
                for (auto& m : bad->messages) {
                    int line = line_for(m);
                    error(line, std::move(m));
                }
            }
        }

        ManifestResult result;
        result.errors = std::move(errors_);
        if (result.errors.empty()) {
            ParsedTask task;
            task.spec = std::move(spec_);
            task.blobs = std::move(blobs_);
            task.statement = std::move(statement_);
            task.statement_file = std::move(statement_file_);
            result.task = std::move(task);
        }
        return result;
    }

private:
    void error(int line, std::string message) { errors_.push_back({line, std::move(message)}); }

    std::optional<std::string> load_file(const KvEntry& e) {
        if (!safe_relative(e.value)) {
            error(e.line, "file path '" + e.value + "' must be relative to the task directory");
            return std::nullopt;
        }
        auto bytes = files_(e.value);
        if (!bytes) error(e.line, "file not found: " + e.value);
        return bytes;
    }

    std::optional<std::string> load_blob(const KvEntry& e) {
        auto bytes = load_file(e);
        if (!bytes) return std::nullopt;
        auto ref = sha256_hex(*bytes);
        blobs_.emplace(ref, std::move(*bytes));
        return ref;
    }

    template <typename T>
    std::optional<T> require(const KvEntry& e, std::optional<T> v, std::string_view what) {
        if (!v) error(e.line, "invalid " + std::string(what) + " '" + e.value + "' for key '" + e.key + "'");
        return v;
    }

    void unknown_key(const KvEntry& e, std::string_view where) {
        error(e.line, "unknown key '" + e.key + "' in " + std::string(where));
    }

    void parse_root(const KvSection& root) {
        const KvEntry* statement = nullptr;
        for (const auto& e : root.entries) {
            if (e.key == "id") {
                spec_.task_id = e.value;
                keyed_lines_["task_id"] = e.line;
            } else if (e.key == "title") {
                spec_.title = e.value;
            } else if (e.key == "statement") {
                statement = &e;
            } else if (e.key == "slots") {
                spec_.file_slots = split_list(e.value);
                keyed_lines_["slot"] = e.line;
            } else if (e.key == "max_score") {
                if (auto v = require(e, parse_integer(e.value), "integer")) spec_.max_score = *v;
                keyed_lines_["max_score"] = e.line;
            } else if (e.key == "unlock_day") {
                if (auto v = require(e, parse_integer(e.value), "integer")) spec_.unlock_day = *v;
                keyed_lines_["unlock_day"] = e.line;
            } else if (e.key == "affinity") {
                spec_.affinity = e.value;
            } else {
                unknown_key(e, "task header");
            }
        }
        if (spec_.task_id.empty()) error(0, "missing required key 'id'");
        if (!root.find("slots")) error(0, "missing required key 'slots'");
        if (statement) {
            if (auto bytes = load_file(*statement)) {
                statement_ = std::move(*bytes);
                statement_file_ = statement->value;
                spec_.statement_ref = statement_material_id(spec_.task_id);
            }
        }
    }

    void parse_checker(const KvSection& s) {
        for (const auto& e : s.entries) {
            if (e.key == "kind") {
                if (auto k = require(e, parse_checker_kind(e.value), "checker kind")) spec_.checker.kind = *k;
            } else if (e.key == "epsilon") {
                spec_.checker.numeric_epsilon = require(e, parse_seconds(e.value), "number");
            } else if (e.key == "program") {
                spec_.checker.custom_checker_ref = load_blob(e);
            } else if (e.key == "time_limit") {
                if (auto v = require(e, parse_seconds(e.value), "duration")) spec_.checker.checker_time_limit = *v;
            } else {
                unknown_key(e, "[checker]");
            }
        }
    }

    void parse_sandbox(const KvSection& s) {
        auto& sb = spec_.sandbox;
        bool wall_set = false, cpu_set = false;
        for (const auto& e : s.entries) {
            if (e.key == "cpu_time") {
                if (auto v = require(e, parse_seconds(e.value), "duration")) sb.cpu_time_limit = *v, cpu_set = true;
            } else if (e.key == "wall_time") {
                if (auto v = require(e, parse_seconds(e.value), "duration")) sb.wall_time_limit = *v, wall_set = true;
            } else if (e.key == "memory") {
                if (auto v = require(e, parse_size(e.value), "size")) sb.memory_limit = *v;
            } else if (e.key == "max_output") {
                if (auto v = require(e, parse_size(e.value), "size")) sb.max_output = *v;
            } else if (e.key == "network") {
                if (auto v = require(e, parse_bool(e.value), "boolean")) sb.network_allowed = *v;
            } else if (e.key == "dependencies") {
                sb.dependencies = split_list(e.value);
            } else if (e.key == "mount") {
                parse_mount(e);
            } else {
                unknown_key(e, "[sandbox]");
            }
        }
        if (cpu_set && !wall_set) sb.wall_time_limit = 2.0 * sb.cpu_time_limit;
    }

    // mount = <host>:<guest>[:ro|:rw]
    void parse_mount(const KvEntry& e) {
        auto parts = split_list(e.value, ':');
        if (parts.size() < 2 || parts.size() > 3) {
            error(e.line, "mount must be '<host>:<guest>[:ro|rw]'");
            return;
        }
        Mount m;
        m.guest_path = parts[1];
        if (parts.size() == 3) {
            if (parts[2] == "ro") m.read_only = true;
            else if (parts[2] == "rw") m.read_only = false;
            else {
                error(e.line, "mount mode must be 'ro' or 'rw'");
                return;
            }
        }
        fs::path host(parts[0]);
        if (host.is_relative()) {
            if (!options_.base_dir) {
                error(e.line, "mount host path '" + parts[0] + "' must be absolute");
                return;
            }
            if (!safe_relative(parts[0])) {
                error(e.line, "mount host path '" + parts[0] + "' escapes the task directory");
                return;
            }
            host = fs::absolute(*options_.base_dir / host).lexically_normal();
        }
        std::error_code ec;
        if (!fs::exists(host, ec)) {
            error(e.line, "mount host path not found: " + host.string());
            return;
        }
        m.host_path = host.string();
        spec_.sandbox.mounts.push_back(std::move(m));
    }

    void parse_language(const KvSection& s) {
        LanguageProfile lang;
        lang.profile_id = s.argument;
        lang.display_name = s.argument;
        if (s.argument.empty()) error(s.line, "[language] needs an id, e.g. [language python3]");
        for (const auto& e : s.entries) {
            if (e.key == "name") lang.display_name = e.value;
            else if (e.key == "suffix") lang.source_suffix = e.value;
            else if (e.key == "compile") lang.compile_command = e.value;
            else if (e.key == "run") lang.run_command = e.value;
            else unknown_key(e, "[language " + s.argument + "]");
        }
        if (!s.find("run")) error(s.line, "[language " + s.argument + "] missing 'run'");
        keyed_lines_["language '" + lang.profile_id + "'"] = s.line;
        spec_.languages.push_back(std::move(lang));
    }

    void parse_case(const KvSection& s) {
        TestCase tc;
        tc.case_id = s.argument;
        if (s.argument.empty()) error(s.line, "[case] needs an id, e.g. [case small]");
        for (const auto& e : s.entries) {
            if (e.key == "stdin") tc.stdin_ref = load_blob(e);
            else if (e.key == "expected") tc.expected_ref = load_blob(e);
            else if (e.key == "args") tc.args = split_command(e.value);
            else if (e.key == "weight") {
                if (auto w = require(e, Weight::parse(e.value), "weight")) tc.weight = *w;
            } else if (e.key == "feedback") {
                if (auto v = require(e, parse_visibility(e.value), "feedback visibility")) tc.visibility = *v;
            } else {
                unknown_key(e, "[case " + s.argument + "]");
            }
        }
        keyed_lines_["test case '" + tc.case_id + "'"] = s.line;
        spec_.test_cases.push_back(std::move(tc));
    }

    int line_for(const std::string& message) const {
        for (const auto& [needle, line] : keyed_lines_)
            if (message.find(needle) != std::string::npos) return line;
        if (message.starts_with("checker:")) return checker_line_;
        if (message.starts_with("sandbox:")) return sandbox_line_;
        return 0;
    }

    const FileResolver& files_;
    const ManifestOptions& options_;
    TaskSpec spec_;
    std::map<std::string, std::string> blobs_;
    std::optional<std::string> statement_;
    std::string statement_file_;
    std::vector<LineError> errors_;
    std::map<std::string, int> keyed_lines_;
    int checker_line_ = 0;
    int sandbox_line_ = 0;
};

std::optional<std::string> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

}  // namespace

ManifestResult parse_task_manifest(std::string_view text, const FileResolver& files, const ManifestOptions& options) {
    return ManifestParser(files, options).run(text);
}

ManifestResult load_task_dir(const fs::path& dir, ManifestOptions options) {
    auto text = read_file(dir / kManifestFileName);
    if (!text) return {std::nullopt, {{0, "cannot read " + (dir / kManifestFileName).string()}}};
    if (!options.base_dir) options.base_dir = fs::absolute(dir);
    FileResolver resolver = [&dir](const std::string& rel) -> std::optional<std::string> {
        std::error_code ec;
        if (!fs::is_regular_file(dir / rel, ec)) return std::nullopt;
        return read_file(dir / rel);
    };
    return parse_task_manifest(*text, resolver, options);
}

}  // namespace sae
