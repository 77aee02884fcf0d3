#include "sae/config.hpp"

#include "sae/materials.hpp"
#include "sae/serialization.hpp"

#include <fstream>
#include <sstream>

namespace sae {

namespace fs = std::filesystem;

ConfigResult parse_config(std::string_view text, const fs::path& base_dir) {
    auto parsed = parse_kv(text);
    ConfigResult result;
    result.errors = parsed.errors;
    ServiceConfig cfg;
    auto bad = [&](const KvEntry& e, const std::string& what) {
        result.errors.push_back({e.line, "invalid " + e.key + " '" + e.value + "': " + what});
    };
    auto path = [&](const std::string& v) { return fs::path(v).is_absolute() ? fs::path(v) : base_dir / v; };

    for (const auto& e : parsed.document.root.entries) {
        const auto& k = e.key;
        const auto& v = e.value;
        if (k == "storage") cfg.storage = path(v);
        else if (k == "listen") cfg.listen_host = v;
        else if (k == "port") {
            auto n = parse_integer(v);
            if (!n || *n < 0 || *n > 65535) bad(e, "expected 0..65535");
            else cfg.port = static_cast<int>(*n);
        } else if (k == "workers") {
            auto n = parse_integer(v);
            if (!n || *n < 0 || *n > 256) bad(e, "expected 0..256");
            else cfg.workers = static_cast<int>(*n);
        } else if (k == "worker_labels") cfg.worker_labels = split_list(v);
        else if (k == "backend") {
            if (v != "process" && v != "null") bad(e, "expected process or null");
            else cfg.backend = v;
        } else if (k == "sandbox_root") cfg.sandbox_root = path(v);
        else if (k == "bundles") cfg.bundles_dir = path(v);
        else if (k == "max_concurrent_sandboxes") {
            auto n = parse_integer(v);
            if (!n || *n < 1) bad(e, "expected a positive integer");
            else cfg.max_concurrent_sandboxes = static_cast<std::size_t>(*n);
        } else if (k == "upload_limit") {
            auto n = parse_size(v);
            if (!n || *n == 0) bad(e, "expected a positive size");
            else cfg.upload_limit = *n;
        } else if (k == "heartbeat_window") {
            auto s = parse_seconds(v);
            if (!s || *s <= 0) bad(e, "expected a positive duration");
            else cfg.heartbeat_window = std::chrono::milliseconds(static_cast<std::int64_t>(*s * 1000));
        } else if (k == "max_attempts") {
            auto n = parse_integer(v);
            if (!n || *n < 1) bad(e, "expected a positive integer");
            else cfg.max_attempts = static_cast<int>(*n);
        } else if (k == "course_start") {
            if (!CourseCalendar::parse(v)) bad(e, "expected YYYY-MM-DD or an RFC 3339 timestamp");
            else cfg.course_start = v;
        } else if (k == "course_end") {
            auto t = v.size() == 10 ? parse_rfc3339(v + "T00:00:00Z") : parse_rfc3339(v);
            if (!t) bad(e, "expected YYYY-MM-DD or an RFC 3339 timestamp");
            else cfg.course_end = t;
        } else if (k == "static_dir") cfg.static_dir = path(v);
        else if (k == "log_level") cfg.log_level = v;
        else result.errors.push_back({e.line, "unknown key '" + k + "'"});
    }

    for (const auto& s : parsed.document.sections) {
        if (s.kind != "sandbox" || !s.argument.empty()) {
            result.errors.push_back({s.line, "unknown section [" + s.kind + "]"});
            continue;
        }
        auto& sb = cfg.sandbox_defaults;
        for (const auto& e : s.entries) {
            if (e.key == "cpu_time" || e.key == "wall_time") {
                auto t = parse_seconds(e.value);
                if (!t || *t <= 0) bad(e, "expected a positive duration");
                else (e.key == "cpu_time" ? sb.cpu_time_limit : sb.wall_time_limit) = *t;
            } else if (e.key == "memory" || e.key == "max_output") {
                auto n = parse_size(e.value);
                if (!n || *n == 0) bad(e, "expected a positive size");
                else (e.key == "memory" ? sb.memory_limit : sb.max_output) = *n;
            } else if (e.key == "network") {
                auto b = parse_bool(e.value);
                if (!b) bad(e, "expected true or false");
                else sb.network_allowed = *b;
            } else {
                result.errors.push_back({e.line, "unknown key '" + e.key + "' in [sandbox]"});
            }
        }
        if (sb.wall_time_limit < sb.cpu_time_limit)
            result.errors.push_back({s.line, "[sandbox] wall_time must be >= cpu_time"});
    }

    if (result.errors.empty()) result.config = std::move(cfg);
    return result;
}

ConfigResult load_config(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return {std::nullopt, {{0, "cannot read " + file.string()}}};
    std::stringstream ss;
    ss << in.rdbuf();
    auto base = file.parent_path();
    return parse_config(ss.str(), base.empty() ? fs::path(".") : base);
}

}  // namespace sae
