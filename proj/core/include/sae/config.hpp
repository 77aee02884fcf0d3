#pragma once

// Service configuration file: the same `key = value` format as task
// manifests. Keys are documented in docs/config.md.

#include "sae/keyvalue.hpp"
#include "sae/model.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sae {

struct ServiceConfig {
    std::filesystem::path storage = "sae-data";
    std::string listen_host = "127.0.0.1";
    int port = 8080;
    int workers = 2;
    std::vector<std::string> worker_labels;
    std::string backend = "process";  // process | null
    std::filesystem::path sandbox_root;  // empty: system temp dir
    std::filesystem::path bundles_dir;   // empty: no bundles
    std::size_t max_concurrent_sandboxes = 8;
    std::uint64_t upload_limit = 1 * kMiB;
    std::chrono::milliseconds heartbeat_window{15000};
    int max_attempts = 3;
    std::optional<std::string> course_start;  // "YYYY-MM-DD" or RFC 3339
    std::optional<Timestamp> course_end;
    std::filesystem::path static_dir;
    std::string log_level = "info";
    SandboxPolicy sandbox_defaults;
};

struct ConfigResult {
    std::optional<ServiceConfig> config;
    std::vector<LineError> errors;
};

/// Relative paths are resolved against `base_dir`.
ConfigResult parse_config(std::string_view text, const std::filesystem::path& base_dir = ".");
ConfigResult load_config(const std::filesystem::path& file);

}  // namespace sae
