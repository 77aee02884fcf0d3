#pragma once

// Task manifest (`task.manifest`) parsing. The key set is documented in
// docs/manifest.md. Referenced files (stdin, expected output, custom checker,
// statement) are resolved through a FileResolver so the same parser serves
// directory imports and HTTP uploads.

#include "sae/keyvalue.hpp"
#include "sae/model.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace sae {

inline constexpr std::string_view kManifestFileName = "task.manifest";

using FileResolver = std::function<std::optional<std::string>(const std::string& relative_path)>;

struct ManifestOptions {
    /// Relative mount host paths are resolved against this directory. When
    /// unset, relative host paths are rejected.
    std::optional<std::filesystem::path> base_dir;
    SandboxPolicy sandbox_defaults;
};

struct ParsedTask {
    TaskSpec spec;                              // blob refs are content hashes
    std::map<std::string, std::string> blobs;   // hash -> bytes referenced by spec
    std::optional<std::string> statement;       // statement bytes, when declared
    std::string statement_file;
};

struct ManifestResult {
    std::optional<ParsedTask> task;  // set iff errors is empty
    std::vector<LineError> errors;
};

/// Parses the manifest and every file it names. Structural and invariant
/// errors are all collected; errors that belong to a manifest line carry it.
ManifestResult parse_task_manifest(std::string_view text, const FileResolver& files, const ManifestOptions& options);

/// Reads `<dir>/task.manifest` and resolves files relative to `dir`.
ManifestResult load_task_dir(const std::filesystem::path& dir, ManifestOptions options = {});

/// Material id under which a task's statement is published.
std::string statement_material_id(std::string_view task_id);

}  // namespace sae
