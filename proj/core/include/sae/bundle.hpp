#pragma once

// Dependency bundles: pre-built tar archives staged into a sandbox before any
// code runs. A bundle archive holds a `BUNDLE` manifest
//
//     id = numerics-v1
//     install_path = /opt/bundles/numerics-v1
//
// plus payload files under `files/`. The payload appears read-only at
// install_path inside the sandbox; install_path is put on PYTHONPATH and
// LD_LIBRARY_PATH, and install_path/bin on PATH. See docs/bundles.md.

#include "sae/tar.hpp"

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace sae {

inline constexpr std::string_view kBundleManifestName = "BUNDLE";

struct Bundle {
    std::string id;
    std::string install_path;
    std::vector<TarEntry> files;  // paths relative to install_path
};

/// Parses a bundle archive. Throws InvalidArgument when malformed.
Bundle parse_bundle(std::string_view archive);

/// Builds a bundle archive from a directory containing `BUNDLE` and `files/`.
/// Throws InvalidArgument when the manifest does not parse.
std::string pack_bundle_dir(const std::filesystem::path& dir);

/// Looks bundles up by id as `<dir>/<id>.tar`.
class BundleRegistry {
public:
    BundleRegistry() = default;
    explicit BundleRegistry(std::filesystem::path dir) : dir_(std::move(dir)) {}

    /// nullopt when no bundle with that id exists.
    std::optional<Bundle> find(const std::string& id) const;

    const std::optional<std::filesystem::path>& dir() const { return dir_; }

private:
    std::optional<std::filesystem::path> dir_;
};

}  // namespace sae
