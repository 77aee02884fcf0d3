#pragma once

// Minimal POSIX ustar reader/writer for submission downloads and dependency
// bundles. Writes are byte-deterministic: mtime, uid and gid are zero and
// owner names are empty.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sae {

struct TarEntry {
    std::string path;
    std::string data;
    std::uint32_t mode = 0644;

    friend bool operator==(const TarEntry&, const TarEntry&) = default;
};

/// Entries are written in the given order. Throws InvalidArgument for paths
/// that do not fit ustar's name/prefix fields.
std::string write_tar(std::span<const TarEntry> entries);

/// Regular files only; directory entries are skipped. Throws InvalidArgument
/// on a bad checksum, truncated data, absolute paths or `..` components.
std::vector<TarEntry> read_tar(std::string_view archive);

}  // namespace sae
