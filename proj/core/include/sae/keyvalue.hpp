#pragma once

// Line-oriented `key = value` documents with `[section]` / `[section name]`
// headers. Used for task manifests and the service config file.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sae {

struct KvEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct KvSection {
    std::string kind;      // "" for the top-level section
    std::string argument;  // "c1" in "[case c1]"
    int line = 0;
    std::vector<KvEntry> entries;

    const KvEntry* find(std::string_view key) const;
    std::vector<const KvEntry*> find_all(std::string_view key) const;
};

struct KvDocument {
    KvSection root;
    std::vector<KvSection> sections;
};

struct LineError {
    int line = 0;  // 0 when not tied to a line
    std::string message;

    std::string to_string() const;
};

struct KvParseResult {
    KvDocument document;
    std::vector<LineError> errors;
};

KvParseResult parse_kv(std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');

/// Byte counts such as "512M", "1G", "4096", "64K".
std::optional<std::uint64_t> parse_size(std::string_view s);
std::optional<double> parse_seconds(std::string_view s);
std::optional<bool> parse_bool(std::string_view s);
std::optional<std::int64_t> parse_integer(std::string_view s);

}  // namespace sae
