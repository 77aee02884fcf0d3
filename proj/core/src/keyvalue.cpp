#include "sae/keyvalue.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>

namespace sae {

const KvEntry* KvSection::find(std::string_view key) const {
    const KvEntry* found = nullptr;
    for (const auto& e : entries)
        if (e.key == key) found = &e;
    return found;
}

std::vector<const KvEntry*> KvSection::find_all(std::string_view key) const {
    std::vector<const KvEntry*> out;
    for (const auto& e : entries)
        if (e.key == key) out.push_back(&e);
    return out;
}

std::string LineError::to_string() const {
    if (line <= 0) return message;
    return "line " + std::to_string(line) + ": " + message;
}

std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\v\f";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view s, char sep) {
    std::vector<std::string> out;
    while (true) {
        auto pos = s.find(sep);
        auto item = trim(s.substr(0, pos));
        if (!item.empty()) out.emplace_back(item);
        if (pos == std::string_view::npos) break;
        s.remove_prefix(pos + 1);
    }
    return out;
}

KvParseResult parse_kv(std::string_view text) {
    KvParseResult result;
    KvSection* current = &result.document.root;
    int line_no = 0;
    while (!text.empty() || line_no == 0) {
        ++line_no;
        auto nl = text.find('\n');
        std::string_view raw = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        auto line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') {
            if (text.empty()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                result.errors.push_back({line_no, "unterminated section header"});
            } else {
                auto inner = trim(line.substr(1, line.size() - 2));
                KvSection section;
                section.line = line_no;
                auto sp = inner.find_first_of(" \t");
                section.kind = std::string(inner.substr(0, sp));
                if (sp != std::string_view::npos) section.argument = std::string(trim(inner.substr(sp)));
                if (section.kind.empty()) result.errors.push_back({line_no, "empty section name"});
                result.document.sections.push_back(std::move(section));
                current = &result.document.sections.back();
            }
        } else if (auto eq = line.find('='); eq == std::string_view::npos) {
            result.errors.push_back({line_no, "expected 'key = value'"});
        } else {
            auto key = trim(line.substr(0, eq));
            if (key.empty()) result.errors.push_back({line_no, "missing key before '='"});
            else current->entries.push_back({std::string(key), std::string(trim(line.substr(eq + 1))), line_no});
        }
        if (text.empty()) break;
    }
    return result;
}

std::optional<std::int64_t> parse_integer(std::string_view s) {
    s = trim(s);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::optional<std::uint64_t> parse_size(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    std::uint64_t mult = 1;
    char suffix = s.back();
    if (suffix == 'B' || suffix == 'b') {
        s.remove_suffix(1);
        if (s.empty()) return std::nullopt;
        suffix = s.back();
    }
    switch (suffix) {
        case 'K': case 'k': mult = 1024ULL; break;
        case 'M': case 'm': mult = 1024ULL * 1024; break;
        case 'G': case 'g': mult = 1024ULL * 1024 * 1024; break;
        default: break;
    }
    if (mult != 1) s.remove_suffix(1);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
    if (v > UINT64_MAX / mult) return std::nullopt;
    return v * mult;
}

std::optional<double> parse_seconds(std::string_view s) {
    s = trim(s);
    if (s.ends_with("ms")) {
        auto v = parse_seconds(s.substr(0, s.size() - 2));
        if (!v) return std::nullopt;
        return *v / 1000.0;
    }
    if (s.ends_with('s')) s.remove_suffix(1);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<bool> parse_bool(std::string_view s) {
    s = trim(s);
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    return std::nullopt;
}

}  // namespace sae
