#include "sae/checker.hpp"

#include "sae/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace sae {

std::string lossy_utf8(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t n = bytes.size();
    std::size_t i = 0;
    while (i < n) {
        unsigned char c = p[i];
        std::size_t len = 0;
        std::uint32_t min = 0;
        if (c < 0x80) len = 1;
        else if ((c & 0xE0) == 0xC0) len = 2, min = 0x80;
        else if ((c & 0xF0) == 0xE0) len = 3, min = 0x800;
        else if ((c & 0xF8) == 0xF0) len = 4, min = 0x10000;

        bool ok = len > 0 && i + len <= n;
        std::uint32_t cp = len == 1 ? c : (len == 2 ? c & 0x1F : len == 3 ? c & 0x0F : c & 0x07);
        for (std::size_t k = 1; ok && k < len; ++k) {
            if ((p[i + k] & 0xC0) != 0x80) ok = false;
            else cp = (cp << 6) | (p[i + k] & 0x3F);
        }
        if (ok && len > 1 && (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) ok = false;
        if (ok) {
            out.append(bytes.substr(i, len));
            i += len;
        } else {
            out += "\xEF\xBF\xBD";
            ++i;
        }
    }
    return out;
}

namespace {
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::string show(std::string_view token) {
    constexpr std::size_t kMax = 64;
    if (token.size() <= kMax) return "'" + std::string(token) + "'";
    return "'" + std::string(token.substr(0, kMax)) + "...'";
}

std::string show_token(const std::vector<std::string>& tokens, std::size_t i) {
    return i < tokens.size() ? show(tokens[i]) : std::string("end of output");
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}
}  // namespace

TokenStream normalize(std::string_view text) {
    auto decoded = lossy_utf8(text);
    TokenStream ts;
    std::size_t i = 0;
    while (i < decoded.size()) {
        while (i < decoded.size() && is_space(decoded[i])) ++i;
        std::size_t start = i;
        while (i < decoded.size() && !is_space(decoded[i])) ++i;
        if (i > start) ts.tokens.emplace_back(decoded, start, i - start);
    }
    return ts;
}

std::optional<double> parse_real(std::string_view token) {
    if (token.empty()) return std::nullopt;
    double v = 0;
    auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v, std::chars_format::general);
    if (ec != std::errc{} || p != token.data() + token.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

CheckVerdict compare(const TokenStream& expected, const TokenStream& actual, const CheckerPolicy& policy) {
    const bool numeric = policy.kind == CheckerKind::numeric_token;
    if (policy.kind != CheckerKind::token && !numeric)
        return {CheckOutcome::checker_error, "compare called with non-token policy " + std::string(to_string(policy.kind))};
    const double eps = numeric ? policy.numeric_epsilon.value_or(0.0) : 0.0;
    if (numeric && !(eps >= 0.0)) return {CheckOutcome::checker_error, "numeric_epsilon must be >= 0"};

    const auto& e = expected.tokens;
    const auto& a = actual.tokens;
    const std::size_t n = std::max(e.size(), a.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (i >= e.size() || i >= a.size()) {
            return {CheckOutcome::wrong_output,
                    "token " + std::to_string(i + 1) + ": expected " + show_token(e, i) + ", got " + show_token(a, i)};
        }
        if (e[i] == a[i]) continue;
        if (numeric) {
            auto x = parse_real(e[i]);
            auto y = parse_real(a[i]);
            if (x && y) {
                double diff = std::fabs(*x - *y);
                if (diff <= eps) continue;
                return {CheckOutcome::wrong_output, "token " + std::to_string(i + 1) + ": expected " + show(e[i]) +
                                                        ", got " + show(a[i]) + " (difference " + format_number(diff) +
                                                        " exceeds epsilon " + format_number(eps) + ")"};
            }
        }
        return {CheckOutcome::wrong_output,
                "token " + std::to_string(i + 1) + ": expected " + show(e[i]) + ", got " + show(a[i])};
    }
    return {CheckOutcome::pass, ""};
}

CheckVerdict compare_exact(std::string_view expected, std::string_view actual) {
    if (expected == actual) return {CheckOutcome::pass, ""};
    std::size_t i = 0;
    std::size_t line = 1;
    while (i < expected.size() && i < actual.size() && expected[i] == actual[i]) {
        if (expected[i] == '\n') ++line;
        ++i;
    }
    auto describe = [](std::string_view s, std::size_t at) -> std::string {
        if (at >= s.size()) return "end of output";
        unsigned char c = static_cast<unsigned char>(s[at]);
        char buf[16];
        if (c == '\n') return "'\\n'";
        if (c == '\r') return "'\\r'";
        if (c == '\t') return "'\\t'";
        if (c < 0x20 || c >= 0x7f) {
            std::snprintf(buf, sizeof buf, "byte 0x%02x", c);
            return buf;
        }
        return std::string("'") + static_cast<char>(c) + "'";
    };
    return {CheckOutcome::wrong_output, "byte " + std::to_string(i + 1) + " (line " + std::to_string(line) +
                                            "): expected " + describe(expected, i) + ", got " + describe(actual, i)};
}

CheckVerdict check_output(std::string_view expected, std::string_view actual, const CheckerPolicy& policy) {
    switch (policy.kind) {
        case CheckerKind::exact: return compare_exact(expected, actual);
        case CheckerKind::token:
        case CheckerKind::numeric_token: return compare(normalize(expected), normalize(actual), policy);
        case CheckerKind::custom: break;
    }
    return {CheckOutcome::checker_error, "custom checker requires run_custom_checker"};
}

CheckVerdict run_custom_checker(const CustomCheckInput& in, const CheckerPolicy& policy, const SandboxPolicy& sandbox,
                                SandboxBackend& backend) {
    SandboxPolicy sp = sandbox;
    sp.network_allowed = false;
    sp.cpu_time_limit = policy.checker_time_limit;
    sp.wall_time_limit = policy.checker_time_limit;

    ExecutionOutcome out;
    try {
        SandboxGuard box(backend.prepare(sp));
        box->put_file("checker", in.checker_program, true);
        box->put_file("input", in.input);
        box->put_file("expected", in.expected);
        box->put_file("actual", in.actual);
        out = box->execute({"./checker", "input", "expected", "actual"});
    } catch (const std::exception& e) {
        return {CheckOutcome::checker_error, std::string("checker sandbox failed: ") + e.what()};
    }

    auto message = lossy_utf8(std::string_view(out.stdout_data).substr(0, kCheckerMessageLimit));
    // A cut in the middle of a multi-byte sequence leaves one replacement char; drop it.
    if (out.stdout_data.size() > kCheckerMessageLimit && message.ends_with("\xEF\xBF\xBD"))
        message.resize(message.size() - 3);
    while (!message.empty() && is_space(message.back())) message.pop_back();

    switch (out.termination) {
        case Termination::cpu_limit:
        case Termination::wall_limit: return {CheckOutcome::checker_error, "checker timed out"};
        case Termination::memory_limit: return {CheckOutcome::checker_error, "checker exceeded its memory limit"};
        case Termination::sandbox_failure: return {CheckOutcome::checker_error, "checker sandbox failed: " + out.failure_reason};
        case Termination::output_limit:
        case Termination::exited: break;
    }
    if (out.signal != 0) return {CheckOutcome::checker_error, "checker crashed (signal " + std::to_string(out.signal) + ")"};
    if (out.exit_code == 0) return {CheckOutcome::pass, message};
    if (out.exit_code == 1) {
        if (message.empty()) message = "rejected by checker";
        return {CheckOutcome::wrong_output, message};
    }
    auto diag = "checker exited with status " + std::to_string(out.exit_code);
    if (!message.empty()) diag += ": " + message;
    return {CheckOutcome::checker_error, diag};
}

}  // namespace sae
