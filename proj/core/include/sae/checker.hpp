#pragma once

// Per-test-case output checking: built-in comparison policies and the
// custom-checker protocol.
//
// Custom checker protocol: the program is run inside a sandbox with
// networking disabled as `./checker <input> <expected> <actual>`. Exit 0 means
// pass, exit 1 means wrong output; the first 4 KiB of its standard output
// become the verdict message. Any other exit status, a timeout or a crash is
// a checker_error.

#include "sae/model.hpp"
#include "sae/sandbox.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace sae {

struct TokenStream {
    std::vector<std::string> tokens;

    friend bool operator==(const TokenStream&, const TokenStream&) = default;
};

enum class CheckOutcome { pass, wrong_output, checker_error };

struct CheckVerdict {
    CheckOutcome outcome = CheckOutcome::pass;
    std::string message;

    friend bool operator==(const CheckVerdict&, const CheckVerdict&) = default;
};

inline constexpr std::size_t kCheckerMessageLimit = 4096;

/// Replaces invalid UTF-8 sequences with U+FFFD.
std::string lossy_utf8(std::string_view bytes);

/// Splits on runs of ASCII whitespace after lossy UTF-8 decoding.
TokenStream normalize(std::string_view text);

/// Token or numeric-token comparison. `policy.kind` must be token or
/// numeric_token; anything else yields checker_error.
CheckVerdict compare(const TokenStream& expected, const TokenStream& actual, const CheckerPolicy& policy);

/// Byte-exact comparison used by the exact policy.
CheckVerdict compare_exact(std::string_view expected, std::string_view actual);

/// Dispatches on policy.kind for the built-in kinds.
CheckVerdict check_output(std::string_view expected, std::string_view actual, const CheckerPolicy& policy);

/// Strict real-number parse used by numeric_token: the whole token must be
/// consumed and the value must be finite.
std::optional<double> parse_real(std::string_view token);

struct CustomCheckInput {
    std::string_view checker_program;
    std::string_view input;
    std::string_view expected;
    std::string_view actual;
};

/// Runs a teacher-supplied checker. Networking is always disabled and the
/// CPU and wall limits are policy.checker_time_limit regardless of `sandbox`.
CheckVerdict run_custom_checker(const CustomCheckInput& in, const CheckerPolicy& policy, const SandboxPolicy& sandbox,
                                SandboxBackend& backend);

}  // namespace sae
