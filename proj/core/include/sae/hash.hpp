#pragma once

#include <string>
#include <string_view>

namespace sae {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// `n` random bytes from the system CSPRNG, hex-encoded.
std::string random_hex(std::size_t n);

}  // namespace sae
