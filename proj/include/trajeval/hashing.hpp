#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace trajeval {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// First 8 bytes of the SHA-256 digest, big-endian. Used to derive RNG seeds.
std::uint64_t sha256_u64(std::string_view data);

std::string base64_encode(std::string_view data);

}  // namespace trajeval
