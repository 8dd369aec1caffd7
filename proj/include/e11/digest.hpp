#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace e11 {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::string_view bytes);

std::string to_hex(const Sha256& digest);

// 64-bit mixer (splitmix64 finalizer); the seedable hash behind the stub
// embedding provider and other non-cryptographic keying.
std::uint64_t mix64(std::uint64_t x);

std::uint64_t hash_bytes64(std::string_view bytes, std::uint64_t seed);

}  // namespace e11
