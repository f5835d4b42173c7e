#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace swarm {

/// `bytes` random bytes from a process-wide CSPRNG-seeded generator, hex encoded.
std::string random_hex(std::size_t bytes);

/// 64-bit FNV-1a; stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

} // namespace swarm
