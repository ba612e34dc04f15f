#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pclkit {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

std::uint64_t fnv1a64(std::string_view bytes);

std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based uniform draw in [0, 1) keyed by (seed, key). The value for
/// a key never depends on which other keys are drawn or in what order.
double keyed_uniform(std::uint64_t seed, std::string_view key);

}  // namespace pclkit
