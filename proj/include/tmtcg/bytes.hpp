#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tmtcg {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Lowercase hex, two digits per byte.
std::string to_hex(ByteView bytes);

/// Inverse of to_hex; accepts upper or lower case. Returns nullopt on odd
/// length or a non-hex digit.
std::optional<Bytes> from_hex(std::string_view hex);

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

}  // namespace tmtcg
