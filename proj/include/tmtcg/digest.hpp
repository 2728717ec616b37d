#pragma once

#include <string>
#include <string_view>

#include "tmtcg/bytes.hpp"

namespace tmtcg {

/// SHA-256 of the input as 64 lowercase hex characters.
std::string sha256_hex(ByteView data);
std::string sha256_hex(std::string_view data);

}  // namespace tmtcg
