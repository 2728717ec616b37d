#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>

#include "tmtcg/bytes.hpp"
#include "tmtcg/mqtt/packet.hpp"

namespace tmtcg::mqtt {

inline constexpr std::uint32_t kMaxRemainingLength = 268'435'455;
inline constexpr std::size_t kMaxVarintBytes = 4;
inline constexpr std::uint8_t kProtocolLevel = 4;  // 3.1.1

/// Packet that violates its own invariants; names the offending field.
class EncodeError : public std::invalid_argument {
public:
    EncodeError(std::string field, const std::string& reason)
        : std::invalid_argument(field + ": " + reason), field_(std::move(field)) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Canonical MQTT 3.1.1 frame for `p`. Throws EncodeError.
Bytes encode(const Packet& p);

/// Throws EncodeError when value > kMaxRemainingLength.
void append_remaining_length(std::uint32_t value, Bytes& out);

struct Decoded {
    Packet packet;
    std::size_t consumed = 0;

    bool operator==(const Decoded&) const = default;
};

struct NeedMoreData {
    bool operator==(const NeedMoreData&) const = default;
};

struct DecodeError {
    std::size_t offset = 0;
    std::string reason;

    bool operator==(const DecodeError&) const = default;
};

using DecodeResult = std::variant<Decoded, NeedMoreData, DecodeError>;

struct FixedHeader {
    std::uint8_t first_byte = 0;
    std::uint32_t remaining_length = 0;
    std::size_t header_size = 0;  // 1 + varint bytes

    std::size_t frame_size() const { return header_size + remaining_length; }
};

using HeaderResult = std::variant<FixedHeader, NeedMoreData, DecodeError>;

/// Decodes the first byte and the remaining-length varint only.
HeaderResult decode_fixed_header(ByteView buf);

/// Decodes the first complete frame in `buf`. Never reads past the declared
/// frame length; a strict prefix of a valid frame yields NeedMoreData.
DecodeResult decode(ByteView buf);

// Deliberately invalid frames for attack patterns.

/// First `keep` bytes of encode(base), clamped to a strict non-empty prefix.
/// On a stream the receiver waits for bytes that never come.
struct TruncatedFrame {
    Packet base;
    std::size_t keep = 1;

    bool operator==(const TruncatedFrame&) const = default;
};

/// encode(base) with the declared remaining length shifted by `delta` while
/// the body is left untouched. delta must be non-zero.
struct BadRemainingLength {
    Packet base;
    int delta = 1;

    bool operator==(const BadRemainingLength&) const = default;
};

/// [byte1, 0x00]; byte1 is meant to carry packet type 0 or 15 or flag bits
/// that the packet type forbids.
struct ReservedType {
    std::uint8_t byte1 = 0x00;

    bool operator==(const ReservedType&) const = default;
};

/// CONNECT carrying max(length, 65536) client id bytes behind a 16-bit length
/// field clamped to min(length, 65535): the declared and actual lengths
/// never agree.
struct OversizedClientId {
    std::size_t length = 70'000;

    bool operator==(const OversizedClientId&) const = default;
};

using MalformationSpec = std::variant<TruncatedFrame, BadRemainingLength, ReservedType, OversizedClientId>;

Bytes encode_malformed(const MalformationSpec& spec);
std::string describe(const MalformationSpec& spec);

}  // namespace tmtcg::mqtt
