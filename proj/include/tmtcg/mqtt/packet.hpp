#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tmtcg/bytes.hpp"

namespace tmtcg::mqtt {

/// Control packet types (upper nibble of the fixed header).
enum class PacketType : std::uint8_t {
    Connect = 1,
    ConnAck = 2,
    Publish = 3,
    PubAck = 4,
    PubRec = 5,
    PubRel = 6,
    PubComp = 7,
    Subscribe = 8,
    SubAck = 9,
    Unsubscribe = 10,
    UnsubAck = 11,
    PingReq = 12,
    PingResp = 13,
    Disconnect = 14,
};

std::string_view to_string(PacketType type);
std::optional<PacketType> parse_packet_type(std::string_view name);

namespace connack {
inline constexpr std::uint8_t kAccepted = 0;
inline constexpr std::uint8_t kUnacceptableProtocol = 1;
inline constexpr std::uint8_t kIdentifierRejected = 2;
inline constexpr std::uint8_t kServerUnavailable = 3;
inline constexpr std::uint8_t kBadCredentials = 4;
inline constexpr std::uint8_t kNotAuthorized = 5;
}  // namespace connack

inline constexpr std::uint8_t kSubAckFailure = 0x80;

struct Connect {
    std::string client_id;
    bool clean_session = true;
    std::uint16_t keep_alive_s = 60;
    std::optional<std::string> username;
    std::optional<Bytes> password;  // requires username

    bool operator==(const Connect&) const = default;
};

struct ConnAck {
    bool session_present = false;
    std::uint8_t return_code = connack::kAccepted;

    bool operator==(const ConnAck&) const = default;
};

struct Publish {
    std::string topic;
    Bytes payload;
    std::uint8_t qos = 0;
    bool dup = false;
    bool retain = false;
    std::optional<std::uint16_t> packet_id;  // present iff qos == 1

    bool operator==(const Publish&) const = default;
};

struct PubAck {
    std::uint16_t packet_id = 1;

    bool operator==(const PubAck&) const = default;
};

struct Subscription {
    std::string filter;
    std::uint8_t qos = 0;

    bool operator==(const Subscription&) const = default;
};

struct Subscribe {
    std::uint16_t packet_id = 1;
    std::vector<Subscription> subscriptions;

    bool operator==(const Subscribe&) const = default;
};

struct SubAck {
    std::uint16_t packet_id = 1;
    std::vector<std::uint8_t> return_codes;

    bool operator==(const SubAck&) const = default;
};

struct Unsubscribe {
    std::uint16_t packet_id = 1;
    std::vector<std::string> filters;

    bool operator==(const Unsubscribe&) const = default;
};

struct UnsubAck {
    std::uint16_t packet_id = 1;

    bool operator==(const UnsubAck&) const = default;
};

struct PingReq {
    bool operator==(const PingReq&) const = default;
};
struct PingResp {
    bool operator==(const PingResp&) const = default;
};
struct Disconnect {
    bool operator==(const Disconnect&) const = default;
};

using Packet = std::variant<Connect, ConnAck, Publish, PubAck, Subscribe, SubAck, Unsubscribe, UnsubAck, PingReq,
                            PingResp, Disconnect>;

PacketType type_of(const Packet& p);

/// Short human-readable rendering for logs and diagnostics.
std::string describe(const Packet& p);

}  // namespace tmtcg::mqtt
