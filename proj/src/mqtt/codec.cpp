#include "tmtcg/mqtt/codec.hpp"

#include <algorithm>
#include <sstream>

#include "tmtcg/mqtt/topic.hpp"

namespace tmtcg::mqtt {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::string_view kProtocolName = "MQTT";

// Connect flag bits.
constexpr std::uint8_t kFlagUsername = 0x80;
constexpr std::uint8_t kFlagPassword = 0x40;
constexpr std::uint8_t kFlagWillRetain = 0x20;
constexpr std::uint8_t kFlagWillQos = 0x18;
constexpr std::uint8_t kFlagWill = 0x04;
constexpr std::uint8_t kFlagClean = 0x02;
constexpr std::uint8_t kFlagReserved = 0x01;

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_binary(Bytes& out, ByteView data, const char* field) {
    if (data.size() > 0xFFFF) throw EncodeError(field, "longer than 65535 bytes");
    put_u16(out, static_cast<std::uint16_t>(data.size()));
    out.insert(out.end(), data.begin(), data.end());
}

void put_string(Bytes& out, std::string_view s, const char* field) {
    if (!valid_mqtt_string(s)) throw EncodeError(field, "not a valid MQTT UTF-8 string");
    put_binary(out, ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), field);
}

void require_packet_id(std::uint16_t id, const char* field) {
    if (id == 0) throw EncodeError(field, "packet identifier must be non-zero");
}

Bytes frame(std::uint8_t first_byte, const Bytes& body) {
    if (body.size() > kMaxRemainingLength) throw EncodeError("remaining_length", "packet too large");
    Bytes out;
    out.reserve(body.size() + 5);
    out.push_back(first_byte);
    append_remaining_length(static_cast<std::uint32_t>(body.size()), out);
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

Bytes encode_body(const Connect& c, std::uint8_t& first) {
    first = 0x10;
    if (c.password && !c.username) throw EncodeError("Connect.password", "password requires a username");
    Bytes body;
    put_string(body, kProtocolName, "Connect.protocol_name");
    body.push_back(kProtocolLevel);
    std::uint8_t flags = 0;
    if (c.username) flags |= kFlagUsername;
    if (c.password) flags |= kFlagPassword;
    if (c.clean_session) flags |= kFlagClean;
    body.push_back(flags);
    put_u16(body, c.keep_alive_s);
    put_string(body, c.client_id, "Connect.client_id");
    if (c.username) put_string(body, *c.username, "Connect.username");
    if (c.password) put_binary(body, *c.password, "Connect.password");
    return body;
}

Bytes encode_body(const ConnAck& a, std::uint8_t& first) {
    first = 0x20;
    if (a.return_code > connack::kNotAuthorized) throw EncodeError("ConnAck.return_code", "must be in 0..5");
    if (a.return_code != connack::kAccepted && a.session_present) {
        throw EncodeError("ConnAck.session_present", "must be 0 when the return code is non-zero");
    }
    return Bytes{static_cast<std::uint8_t>(a.session_present ? 1 : 0), a.return_code};
}

Bytes encode_body(const Publish& m, std::uint8_t& first) {
    if (m.qos > 1) throw EncodeError("Publish.qos", "only QoS 0 and 1 are supported");
    if (m.qos == 0 && m.dup) throw EncodeError("Publish.dup", "must be 0 for QoS 0");
    if (m.qos == 1 && !m.packet_id) throw EncodeError("Publish.packet_id", "required for QoS 1");
    if (m.qos == 0 && m.packet_id) throw EncodeError("Publish.packet_id", "must be absent for QoS 0");
    if (!valid_topic_name(m.topic)) throw EncodeError("Publish.topic", "empty, wildcard or invalid topic name");
    first = static_cast<std::uint8_t>(0x30 | (m.dup ? 0x08 : 0) | (m.qos << 1) | (m.retain ? 0x01 : 0));
    Bytes body;
    put_string(body, m.topic, "Publish.topic");
    if (m.packet_id) {
        require_packet_id(*m.packet_id, "Publish.packet_id");
        put_u16(body, *m.packet_id);
    }
    body.insert(body.end(), m.payload.begin(), m.payload.end());
    return body;
}

Bytes encode_id_only(std::uint16_t id, const char* field) {
    require_packet_id(id, field);
    Bytes body;
    put_u16(body, id);
    return body;
}

Bytes encode_body(const PubAck& a, std::uint8_t& first) {
    first = 0x40;
    return encode_id_only(a.packet_id, "PubAck.packet_id");
}

Bytes encode_body(const Subscribe& s, std::uint8_t& first) {
    first = 0x82;
    require_packet_id(s.packet_id, "Subscribe.packet_id");
    if (s.subscriptions.empty()) throw EncodeError("Subscribe.subscriptions", "at least one subscription required");
    Bytes body;
    put_u16(body, s.packet_id);
    for (const auto& sub : s.subscriptions) {
        if (!valid_topic_filter(sub.filter)) throw EncodeError("Subscribe.filter", "invalid topic filter");
        if (sub.qos > 1) throw EncodeError("Subscribe.qos", "only QoS 0 and 1 are supported");
        put_string(body, sub.filter, "Subscribe.filter");
        body.push_back(sub.qos);
    }
    return body;
}

Bytes encode_body(const SubAck& s, std::uint8_t& first) {
    first = 0x90;
    require_packet_id(s.packet_id, "SubAck.packet_id");
    if (s.return_codes.empty()) throw EncodeError("SubAck.return_codes", "at least one return code required");
    Bytes body;
    put_u16(body, s.packet_id);
    for (auto rc : s.return_codes) {
        if (rc != 0 && rc != 1 && rc != kSubAckFailure) throw EncodeError("SubAck.return_codes", "must be 0, 1 or 0x80");
        body.push_back(rc);
    }
    return body;
}

Bytes encode_body(const Unsubscribe& u, std::uint8_t& first) {
    first = 0xA2;
    require_packet_id(u.packet_id, "Unsubscribe.packet_id");
    if (u.filters.empty()) throw EncodeError("Unsubscribe.filters", "at least one filter required");
    Bytes body;
    put_u16(body, u.packet_id);
    for (const auto& f : u.filters) {
        if (!valid_topic_filter(f)) throw EncodeError("Unsubscribe.filters", "invalid topic filter");
        put_string(body, f, "Unsubscribe.filters");
    }
    return body;
}

Bytes encode_body(const UnsubAck& a, std::uint8_t& first) {
    first = 0xB0;
    return encode_id_only(a.packet_id, "UnsubAck.packet_id");
}

Bytes encode_body(const PingReq&, std::uint8_t& first) {
    first = 0xC0;
    return {};
}
Bytes encode_body(const PingResp&, std::uint8_t& first) {
    first = 0xD0;
    return {};
}
Bytes encode_body(const Disconnect&, std::uint8_t& first) {
    first = 0xE0;
    return {};
}

// Bounded reader over one frame body; offsets are reported relative to the
// start of the whole buffer.
class BodyReader {
public:
    BodyReader(ByteView body, std::size_t base) : body_(body), base_(base) {}

    std::size_t offset() const { return base_ + pos_; }
    std::size_t remaining() const { return body_.size() - pos_; }
    bool done() const { return pos_ == body_.size(); }

    std::optional<DecodeError> u8(std::uint8_t& v, std::string_view what) {
        if (remaining() < 1) return short_read(what);
        v = body_[pos_++];
        return std::nullopt;
    }

    std::optional<DecodeError> u16(std::uint16_t& v, std::string_view what) {
        if (remaining() < 2) return short_read(what);
        v = static_cast<std::uint16_t>((body_[pos_] << 8) | body_[pos_ + 1]);
        pos_ += 2;
        return std::nullopt;
    }

    std::optional<DecodeError> binary(Bytes& v, std::string_view what) {
        std::uint16_t len = 0;
        if (auto err = u16(len, what)) return err;
        if (remaining() < len) {
            return DecodeError{offset(), std::string(what) + ": declared length " + std::to_string(len) +
                                             " exceeds remaining " + std::to_string(remaining()) + " byte(s)"};
        }
        v.assign(body_.begin() + static_cast<std::ptrdiff_t>(pos_),
                 body_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
        pos_ += len;
        return std::nullopt;
    }

    std::optional<DecodeError> string(std::string& v, std::string_view what) {
        const auto start = offset();
        Bytes raw;
        if (auto err = binary(raw, what)) return err;
        v.assign(raw.begin(), raw.end());
        if (!valid_mqtt_string(v)) return DecodeError{start, std::string(what) + ": invalid UTF-8 string"};
        return std::nullopt;
    }

    Bytes rest() {
        Bytes out(body_.begin() + static_cast<std::ptrdiff_t>(pos_), body_.end());
        pos_ = body_.size();
        return out;
    }

    DecodeError error(std::string reason) const { return DecodeError{offset(), std::move(reason)}; }

private:
    DecodeError short_read(std::string_view what) const {
        return DecodeError{offset(), std::string(what) + ": body ends early"};
    }

    ByteView body_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

using BodyResult = std::variant<Packet, DecodeError>;

#define TMTCG_TRY(expr)                   \
    do {                                  \
        if (auto err_ = (expr)) return *err_; \
    } while (false)

BodyResult decode_connect(BodyReader& r) {
    std::string protocol;
    TMTCG_TRY(r.string(protocol, "CONNECT protocol name"));
    if (protocol != kProtocolName) return r.error("CONNECT protocol name is \"" + protocol + "\", expected MQTT");
    std::uint8_t level = 0;
    TMTCG_TRY(r.u8(level, "CONNECT protocol level"));
    if (level != kProtocolLevel) return r.error("unsupported protocol level " + std::to_string(level));
    std::uint8_t flags = 0;
    TMTCG_TRY(r.u8(flags, "CONNECT flags"));
    if (flags & kFlagReserved) return r.error("CONNECT reserved flag set");
    if (flags & kFlagWill) return r.error("CONNECT will messages are not supported");
    if (flags & (kFlagWillQos | kFlagWillRetain)) return r.error("CONNECT will QoS/retain set without will flag");
    if ((flags & kFlagPassword) && !(flags & kFlagUsername)) return r.error("CONNECT password flag without username");

    Connect c;
    c.clean_session = (flags & kFlagClean) != 0;
    TMTCG_TRY(r.u16(c.keep_alive_s, "CONNECT keep alive"));
    TMTCG_TRY(r.string(c.client_id, "CONNECT client id"));
    if (flags & kFlagUsername) {
        std::string user;
        TMTCG_TRY(r.string(user, "CONNECT username"));
        c.username = std::move(user);
    }
    if (flags & kFlagPassword) {
        Bytes pass;
        TMTCG_TRY(r.binary(pass, "CONNECT password"));
        c.password = std::move(pass);
    }
    if (!r.done()) return r.error("CONNECT has " + std::to_string(r.remaining()) + " trailing byte(s)");
    return c;
}

BodyResult decode_connack(BodyReader& r) {
    if (r.remaining() != 2) return r.error("CONNACK remaining length must be 2");
    std::uint8_t ack_flags = 0;
    std::uint8_t rc = 0;
    TMTCG_TRY(r.u8(ack_flags, "CONNACK flags"));
    TMTCG_TRY(r.u8(rc, "CONNACK return code"));
    if (ack_flags & 0xFE) return r.error("CONNACK reserved flag bits set");
    if (rc > connack::kNotAuthorized) return r.error("CONNACK return code " + std::to_string(rc) + " out of range");
    if (rc != 0 && (ack_flags & 1)) return r.error("CONNACK session present with non-zero return code");
    return ConnAck{(ack_flags & 1) != 0, rc};
}

BodyResult decode_publish(BodyReader& r, std::uint8_t flags) {
    Publish m;
    m.dup = (flags & 0x08) != 0;
    m.qos = static_cast<std::uint8_t>((flags >> 1) & 0x03);
    m.retain = (flags & 0x01) != 0;
    if (m.qos == 3) return DecodeError{0, "PUBLISH QoS 3 is malformed"};
    if (m.qos == 2) return DecodeError{0, "PUBLISH QoS 2 is not supported"};
    if (m.qos == 0 && m.dup) return DecodeError{0, "PUBLISH DUP set on QoS 0"};
    const auto topic_at = r.offset();
    TMTCG_TRY(r.string(m.topic, "PUBLISH topic"));
    if (!valid_topic_name(m.topic)) return DecodeError{topic_at, "PUBLISH topic \"" + m.topic + "\" is invalid"};
    if (m.qos == 1) {
        std::uint16_t id = 0;
        TMTCG_TRY(r.u16(id, "PUBLISH packet id"));
        if (id == 0) return r.error("PUBLISH packet id is 0");
        m.packet_id = id;
    }
    m.payload = r.rest();
    return m;
}

template <class P>
BodyResult decode_id_only(BodyReader& r, std::string_view name) {
    if (r.remaining() != 2) return r.error(std::string(name) + " remaining length must be 2");
    std::uint16_t id = 0;
    TMTCG_TRY(r.u16(id, name));
    if (id == 0) return r.error(std::string(name) + " packet id is 0");
    return P{id};
}

BodyResult decode_subscribe(BodyReader& r) {
    Subscribe s;
    TMTCG_TRY(r.u16(s.packet_id, "SUBSCRIBE packet id"));
    if (s.packet_id == 0) return r.error("SUBSCRIBE packet id is 0");
    while (!r.done()) {
        Subscription sub;
        const auto at = r.offset();
        TMTCG_TRY(r.string(sub.filter, "SUBSCRIBE topic filter"));
        if (!valid_topic_filter(sub.filter)) return DecodeError{at, "SUBSCRIBE filter \"" + sub.filter + "\" is invalid"};
        TMTCG_TRY(r.u8(sub.qos, "SUBSCRIBE requested QoS"));
        if (sub.qos & 0xFC) return r.error("SUBSCRIBE reserved QoS bits set");
        if (sub.qos > 1) return r.error("SUBSCRIBE QoS 2 is not supported");
        s.subscriptions.push_back(std::move(sub));
    }
    if (s.subscriptions.empty()) return r.error("SUBSCRIBE without topic filters");
    return s;
}

BodyResult decode_suback(BodyReader& r) {
    SubAck s;
    TMTCG_TRY(r.u16(s.packet_id, "SUBACK packet id"));
    if (s.packet_id == 0) return r.error("SUBACK packet id is 0");
    while (!r.done()) {
        std::uint8_t rc = 0;
        TMTCG_TRY(r.u8(rc, "SUBACK return code"));
        if (rc != 0 && rc != 1 && rc != kSubAckFailure) {
            return r.error("SUBACK return code " + std::to_string(rc) + " not supported");
        }
        s.return_codes.push_back(rc);
    }
    if (s.return_codes.empty()) return r.error("SUBACK without return codes");
    return s;
}

BodyResult decode_unsubscribe(BodyReader& r) {
    Unsubscribe u;
    TMTCG_TRY(r.u16(u.packet_id, "UNSUBSCRIBE packet id"));
    if (u.packet_id == 0) return r.error("UNSUBSCRIBE packet id is 0");
    while (!r.done()) {
        std::string f;
        const auto at = r.offset();
        TMTCG_TRY(r.string(f, "UNSUBSCRIBE topic filter"));
        if (!valid_topic_filter(f)) return DecodeError{at, "UNSUBSCRIBE filter \"" + f + "\" is invalid"};
        u.filters.push_back(std::move(f));
    }
    if (u.filters.empty()) return r.error("UNSUBSCRIBE without topic filters");
    return u;
}

template <class P>
BodyResult decode_empty(BodyReader& r, std::string_view name) {
    if (!r.done()) return r.error(std::string(name) + " remaining length must be 0");
    return P{};
}

#undef TMTCG_TRY

// Fixed-header flag nibble each type requires; -1 = type-specific (PUBLISH).
int required_flags(PacketType t) {
    switch (t) {
        case PacketType::Publish: return -1;
        case PacketType::PubRel:
        case PacketType::Subscribe:
        case PacketType::Unsubscribe: return 0x02;
        default: return 0x00;
    }
}

}  // namespace

void append_remaining_length(std::uint32_t value, Bytes& out) {
    if (value > kMaxRemainingLength) throw EncodeError("remaining_length", "exceeds 268435455");
    do {
        std::uint8_t b = value % 128;
        value /= 128;
        if (value > 0) b |= 0x80;
        out.push_back(b);
    } while (value > 0);
}

Bytes encode(const Packet& p) {
    std::uint8_t first = 0;
    Bytes body = std::visit([&](const auto& pkt) { return encode_body(pkt, first); }, p);
    return frame(first, body);
}

HeaderResult decode_fixed_header(ByteView buf) {
    if (buf.empty()) return NeedMoreData{};
    FixedHeader h;
    h.first_byte = buf[0];
    std::uint32_t value = 0;
    std::uint32_t multiplier = 1;
    for (std::size_t i = 0;; ++i) {
        if (i == kMaxVarintBytes) {
            return DecodeError{1 + kMaxVarintBytes - 1, "remaining length varint longer than 4 bytes"};
        }
        if (1 + i >= buf.size()) return NeedMoreData{};
        const std::uint8_t b = buf[1 + i];
        value += static_cast<std::uint32_t>(b & 0x7F) * multiplier;
        multiplier *= 128;
        if ((b & 0x80) == 0) {
            h.header_size = 2 + i;
            break;
        }
    }
    h.remaining_length = value;

    const auto type = h.first_byte >> 4;
    const auto flags = h.first_byte & 0x0F;
    if (type == 0 || type == 15) return DecodeError{0, "reserved packet type " + std::to_string(type)};
    const auto ptype = static_cast<PacketType>(type);
    if (const int want = required_flags(ptype); want >= 0 && flags != want) {
        return DecodeError{0, std::string(to_string(ptype)) + " fixed header flags must be " + std::to_string(want)};
    }
    return h;
}

DecodeResult decode(ByteView buf) {
    auto header = decode_fixed_header(buf);
    if (auto* more = std::get_if<NeedMoreData>(&header)) return *more;
    if (auto* err = std::get_if<DecodeError>(&header)) return *err;
    const auto h = std::get<FixedHeader>(header);
    const auto type = static_cast<PacketType>(h.first_byte >> 4);

    if (type == PacketType::PubRec || type == PacketType::PubRel || type == PacketType::PubComp) {
        return DecodeError{0, std::string(to_string(type)) + " (QoS 2 flow) is not supported"};
    }
    if (buf.size() < h.frame_size()) return NeedMoreData{};

    BodyReader r(buf.subspan(h.header_size, h.remaining_length), h.header_size);
    BodyResult body = [&]() -> BodyResult {
        switch (type) {
            case PacketType::Connect: return decode_connect(r);
            case PacketType::ConnAck: return decode_connack(r);
            case PacketType::Publish: return decode_publish(r, h.first_byte & 0x0F);
            case PacketType::PubAck: return decode_id_only<PubAck>(r, "PUBACK");
            case PacketType::Subscribe: return decode_subscribe(r);
            case PacketType::SubAck: return decode_suback(r);
            case PacketType::Unsubscribe: return decode_unsubscribe(r);
            case PacketType::UnsubAck: return decode_id_only<UnsubAck>(r, "UNSUBACK");
            case PacketType::PingReq: return decode_empty<PingReq>(r, "PINGREQ");
            case PacketType::PingResp: return decode_empty<PingResp>(r, "PINGRESP");
            case PacketType::Disconnect: return decode_empty<Disconnect>(r, "DISCONNECT");
            default: return DecodeError{0, "unsupported packet type"};
        }
    }();
    if (auto* err = std::get_if<DecodeError>(&body)) return *err;
    return Decoded{std::get<Packet>(std::move(body)), h.frame_size()};
}

Bytes encode_malformed(const MalformationSpec& spec) {
    return std::visit(
        Overloaded{
            [](const TruncatedFrame& t) {
                Bytes full = encode(t.base);
                const std::size_t keep = std::clamp<std::size_t>(t.keep, 1, full.size() - 1);
                full.resize(keep);
                return full;
            },
            [](const BadRemainingLength& b) {
                const Bytes full = encode(b.base);
                auto header = std::get<FixedHeader>(decode_fixed_header(full));
                const long long declared = static_cast<long long>(header.remaining_length) + b.delta;
                const auto clamped = static_cast<std::uint32_t>(
                    std::clamp<long long>(declared, 0, static_cast<long long>(kMaxRemainingLength)));
                Bytes out{header.first_byte};
                append_remaining_length(clamped, out);
                out.insert(out.end(), full.begin() + static_cast<std::ptrdiff_t>(header.header_size), full.end());
                return out;
            },
            [](const ReservedType& r) { return Bytes{r.byte1, 0x00}; },
            [](const OversizedClientId& o) {
                const std::size_t actual = std::max<std::size_t>(o.length, 0x10000);
                const auto declared = static_cast<std::uint16_t>(std::min<std::size_t>(o.length, 0xFFFF));
                Bytes body;
                put_string(body, kProtocolName, "Connect.protocol_name");
                body.push_back(kProtocolLevel);
                body.push_back(kFlagClean);
                put_u16(body, 60);
                put_u16(body, declared);
                body.insert(body.end(), actual, static_cast<std::uint8_t>('A'));
                return frame(0x10, body);
            },
        },
        spec);
}

std::string describe(const MalformationSpec& spec) {
    std::ostringstream out;
    std::visit(Overloaded{
                   [&](const TruncatedFrame& t) {
                       out << "TruncatedFrame(" << to_string(type_of(t.base)) << ", keep=" << t.keep << ")";
                   },
                   [&](const BadRemainingLength& b) {
                       out << "BadRemainingLength(" << to_string(type_of(b.base)) << ", delta=" << b.delta << ")";
                   },
                   [&](const ReservedType& r) { out << "ReservedType(0x" << to_hex(Bytes{r.byte1}) << ")"; },
                   [&](const OversizedClientId& o) { out << "OversizedClientId(" << o.length << ")"; },
               },
               spec);
    return out.str();
}

}  // namespace tmtcg::mqtt
