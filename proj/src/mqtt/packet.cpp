#include "tmtcg/mqtt/packet.hpp"

#include <array>
#include <sstream>

namespace tmtcg::mqtt {

namespace {

constexpr std::array<std::string_view, 15> kTypeNames = {
    "Reserved", "CONNECT", "CONNACK", "PUBLISH", "PUBACK", "PUBREC", "PUBREL", "PUBCOMP",
    "SUBSCRIBE", "SUBACK", "UNSUBSCRIBE", "UNSUBACK", "PINGREQ", "PINGRESP", "DISCONNECT",
};

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string_view to_string(PacketType type) {
    const auto i = static_cast<std::size_t>(type);
    return i < kTypeNames.size() ? kTypeNames[i] : "Reserved";
}

std::optional<PacketType> parse_packet_type(std::string_view name) {
    for (std::size_t i = 1; i < kTypeNames.size(); ++i) {
        if (kTypeNames[i] == name) return static_cast<PacketType>(i);
    }
    return std::nullopt;
}

PacketType type_of(const Packet& p) {
    return std::visit(Overloaded{
                          [](const Connect&) { return PacketType::Connect; },
                          [](const ConnAck&) { return PacketType::ConnAck; },
                          [](const Publish&) { return PacketType::Publish; },
                          [](const PubAck&) { return PacketType::PubAck; },
                          [](const Subscribe&) { return PacketType::Subscribe; },
                          [](const SubAck&) { return PacketType::SubAck; },
                          [](const Unsubscribe&) { return PacketType::Unsubscribe; },
                          [](const UnsubAck&) { return PacketType::UnsubAck; },
                          [](const PingReq&) { return PacketType::PingReq; },
                          [](const PingResp&) { return PacketType::PingResp; },
                          [](const Disconnect&) { return PacketType::Disconnect; },
                      },
                      p);
}

std::string describe(const Packet& p) {
    std::ostringstream out;
    out << to_string(type_of(p));
    std::visit(Overloaded{
                   [&](const Connect& c) {
                       out << "(id=" << c.client_id << ", clean=" << c.clean_session << ", keepalive=" << c.keep_alive_s
                           << (c.username ? ", user" : "") << (c.password ? ", pass" : "") << ")";
                   },
                   [&](const ConnAck& a) {
                       out << "(sp=" << a.session_present << ", rc=" << int(a.return_code) << ")";
                   },
                   [&](const Publish& m) {
                       out << "(topic=" << m.topic << ", qos=" << int(m.qos) << ", " << m.payload.size() << "B";
                       if (m.packet_id) out << ", pid=" << *m.packet_id;
                       out << ")";
                   },
                   [&](const PubAck& a) { out << "(pid=" << a.packet_id << ")"; },
                   [&](const Subscribe& s) {
                       out << "(pid=" << s.packet_id;
                       for (const auto& sub : s.subscriptions) out << ", " << sub.filter << "@" << int(sub.qos);
                       out << ")";
                   },
                   [&](const SubAck& s) {
                       out << "(pid=" << s.packet_id;
                       for (auto rc : s.return_codes) out << ", " << int(rc);
                       out << ")";
                   },
                   [&](const Unsubscribe& u) {
                       out << "(pid=" << u.packet_id;
                       for (const auto& f : u.filters) out << ", " << f;
                       out << ")";
                   },
                   [&](const UnsubAck& a) { out << "(pid=" << a.packet_id << ")"; },
                   [](const auto&) {},
               },
               p);
    return out.str();
}

}  // namespace tmtcg::mqtt
