#include "tmtcg/catalog.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

#include "tmtcg/mqtt/codec.hpp"

namespace tmtcg::catalog {

namespace {

using harness::Expectation;
using harness::Phase;
using mqtt::PacketType;

constexpr std::uint16_t kKeepAlives[] = {30, 60, 120};

std::string draw_from(Rng& rng, const std::vector<std::string>& pool) { return pool[rng.uniform(pool.size())]; }

std::string draw_payload_hex(Rng& rng) {
    Bytes payload(rng.uniform(kMaxPayload + 1));
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng.uniform(256));
    return to_hex(payload);
}

std::string draw_packet_id(Rng& rng) { return std::to_string(rng.between(1, 0xFFFF)); }

const std::string& need(const Params& p, const std::string& key) {
    auto it = p.find(key);
    if (it == p.end()) throw std::invalid_argument("missing parameter " + key);
    return it->second;
}

std::uint64_t need_uint(const Params& p, const std::string& key, std::uint64_t max) {
    const auto& s = need(p, key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || v > max) {
        throw std::invalid_argument("bad value for " + key + ": " + s);
    }
    return v;
}

bool need_bool(const Params& p, const std::string& key) {
    const auto& s = need(p, key);
    if (s == "true") return true;
    if (s == "false") return false;
    throw std::invalid_argument("bad value for " + key + ": " + s);
}

Bytes need_hex(const Params& p, const std::string& key) {
    auto bytes = from_hex(need(p, key));
    if (!bytes) throw std::invalid_argument("bad hex for " + key);
    return *bytes;
}

std::uint16_t need_packet_id(const Params& p) {
    const auto v = need_uint(p, "packet_id", 0xFFFF);
    if (v == 0) throw std::invalid_argument("packet_id must be non-zero");
    return static_cast<std::uint16_t>(v);
}

mqtt::Publish build_publish(const Params& p, std::uint8_t qos) {
    mqtt::Publish pub;
    pub.topic = need(p, "topic");
    pub.payload = need_hex(p, "payload");
    pub.qos = qos;
    if (qos == 1) pub.packet_id = need_packet_id(p);
    return pub;
}

std::vector<Command> make_commands() {
    std::vector<Command> out;

    out.push_back(Command{
        "connect",
        {{"client_id", "tcg- + 8 hex digits"}, {"clean_session", "true|false"}, {"keep_alive", "30|60|120"}},
        Expectation::reply(PacketType::ConnAck),
        Phase::Fresh,
        false,
        [](Rng& rng) {
            Params p;
            p["client_id"] = draw_client_id(rng);
            p["clean_session"] = rng.chance(0.5) ? "true" : "false";
            p["keep_alive"] = std::to_string(kKeepAlives[rng.uniform(3)]);
            return p;
        },
        [](const Params& p) -> mqtt::Packet {
            mqtt::Connect c;
            c.client_id = need(p, "client_id");
            c.clean_session = need_bool(p, "clean_session");
            c.keep_alive_s = static_cast<std::uint16_t>(need_uint(p, "keep_alive", 0xFFFF));
            if (auto it = p.find("username"); it != p.end()) c.username = it->second;
            if (auto it = p.find("password"); it != p.end()) c.password = to_bytes(it->second);
            return c;
        },
    });

    out.push_back(Command{
        "disconnect",
        {},
        Expectation::silence(true),
        Phase::MqttConnected,
        true,
        [](Rng&) { return Params{}; },
        [](const Params&) -> mqtt::Packet { return mqtt::Disconnect{}; },
    });

    out.push_back(Command{
        "publish_qos0",
        {{"topic", "topic pool"}, {"payload", "0-64 bytes, hex"}},
        Expectation::silence(),
        Phase::MqttConnected,
        false,
        [](Rng& rng) {
            Params p;
            p["topic"] = draw_from(rng, kTopicPool);
            p["payload"] = draw_payload_hex(rng);
            return p;
        },
        [](const Params& p) -> mqtt::Packet { return build_publish(p, 0); },
    });

    out.push_back(Command{
        "publish_qos1",
        {{"topic", "topic pool"}, {"payload", "0-64 bytes, hex"}, {"packet_id", "1-65535"}},
        Expectation::reply(PacketType::PubAck),
        Phase::MqttConnected,
        false,
        [](Rng& rng) {
            Params p;
            p["topic"] = draw_from(rng, kTopicPool);
            p["payload"] = draw_payload_hex(rng);
            p["packet_id"] = draw_packet_id(rng);
            return p;
        },
        [](const Params& p) -> mqtt::Packet { return build_publish(p, 1); },
    });

    out.push_back(Command{
        "subscribe",
        {{"filter", "filter pool"}, {"qos", "0|1"}, {"packet_id", "1-65535"}},
        Expectation::reply(PacketType::SubAck),
        Phase::MqttConnected,
        false,
        [](Rng& rng) {
            Params p;
            p["filter"] = draw_from(rng, kFilterPool);
            p["qos"] = std::to_string(rng.uniform(2));
            p["packet_id"] = draw_packet_id(rng);
            return p;
        },
        [](const Params& p) -> mqtt::Packet {
            mqtt::Subscribe s;
            s.packet_id = need_packet_id(p);
            s.subscriptions.push_back({need(p, "filter"), static_cast<std::uint8_t>(need_uint(p, "qos", 1))});
            return s;
        },
    });

    out.push_back(Command{
        "unsubscribe",
        {{"filter", "filter pool"}, {"packet_id", "1-65535"}},
        Expectation::reply(PacketType::UnsubAck),
        Phase::MqttConnected,
        false,
        [](Rng& rng) {
            Params p;
            p["filter"] = draw_from(rng, kFilterPool);
            p["packet_id"] = draw_packet_id(rng);
            return p;
        },
        [](const Params& p) -> mqtt::Packet {
            mqtt::Unsubscribe u;
            u.packet_id = need_packet_id(p);
            u.filters.push_back(need(p, "filter"));
            return u;
        },
    });

    out.push_back(Command{
        "ping",
        {},
        Expectation::reply(PacketType::PingResp),
        Phase::MqttConnected,
        false,
        [](Rng&) { return Params{}; },
        [](const Params&) -> mqtt::Packet { return mqtt::PingReq{}; },
    });

    return out;
}

BoundAction regular(std::string name, Params params, Bytes frame) {
    BoundAction a;
    a.kind = ActionKind::Regular;
    a.name = std::move(name);
    a.params = std::move(params);
    a.frames.push_back(std::move(frame));
    return a;
}

void put_u16(Bytes& out, std::size_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_string(Bytes& out, std::string_view s) {
    put_u16(out, s.size());
    out.insert(out.end(), s.begin(), s.end());
}

Bytes frame_of(std::uint8_t byte1, const Bytes& body) {
    Bytes out{byte1};
    mqtt::append_remaining_length(static_cast<std::uint32_t>(body.size()), out);
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

/// Publish frame assembled without the codec's validation.
Bytes raw_publish(std::string_view topic, std::uint8_t qos, std::optional<std::uint16_t> packet_id,
                  const Bytes& payload) {
    Bytes body;
    put_string(body, topic);
    if (packet_id) put_u16(body, *packet_id);
    body.insert(body.end(), payload.begin(), payload.end());
    return frame_of(static_cast<std::uint8_t>(0x30 | (qos << 1)), body);
}

Bytes raw_subscribe(std::uint16_t packet_id, std::string_view filter, std::uint8_t qos) {
    Bytes body;
    put_u16(body, packet_id);
    put_string(body, filter);
    body.push_back(qos);
    return frame_of(0x82, body);
}

BoundAction from_command(std::string name, std::string_view command, Params params) {
    const auto* c = find_command(command);
    auto a = bind_with(*c, params);
    a.name = std::move(name);
    return a;
}

std::vector<ProtocolViolation> make_violations() {
    std::vector<ProtocolViolation> out;

    out.push_back({"publish_before_connect", Phase::Fresh, "PUBLISH as the first packet", [](Rng& rng) {
                       return from_command("publish_before_connect", "publish_qos0",
                                           find_command("publish_qos0")->draw(rng));
                   }});
    out.push_back({"subscribe_before_connect", Phase::Fresh, "SUBSCRIBE as the first packet", [](Rng& rng) {
                       return from_command("subscribe_before_connect", "subscribe",
                                           find_command("subscribe")->draw(rng));
                   }});
    out.push_back({"ping_before_connect", Phase::Fresh, "PINGREQ as the first packet", [](Rng&) {
                       return from_command("ping_before_connect", "ping", {});
                   }});
    out.push_back({"connect_empty_id_persistent", Phase::Fresh, "empty client id with clean_session=false",
                   [](Rng& rng) {
                       Params p{{"client_id", ""},
                                {"clean_session", "false"},
                                {"keep_alive", std::to_string(kKeepAlives[rng.uniform(3)])}};
                       return from_command("connect_empty_id_persistent", "connect", p);
                   }});

    out.push_back({"duplicate_connect", Phase::MqttConnected, "second CONNECT on a connection", [](Rng& rng) {
                       return from_command("duplicate_connect", "connect", find_command("connect")->draw(rng));
                   }});
    out.push_back({"publish_wildcard_topic", Phase::MqttConnected, "PUBLISH to a topic containing a wildcard",
                   [](Rng& rng) {
                       const std::string topic = rng.chance(0.5) ? "sensors/#" : "sensors/+/temp";
                       const Bytes payload(8, 0x2A);
                       return regular("publish_wildcard_topic", {{"topic", topic}, {"payload", to_hex(payload)}},
                                      raw_publish(topic, 0, std::nullopt, payload));
                   }});
    out.push_back({"subscribe_invalid_filter", Phase::MqttConnected, "SUBSCRIBE with '#' not in last position",
                   [](Rng& rng) {
                       const auto pid = static_cast<std::uint16_t>(rng.between(1, 0xFFFF));
                       const std::string filter = "sensors/#/temp";
                       return regular("subscribe_invalid_filter",
                                      {{"filter", filter}, {"packet_id", std::to_string(pid)}, {"qos", "0"}},
                                      raw_subscribe(pid, filter, 0));
                   }});
    out.push_back({"publish_qos1_zero_packet_id", Phase::MqttConnected, "QoS 1 PUBLISH with packet id 0",
                   [](Rng& rng) {
                       const std::string topic = draw_from(rng, kTopicPool);
                       const Bytes payload(4, 0x00);
                       return regular("publish_qos1_zero_packet_id",
                                      {{"topic", topic}, {"payload", to_hex(payload)}, {"packet_id", "0"}},
                                      raw_publish(topic, 1, std::uint16_t{0}, payload));
                   }});
    out.push_back({"subscribe_root_wildcard", Phase::MqttConnected,
                   "SUBSCRIBE to '#'; refused by brokers that restrict wildcard subscriptions", [](Rng& rng) {
                       Params p{{"filter", "#"}, {"qos", "0"}, {"packet_id", draw_packet_id(rng)}};
                       return from_command("subscribe_root_wildcard", "subscribe", p);
                   }});
    return out;
}

}  // namespace

std::string_view to_string(ActionKind kind) { return kind == ActionKind::Regular ? "regular" : "attack"; }

std::optional<ActionKind> parse_action_kind(std::string_view name) {
    if (name == "regular") return ActionKind::Regular;
    if (name == "attack") return ActionKind::Attack;
    return std::nullopt;
}

const std::vector<Command>& default_commands() {
    static const std::vector<Command> commands = make_commands();
    return commands;
}

const Command* find_command(std::string_view name) {
    for (const auto& c : default_commands()) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

std::string draw_client_id(Rng& rng) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rng.uniform(0x100000000ULL)));
    return std::string("tcg-") + buf;
}

BoundAction bind(const Command& command, Rng& rng) { return bind_with(command, command.draw(rng)); }

BoundAction bind_with(const Command& command, const Params& params) {
    Bytes frame;
    try {
        frame = mqtt::encode(command.build(params));
    } catch (const mqtt::EncodeError& e) {
        throw std::invalid_argument(command.name + ": " + e.what());
    }
    return regular(command.name, params, std::move(frame));
}

const std::vector<ProtocolViolation>& protocol_violations() {
    static const std::vector<ProtocolViolation> violations = make_violations();
    return violations;
}

std::vector<const ProtocolViolation*> violations_for(harness::Phase phase) {
    std::vector<const ProtocolViolation*> out;
    for (const auto& v : protocol_violations()) {
        if (v.phase == phase) out.push_back(&v);
    }
    return out;
}

}  // namespace tmtcg::catalog
