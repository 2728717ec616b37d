#include "tmtcg/harness/mock_broker.hpp"

#include <algorithm>
#include <sstream>

#include "tmtcg/mqtt/codec.hpp"
#include "tmtcg/mqtt/topic.hpp"

namespace tmtcg::harness {

namespace {

constexpr std::size_t kStrictMaxClientId = 23;
constexpr std::int64_t kRateWindowMs = 1000;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

MockOutcome closing() {
    MockOutcome out;
    out.close = true;
    return out;
}

MockOutcome refuse_connect(std::uint8_t rc) {
    MockOutcome out;
    out.responses.push_back(mqtt::ConnAck{false, rc});
    out.close = true;
    return out;
}

// Unbinds `conn` and forgets its session when it was clean.
void release(MockBrokerState& state, ConnId conn) {
    auto it = state.connections.find(conn);
    if (it == state.connections.end()) return;
    if (const auto& id = it->second.client_id) {
        auto bound = state.clients.find(*id);
        if (bound != state.clients.end() && bound->second == conn) {
            state.clients.erase(bound);
            auto session = state.sessions.find(*id);
            if (session != state.sessions.end() && session->second.clean) state.sessions.erase(session);
        }
    }
    state.connections.erase(it);
}

std::uint16_t take_packet_id(MockBrokerState& state) {
    const auto id = state.next_packet_id;
    state.next_packet_id = static_cast<std::uint16_t>(id == 0xFFFF ? 1 : id + 1);
    return id;
}

MockOutcome handle_connect(MockBrokerState& state, ConnId conn, const mqtt::Connect& c) {
    const auto& cfg = state.config;

    if (cfg.username) {
        if (!c.username) return refuse_connect(mqtt::connack::kNotAuthorized);
        const std::string given_password = c.password ? std::string(c.password->begin(), c.password->end()) : "";
        if (*c.username != *cfg.username || (cfg.password && given_password != *cfg.password)) {
            return refuse_connect(mqtt::connack::kBadCredentials);
        }
    }

    std::string client_id = c.client_id;
    if (client_id.empty()) {
        if (!c.clean_session || cfg.strict_mode) return refuse_connect(mqtt::connack::kIdentifierRejected);
        client_id = "auto-" + std::to_string(state.next_auto_id++);
    }
    if (cfg.strict_mode && client_id.size() > kStrictMaxClientId) {
        return refuse_connect(mqtt::connack::kIdentifierRejected);
    }

    MockOutcome out;
    auto existing = state.clients.find(client_id);
    const bool takeover = existing != state.clients.end();
    if (takeover && cfg.strict_mode) return refuse_connect(mqtt::connack::kIdentifierRejected);
    if (!takeover && state.connected_clients() >= cfg.max_connections) {
        return refuse_connect(mqtt::connack::kServerUnavailable);
    }
    if (takeover) {
        const ConnId old = existing->second;
        out.closed_others.push_back(old);
        // The old connection goes away without touching the stored session;
        // the new CONNECT decides whether it survives.
        state.clients.erase(existing);
        state.connections.erase(old);
    }

    bool session_present = false;
    if (c.clean_session) {
        state.sessions[client_id] = StoredSession{true, {}};
    } else {
        auto it = state.sessions.find(client_id);
        session_present = it != state.sessions.end() && !it->second.clean;
        if (it == state.sessions.end()) {
            state.sessions.emplace(client_id, StoredSession{false, {}});
        } else {
            it->second.clean = false;
        }
    }

    state.connections[conn].client_id = client_id;
    state.clients[client_id] = conn;
    out.responses.push_back(mqtt::ConnAck{session_present, mqtt::connack::kAccepted});
    return out;
}

MockOutcome handle_publish(MockBrokerState& state, ConnId conn, ConnectionState& cs, const mqtt::Publish& p,
                           std::int64_t now_ms) {
    auto& times = cs.publish_times;
    while (!times.empty() && times.front() <= now_ms - kRateWindowMs) times.pop_front();
    if (times.size() >= state.config.max_publish_per_second) return closing();
    times.push_back(now_ms);

    MockOutcome out;
    if (p.qos == 1) out.responses.push_back(mqtt::PubAck{*p.packet_id});

    for (const auto& [client_id, target] : state.clients) {
        auto session = state.sessions.find(client_id);
        if (session == state.sessions.end()) continue;
        std::optional<std::uint8_t> granted;
        for (const auto& [filter, qos] : session->second.subscriptions) {
            if (mqtt::topic_matches(filter, p.topic)) granted = std::max<std::uint8_t>(granted.value_or(0), qos);
        }
        if (!granted) continue;
        mqtt::Publish fwd;
        fwd.topic = p.topic;
        fwd.payload = p.payload;
        fwd.qos = std::min(p.qos, *granted);
        if (fwd.qos == 1) fwd.packet_id = take_packet_id(state);
        out.deliveries.push_back(Delivery{target, std::move(fwd)});
    }
    (void)conn;
    return out;
}

}  // namespace

std::string BrokerConfig::to_text() const {
    std::ostringstream out;
    out << "max_connections = " << max_connections << "\n"
        << "max_publish_per_second = " << max_publish_per_second << "\n"
        << "max_packet_bytes = " << max_packet_bytes << "\n"
        << "strict_mode = " << (strict_mode ? "true" : "false") << "\n"
        << "auth = " << (username ? "required" : "none") << "\n";
    return out.str();
}

MockBrokerState mock_open(MockBrokerState state, ConnId conn) {
    state.connections[conn] = ConnectionState{};
    return state;
}

MockBrokerState mock_drop(MockBrokerState state, ConnId conn) {
    release(state, conn);
    return state;
}

std::pair<MockOutcome, MockBrokerState> mock_handle(MockBrokerState state, ConnId conn, const mqtt::Packet& packet,
                                                    std::int64_t now_ms) {
    auto it = state.connections.find(conn);
    if (it == state.connections.end()) return {closing(), std::move(state)};

    auto violation = [&]() {
        release(state, conn);
        return std::pair<MockOutcome, MockBrokerState>{closing(), std::move(state)};
    };

    // The first packet on a connection must be CONNECT, and only the first.
    if (!it->second.client_id) {
        const auto* c = std::get_if<mqtt::Connect>(&packet);
        if (c == nullptr) return violation();
        MockOutcome out = handle_connect(state, conn, *c);
        if (out.close) release(state, conn);
        return {std::move(out), std::move(state)};
    }

    MockOutcome out = std::visit(
        Overloaded{
            [&](const mqtt::Connect&) { return closing(); },
            [&](const mqtt::Publish& p) { return handle_publish(state, conn, it->second, p, now_ms); },
            [&](const mqtt::PubAck&) { return MockOutcome{}; },
            [&](const mqtt::Subscribe& s) {
                MockOutcome o;
                mqtt::SubAck ack{s.packet_id, {}};
                auto& session = state.sessions[*it->second.client_id];
                for (const auto& sub : s.subscriptions) {
                    if (state.config.strict_mode && sub.filter == "#") {
                        ack.return_codes.push_back(mqtt::kSubAckFailure);
                        continue;
                    }
                    const std::uint8_t granted = std::min<std::uint8_t>(sub.qos, 1);
                    session.subscriptions[sub.filter] = granted;
                    ack.return_codes.push_back(granted);
                }
                o.responses.push_back(std::move(ack));
                return o;
            },
            [&](const mqtt::Unsubscribe& u) {
                MockOutcome o;
                auto& session = state.sessions[*it->second.client_id];
                for (const auto& f : u.filters) session.subscriptions.erase(f);
                o.responses.push_back(mqtt::UnsubAck{u.packet_id});
                return o;
            },
            [&](const mqtt::PingReq&) {
                MockOutcome o;
                o.responses.push_back(mqtt::PingResp{});
                return o;
            },
            [&](const mqtt::Disconnect&) { return closing(); },
            // Server-to-client packet types are protocol violations from a client.
            [&](const auto&) { return closing(); },
        },
        packet);

    if (out.close) release(state, conn);
    return {std::move(out), std::move(state)};
}

std::optional<std::string> protocol_check(ByteView unit) {
    if (unit.empty()) return "empty transmission";
    std::size_t offset = 0;
    while (offset < unit.size()) {
        auto result = mqtt::decode(unit.subspan(offset));
        if (auto* err = std::get_if<mqtt::DecodeError>(&result)) {
            return "malformed frame at byte " + std::to_string(offset + err->offset) + ": " + err->reason;
        }
        if (std::holds_alternative<mqtt::NeedMoreData>(result)) {
            return "incomplete frame at byte " + std::to_string(offset) + ": declared length exceeds the " +
                   std::to_string(unit.size() - offset) + " byte(s) sent";
        }
        const auto& decoded = std::get<mqtt::Decoded>(result);
        switch (mqtt::type_of(decoded.packet)) {
            case mqtt::PacketType::ConnAck:
            case mqtt::PacketType::SubAck:
            case mqtt::PacketType::UnsubAck:
            case mqtt::PacketType::PingResp:
                return "server-to-client packet " + std::string(mqtt::to_string(mqtt::type_of(decoded.packet))) +
                       " sent by a client at byte " + std::to_string(offset);
            default: break;
        }
        offset += decoded.consumed;
    }
    return std::nullopt;
}

MockBroker::MockBroker(BrokerConfig config, std::shared_ptr<Clock> clock)
    : config_(std::move(config)), clock_(std::move(clock)) {
    state_.config = config_;
}

std::optional<ConnId> MockBroker::open() {
    std::lock_guard lock(mutex_);
    if (halted_) return std::nullopt;
    const ConnId conn = next_conn_++;
    state_ = mock_open(std::move(state_), conn);
    wires_[conn] = Wire{};
    return conn;
}

void MockBroker::drop_locked(ConnId conn) {
    auto it = wires_.find(conn);
    if (it == wires_.end() || it->second.closed) return;
    it->second.closed = true;
    it->second.inbound.clear();
}

void MockBroker::apply(ConnId conn, const MockOutcome& outcome) {
    auto& wire = wires_[conn];
    for (const auto& p : outcome.responses) {
        const auto bytes = mqtt::encode(p);
        wire.outbound.insert(wire.outbound.end(), bytes.begin(), bytes.end());
    }
    for (const auto& d : outcome.deliveries) {
        auto target = wires_.find(d.conn);
        if (target == wires_.end() || target->second.closed) continue;
        const auto bytes = mqtt::encode(d.packet);
        target->second.outbound.insert(target->second.outbound.end(), bytes.begin(), bytes.end());
    }
    for (auto other : outcome.closed_others) drop_locked(other);
    if (outcome.close) drop_locked(conn);
}

void MockBroker::feed(ConnId conn, ByteView bytes) {
    std::lock_guard lock(mutex_);
    if (halted_) return;
    auto it = wires_.find(conn);
    if (it == wires_.end() || it->second.closed) return;
    auto& inbound = it->second.inbound;
    inbound.insert(inbound.end(), bytes.begin(), bytes.end());

    std::size_t offset = 0;
    while (!wires_[conn].closed && offset < inbound.size()) {
        const ByteView rest(inbound.data() + offset, inbound.size() - offset);
        auto header = mqtt::decode_fixed_header(rest);
        if (auto* h = std::get_if<mqtt::FixedHeader>(&header); h && h->remaining_length > config_.max_packet_bytes) {
            state_ = mock_drop(std::move(state_), conn);
            drop_locked(conn);
            break;
        }
        auto result = mqtt::decode(rest);
        if (std::holds_alternative<mqtt::NeedMoreData>(result)) break;
        if (std::holds_alternative<mqtt::DecodeError>(result)) {
            state_ = mock_drop(std::move(state_), conn);
            drop_locked(conn);
            break;
        }
        auto& decoded = std::get<mqtt::Decoded>(result);
        offset += decoded.consumed;
        auto [outcome, next] = mock_handle(std::move(state_), conn, decoded.packet, clock_->now_ms());
        state_ = std::move(next);
        apply(conn, outcome);
    }
    auto& wire = wires_[conn];
    if (wire.closed) {
        wire.inbound.clear();
    } else {
        wire.inbound.erase(wire.inbound.begin(), wire.inbound.begin() + static_cast<std::ptrdiff_t>(offset));
    }
}

void MockBroker::close(ConnId conn) {
    std::lock_guard lock(mutex_);
    auto it = wires_.find(conn);
    if (it == wires_.end()) return;
    state_ = mock_drop(std::move(state_), conn);
    wires_.erase(it);
}

MockBroker::Pending MockBroker::take(ConnId conn) {
    std::lock_guard lock(mutex_);
    auto it = wires_.find(conn);
    if (it == wires_.end()) return Pending{{}, true};
    Pending p;
    p.bytes.swap(it->second.outbound);
    p.closed = it->second.closed;
    if (p.closed) it->second.close_reported = true;
    return p;
}

std::vector<ConnId> MockBroker::dirty() const {
    std::lock_guard lock(mutex_);
    std::vector<ConnId> out;
    for (const auto& [conn, wire] : wires_) {
        if (!wire.outbound.empty() || (wire.closed && !wire.close_reported)) out.push_back(conn);
    }
    return out;
}

void MockBroker::halt() {
    std::lock_guard lock(mutex_);
    halted_ = true;
}

void MockBroker::resume() {
    std::lock_guard lock(mutex_);
    halted_ = false;
}

bool MockBroker::halted() const {
    std::lock_guard lock(mutex_);
    return halted_;
}

MockBrokerState MockBroker::snapshot() const {
    std::lock_guard lock(mutex_);
    return state_;
}

}  // namespace tmtcg::harness
