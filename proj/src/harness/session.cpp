#include "tmtcg/harness/session.hpp"

#include <algorithm>
#include <array>
#include <chrono>

#include "tmtcg/mqtt/codec.hpp"

namespace tmtcg::harness {

namespace {

constexpr std::array<std::pair<Verdict, std::string_view>, 5> kVerdictNames{{
    {Verdict::Accepted, "Accepted"},
    {Verdict::Rejected, "Rejected"},
    {Verdict::NoResponse, "NoResponse"},
    {Verdict::ConnectionClosed, "ConnectionClosed"},
    {Verdict::SutDown, "SutDown"},
}};

std::int64_t steady_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::optional<std::uint16_t> packet_id_of(const mqtt::Packet& p) {
    if (const auto* x = std::get_if<mqtt::PubAck>(&p)) return x->packet_id;
    if (const auto* x = std::get_if<mqtt::SubAck>(&p)) return x->packet_id;
    if (const auto* x = std::get_if<mqtt::UnsubAck>(&p)) return x->packet_id;
    if (const auto* x = std::get_if<mqtt::Publish>(&p)) return x->packet_id;
    return std::nullopt;
}

bool matches(const Expectation& expect, const mqtt::Packet& p) {
    if (mqtt::type_of(p) != expect.response) return false;
    return !expect.packet_id || packet_id_of(p) == expect.packet_id;
}

}  // namespace

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::Fresh: return "Fresh";
        case Phase::MqttConnected: return "MqttConnected";
        case Phase::Closed: return "Closed";
    }
    return "?";
}

std::string_view to_string(Verdict verdict) {
    for (const auto& [v, name] : kVerdictNames) {
        if (v == verdict) return name;
    }
    return "?";
}

std::optional<Verdict> parse_verdict(std::string_view name) {
    for (const auto& [v, n] : kVerdictNames) {
        if (n == name) return v;
    }
    return std::nullopt;
}

Expectation expectation_for_frame(ByteView frame) {
    auto result = mqtt::decode(frame);
    const auto* decoded = std::get_if<mqtt::Decoded>(&result);
    if (decoded == nullptr) return Expectation::closure();
    using T = mqtt::PacketType;
    const auto& p = decoded->packet;
    switch (mqtt::type_of(p)) {
        case T::Connect: return Expectation::reply(T::ConnAck);
        case T::Publish: {
            const auto& pub = std::get<mqtt::Publish>(p);
            return pub.qos == 0 ? Expectation::silence() : Expectation::reply(T::PubAck, pub.packet_id);
        }
        case T::Subscribe: return Expectation::reply(T::SubAck, std::get<mqtt::Subscribe>(p).packet_id);
        case T::Unsubscribe: return Expectation::reply(T::UnsubAck, std::get<mqtt::Unsubscribe>(p).packet_id);
        case T::PingReq: return Expectation::reply(T::PingResp);
        case T::Disconnect: return Expectation::silence(true);
        case T::PubAck: return Expectation::silence();
        default: return Expectation::closure();  // server-to-client types
    }
}

Session Session::open(std::shared_ptr<Endpoint> endpoint, SessionOptions options) {
    auto transport = endpoint->connect();
    if (!transport) throw OpenError("cannot connect to " + endpoint->descriptor());
    return Session(std::move(endpoint), std::move(options), std::move(transport));
}

Session::~Session() { close(); }

void Session::close() {
    if (transport_) transport_->close();
    phase_ = Phase::Closed;
}

Feedback Session::send_and_observe(ByteView frame, const Expectation& expect) {
    if (phase_ == Phase::Closed) {
        Feedback fb;
        fb.verdict = Verdict::ConnectionClosed;
        fb.note = "session closed";
        return fb;
    }
    endpoint_->clock().advance(options_.virtual_step_ms);

    pending_client_id_.reset();
    if (expect.kind == Expectation::Kind::Response && expect.response == mqtt::PacketType::ConnAck) {
        auto result = mqtt::decode(frame);
        if (auto* d = std::get_if<mqtt::Decoded>(&result)) {
            if (auto* c = std::get_if<mqtt::Connect>(&d->packet)) pending_client_id_ = c->client_id;
        }
    }

    const auto started = steady_ms();
    if (!transport_->write(frame)) {
        close();
        Feedback fb;
        fb.verdict = Verdict::ConnectionClosed;
        fb.note = "write failed";
        return fb;
    }
    return collect(expect, started);
}

Feedback Session::observe(const Expectation& expect) {
    if (phase_ == Phase::Closed) {
        Feedback fb;
        fb.verdict = Verdict::ConnectionClosed;
        fb.note = "session closed";
        return fb;
    }
    pending_client_id_.reset();
    return collect(expect, steady_ms());
}

Feedback Session::collect(const Expectation& expect, std::int64_t started_ms) {
    const bool virtual_time = endpoint_->clock().is_virtual();
    const std::int64_t window =
        expect.kind == Expectation::Kind::Response ? options_.timeout_ms : options_.silence_ms;
    const auto deadline = started_ms + window;

    Feedback fb;
    bool peer_closed = false;
    std::optional<std::size_t> hit;

    for (;;) {
        // Drain complete frames from the receive buffer.
        std::size_t offset = 0;
        while (offset < rx_.size()) {
            auto result = mqtt::decode(ByteView(rx_).subspan(offset));
            if (auto* d = std::get_if<mqtt::Decoded>(&result)) {
                offset += d->consumed;
                fb.packets.push_back(std::move(d->packet));
                continue;
            }
            if (auto* err = std::get_if<mqtt::DecodeError>(&result)) {
                fb.note = "undecodable response: " + err->reason;
                peer_closed = true;
                offset = rx_.size();
            }
            break;
        }
        rx_.erase(rx_.begin(), rx_.begin() + static_cast<std::ptrdiff_t>(offset));

        if (expect.kind == Expectation::Kind::Response && !hit) {
            for (std::size_t i = 0; i < fb.packets.size(); ++i) {
                if (matches(expect, fb.packets[i])) {
                    hit = i;
                    break;
                }
            }
        }
        if (hit || peer_closed) break;

        const auto remaining = deadline - steady_ms();
        if (!transport_->instant() && remaining <= 0) break;
        auto chunk = transport_->read(remaining);
        const bool got_nothing = chunk.bytes.empty() && !chunk.closed;
        rx_.insert(rx_.end(), chunk.bytes.begin(), chunk.bytes.end());
        if (chunk.closed) peer_closed = true;
        if (got_nothing && transport_->instant()) break;
    }

    fb.latency_ms = virtual_time ? 0 : steady_ms() - started_ms;

    switch (expect.kind) {
        case Expectation::Kind::Response:
            if (hit) {
                const auto& p = fb.packets[*hit];
                fb.verdict = Verdict::Accepted;
                if (const auto* ack = std::get_if<mqtt::ConnAck>(&p)) {
                    if (ack->return_code != mqtt::connack::kAccepted) {
                        fb.verdict = Verdict::Rejected;
                        fb.note = "connack return code " + std::to_string(ack->return_code);
                        close();
                    } else if (phase_ == Phase::Fresh) {
                        phase_ = Phase::MqttConnected;
                        client_id_ = pending_client_id_;
                    }
                } else if (const auto* sub = std::get_if<mqtt::SubAck>(&p)) {
                    if (std::ranges::find(sub->return_codes, mqtt::kSubAckFailure) != sub->return_codes.end()) {
                        fb.verdict = Verdict::Rejected;
                        fb.note = "subscription refused";
                    }
                }
            } else {
                fb.verdict = peer_closed ? Verdict::ConnectionClosed : Verdict::NoResponse;
            }
            break;
        case Expectation::Kind::Silence:
            fb.verdict = peer_closed && !expect.closes ? Verdict::ConnectionClosed : Verdict::Accepted;
            if (expect.closes) close();
            break;
        case Expectation::Kind::Closure:
            if (peer_closed) {
                fb.verdict = Verdict::ConnectionClosed;
            } else {
                fb.verdict = fb.packets.empty() ? Verdict::NoResponse : Verdict::Accepted;
            }
            break;
    }
    if (peer_closed) close();
    return fb;
}

bool probe_liveness(const std::shared_ptr<Endpoint>& endpoint, const SessionOptions& options) {
    std::unique_ptr<Session> s;
    try {
        s = std::make_unique<Session>(Session::open(endpoint, options));
    } catch (const OpenError&) {
        return false;
    }
    mqtt::Connect c;
    c.client_id = std::string(kProbeClientId);
    c.clean_session = true;
    if (options.username) c.username = options.username;
    if (options.password) c.password = to_bytes(*options.password);
    const auto fb = s->send_and_observe(mqtt::encode(c), Expectation::reply(mqtt::PacketType::ConnAck));
    const bool alive = fb.verdict == Verdict::Accepted;
    if (alive) s->send_and_observe(mqtt::encode(mqtt::Disconnect{}), Expectation::silence(true));
    s->close();
    return alive;
}

}  // namespace tmtcg::harness
