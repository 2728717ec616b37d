#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tmtcg/bytes.hpp"
#include "tmtcg/harness/transport.hpp"
#include "tmtcg/mqtt/packet.hpp"

namespace tmtcg::harness {

enum class Phase { Fresh, MqttConnected, Closed };

enum class Verdict { Accepted, Rejected, NoResponse, ConnectionClosed, SutDown };

std::string_view to_string(Phase phase);
std::string_view to_string(Verdict verdict);
std::optional<Verdict> parse_verdict(std::string_view name);

/// What a client transmission is waiting for.
struct Expectation {
    enum class Kind {
        Response,  // a packet of `response` type (and packet id, if set)
        Silence,   // nothing in particular; `closes` when the broker should hang up
        Closure,   // a frame the broker cannot parse; expect it to hang up
    };
    Kind kind = Kind::Silence;
    mqtt::PacketType response = mqtt::PacketType::ConnAck;
    std::optional<std::uint16_t> packet_id;
    bool closes = false;

    static Expectation reply(mqtt::PacketType type, std::optional<std::uint16_t> packet_id = std::nullopt) {
        return {Kind::Response, type, packet_id, false};
    }
    static Expectation silence(bool closes = false) { return {Kind::Silence, mqtt::PacketType::ConnAck, {}, closes}; }
    static Expectation closure() { return {Kind::Closure, mqtt::PacketType::ConnAck, {}, false}; }

    bool operator==(const Expectation&) const = default;
};

/// Expectation implied by the first frame in `frame`: the ack a 3.1.1 broker
/// owes for it, silence for unacknowledged packets, closure when it does not
/// decode as a client packet.
Expectation expectation_for_frame(ByteView frame);

struct ProbeRecord {
    std::string label;
    std::int64_t at_ms = 0;
    bool alive = false;

    bool operator==(const ProbeRecord&) const = default;
};

struct Feedback {
    Verdict verdict = Verdict::NoResponse;
    std::vector<mqtt::Packet> packets;
    std::int64_t latency_ms = 0;
    std::vector<ProbeRecord> probes;  // liveness checks taken while acting
    std::string note;

    bool operator==(const Feedback&) const = default;
};

struct SessionOptions {
    std::int64_t timeout_ms = 2000;
    /// How long to listen when no particular response is due.
    std::int64_t silence_ms = 100;
    /// Virtual time that passes per transmission on a virtual clock.
    std::int64_t virtual_step_ms = 100;
    std::optional<std::string> username;
    std::optional<std::string> password;
};

/// Broker refused or could not be reached.
class OpenError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One MQTT client connection driven a transmission at a time.
class Session {
public:
    /// Throws OpenError.
    static Session open(std::shared_ptr<Endpoint> endpoint, SessionOptions options = {});

    Session(Session&&) noexcept = default;
    Session& operator=(Session&&) noexcept = default;
    ~Session();

    /// Writes `frame` and classifies what comes back. Never throws for
    /// transport trouble; a closed session yields ConnectionClosed.
    Feedback send_and_observe(ByteView frame, const Expectation& expect);
    Feedback send_and_observe(ByteView frame) { return send_and_observe(frame, expectation_for_frame(frame)); }

    /// Listens without sending, e.g. to notice a close caused by another client.
    Feedback observe(const Expectation& expect);

    /// Another connection to the same broker with the same options.
    Session open_sibling() const { return open(endpoint_, options_); }

    void close();

    Phase phase() const { return phase_; }
    /// Client id of the accepted CONNECT, if any.
    const std::optional<std::string>& client_id() const { return client_id_; }
    const SessionOptions& options() const { return options_; }
    Endpoint& endpoint() const { return *endpoint_; }
    const std::shared_ptr<Endpoint>& shared_endpoint() const { return endpoint_; }

private:
    Session(std::shared_ptr<Endpoint> endpoint, SessionOptions options, std::unique_ptr<Transport> transport)
        : endpoint_(std::move(endpoint)), options_(std::move(options)), transport_(std::move(transport)) {}

    Feedback collect(const Expectation& expect, std::int64_t started_ms);

    std::shared_ptr<Endpoint> endpoint_;
    SessionOptions options_;
    std::unique_ptr<Transport> transport_;
    Phase phase_ = Phase::Fresh;
    Bytes rx_;
    std::optional<std::string> pending_client_id_;
    std::optional<std::string> client_id_;
};

inline constexpr std::string_view kProbeClientId = "tcg-liveness-probe";

/// Throwaway CONNECT/DISCONNECT; alive iff the CONNECT is accepted in time.
bool probe_liveness(const std::shared_ptr<Endpoint>& endpoint, const SessionOptions& options = {});

}  // namespace tmtcg::harness
