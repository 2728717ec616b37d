#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tmtcg/bytes.hpp"
#include "tmtcg/harness/clock.hpp"
#include "tmtcg/mqtt/packet.hpp"

namespace tmtcg::harness {

using ConnId = std::uint64_t;

struct BrokerConfig {
    std::size_t max_connections = 100;
    std::size_t max_publish_per_second = 100;
    /// Frames whose remaining length exceeds this are dropped with the connection.
    std::size_t max_packet_bytes = 65536;
    /// Enforce the optional restrictions 3.1.1 allows a server to apply:
    /// client ids of 1..23 characters only, no session takeover (duplicate
    /// ids are refused), no subscriptions to "#".
    bool strict_mode = false;
    /// When set, CONNECT must carry exactly these credentials.
    std::optional<std::string> username;
    std::optional<std::string> password;

    /// Canonical `key = value` text; stable input for environment digests.
    std::string to_text() const;

    bool operator==(const BrokerConfig&) const = default;
};

struct ConnectionState {
    std::optional<std::string> client_id;  // set once CONNECT is accepted
    std::deque<std::int64_t> publish_times;

    bool operator==(const ConnectionState&) const = default;
};

struct StoredSession {
    bool clean = true;
    std::map<std::string, std::uint8_t> subscriptions;  // filter -> granted QoS

    bool operator==(const StoredSession&) const = default;
};

/// Complete broker state; mock_handle is a pure function over it.
struct MockBrokerState {
    BrokerConfig config;
    std::map<ConnId, ConnectionState> connections;  // open transport connections
    std::map<std::string, ConnId> clients;          // connected client id -> connection
    std::map<std::string, StoredSession> sessions;  // client id -> session (persists when !clean)
    std::uint16_t next_packet_id = 1;
    std::uint64_t next_auto_id = 1;

    std::size_t connected_clients() const { return clients.size(); }

    bool operator==(const MockBrokerState&) const = default;
};

struct Delivery {
    ConnId conn = 0;
    mqtt::Packet packet;

    bool operator==(const Delivery&) const = default;
};

struct MockOutcome {
    std::vector<mqtt::Packet> responses;  // to the sending connection, in order
    bool close = false;                   // close the sending connection after responses
    std::vector<Delivery> deliveries;     // forwarded publishes, possibly to the sender
    std::vector<ConnId> closed_others;    // connections dropped by session takeover

    bool operator==(const MockOutcome&) const = default;
};

/// Registers a new transport connection awaiting CONNECT.
MockBrokerState mock_open(MockBrokerState state, ConnId conn);

/// Transport closed by the client without DISCONNECT.
MockBrokerState mock_drop(MockBrokerState state, ConnId conn);

/// Reference semantics for one decoded packet from `conn` at time `now_ms`.
std::pair<MockOutcome, MockBrokerState> mock_handle(MockBrokerState state, ConnId conn, const mqtt::Packet& packet,
                                                    std::int64_t now_ms);

/// Checks one client transmission unit in isolation: every frame must decode
/// completely and be a client-to-server packet type. Returns the violation,
/// or nullopt for a clean unit.
std::optional<std::string> protocol_check(ByteView unit);

/// Thread-safe byte-stream front end over mock_handle, one instance per
/// broker. Calls are serialized; distinct instances are independent.
class MockBroker {
public:
    MockBroker(BrokerConfig config, std::shared_ptr<Clock> clock);

    MockBroker(const MockBroker&) = delete;
    MockBroker& operator=(const MockBroker&) = delete;

    /// New connection, or nullopt while halted.
    std::optional<ConnId> open();
    /// Bytes from the client. Ignored for closed connections and while halted.
    void feed(ConnId conn, ByteView bytes);
    /// Client closed its side.
    void close(ConnId conn);

    struct Pending {
        Bytes bytes;
        bool closed = false;
    };
    /// Drains outbound bytes for `conn`; `closed` once the broker dropped it.
    Pending take(ConnId conn);
    /// Connections with undelivered bytes or an unreported close.
    std::vector<ConnId> dirty() const;

    void halt();
    void resume();
    bool halted() const;

    const BrokerConfig& config() const { return config_; }
    Clock& clock() const { return *clock_; }
    std::shared_ptr<Clock> shared_clock() const { return clock_; }
    MockBrokerState snapshot() const;

private:
    struct Wire {
        Bytes inbound;
        Bytes outbound;
        bool closed = false;
        bool close_reported = false;
    };

    void apply(ConnId conn, const MockOutcome& outcome);
    void drop_locked(ConnId conn);

    const BrokerConfig config_;
    std::shared_ptr<Clock> clock_;
    mutable std::mutex mutex_;
    MockBrokerState state_;
    std::map<ConnId, Wire> wires_;
    ConnId next_conn_ = 1;
    bool halted_ = false;
};

}  // namespace tmtcg::harness
