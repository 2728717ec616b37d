#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tmtcg/harness/mock_broker.hpp"

namespace tmtcg::harness {

/// Serves a MockBroker over TCP so the TCP transport can be exercised
/// against the reference state machine.
class MockServer {
public:
    /// Binds immediately; port 0 picks a free port. Throws std::runtime_error.
    MockServer(std::shared_ptr<MockBroker> broker, const std::string& host = "127.0.0.1", std::uint16_t port = 0);
    ~MockServer();

    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    std::uint16_t port() const { return port_; }
    MockBroker& broker() { return *broker_; }

    void stop();

private:
    void accept_loop();
    void serve(ConnId conn, int fd);
    void flush();

    std::shared_ptr<MockBroker> broker_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;

    std::mutex mutex_;
    std::map<ConnId, int> sockets_;         // live connections
    std::map<ConnId, bool> write_closed_;   // broker hung up on these
    std::vector<std::thread> workers_;
};

}  // namespace tmtcg::harness
