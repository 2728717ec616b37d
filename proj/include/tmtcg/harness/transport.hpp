#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include "tmtcg/bytes.hpp"
#include "tmtcg/harness/clock.hpp"
#include "tmtcg/harness/mock_broker.hpp"

namespace tmtcg::harness {

/// One client connection to a broker.
class Transport {
public:
    virtual ~Transport() = default;

    /// Sends all of `bytes`. False when the connection is gone.
    virtual bool write(ByteView bytes) = 0;

    struct Chunk {
        Bytes bytes;
        bool closed = false;  // peer closed; no more bytes will follow
    };
    /// Waits up to `wait_ms` for bytes or a close.
    virtual Chunk read(std::int64_t wait_ms) = 0;

    /// Closes our side and waits briefly for the peer to finish, so the
    /// broker has processed the close before the next connection opens.
    virtual void close() = 0;

    /// Reads never block: everything the broker will say is already queued.
    virtual bool instant() const = 0;
};

/// Where sessions connect to.
class Endpoint {
public:
    virtual ~Endpoint() = default;
    /// New transport, or nullptr when the broker refuses or is unreachable.
    virtual std::unique_ptr<Transport> connect() = 0;
    virtual Clock& clock() = 0;
    virtual std::string descriptor() const = 0;
};

/// In-process connection to a MockBroker.
class EmbeddedEndpoint final : public Endpoint {
public:
    explicit EmbeddedEndpoint(std::shared_ptr<MockBroker> broker) : broker_(std::move(broker)) {}

    std::unique_ptr<Transport> connect() override;
    Clock& clock() override { return broker_->clock(); }
    std::string descriptor() const override { return "embedded"; }

    MockBroker& broker() { return *broker_; }

private:
    std::shared_ptr<MockBroker> broker_;
};

class TcpEndpoint final : public Endpoint {
public:
    TcpEndpoint(std::string host, std::uint16_t port, std::int64_t connect_timeout_ms = 2000,
                std::int64_t close_wait_ms = 500);

    std::unique_ptr<Transport> connect() override;
    Clock& clock() override { return clock_; }
    std::string descriptor() const override;

private:
    std::string host_;
    std::uint16_t port_;
    std::int64_t connect_timeout_ms_;
    std::int64_t close_wait_ms_;
    SteadyClock clock_;
};

}  // namespace tmtcg::harness
