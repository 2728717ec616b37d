#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "tmtcg/harness/mock_broker.hpp"
#include "tmtcg/harness/session.hpp"
#include "tmtcg/harness/transport.hpp"

namespace tmtcg::harness {

inline constexpr std::string_view kProtocolName = "mqtt-3.1.1";

/// Hands out endpoints for test cases: a fresh in-process broker per case,
/// or the same TCP broker every time.
class Target {
public:
    static Target embedded(BrokerConfig config, SessionOptions options = {});
    /// `declared` describes the remote broker's configuration for the
    /// environment digest; unknown when absent.
    static Target tcp(std::string host, std::uint16_t port, std::optional<BrokerConfig> declared = std::nullopt,
                      SessionOptions options = {});

    std::shared_ptr<Endpoint> fresh_endpoint() const;

    bool is_embedded() const { return !host_; }
    std::string descriptor() const;
    /// "virtual" or "steady".
    std::string clock_kind() const { return is_embedded() ? "virtual" : "steady"; }
    /// Protocol plus broker configuration, as hashed into the digest.
    std::string environment_text() const;
    std::string environment_digest() const;

    const std::optional<BrokerConfig>& broker_config() const { return config_; }
    const SessionOptions& session_options() const { return options_; }
    SessionOptions& session_options() { return options_; }

private:
    Target() = default;

    std::optional<BrokerConfig> config_;
    std::optional<std::string> host_;
    std::uint16_t port_ = 0;
    SessionOptions options_;
    std::shared_ptr<Endpoint> tcp_endpoint_;
};

}  // namespace tmtcg::harness
