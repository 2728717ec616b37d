#include "tmtcg/harness/target.hpp"

#include "tmtcg/digest.hpp"

namespace tmtcg::harness {

Target Target::embedded(BrokerConfig config, SessionOptions options) {
    Target t;
    t.config_ = std::move(config);
    t.options_ = std::move(options);
    return t;
}

Target Target::tcp(std::string host, std::uint16_t port, std::optional<BrokerConfig> declared,
                   SessionOptions options) {
    Target t;
    t.config_ = std::move(declared);
    t.host_ = std::move(host);
    t.port_ = port;
    t.options_ = std::move(options);
    t.tcp_endpoint_ = std::make_shared<TcpEndpoint>(*t.host_, port, t.options_.timeout_ms);
    return t;
}

std::shared_ptr<Endpoint> Target::fresh_endpoint() const {
    if (!is_embedded()) return tcp_endpoint_;
    auto broker = std::make_shared<MockBroker>(*config_, std::make_shared<VirtualClock>());
    return std::make_shared<EmbeddedEndpoint>(std::move(broker));
}

std::string Target::descriptor() const {
    if (is_embedded()) return "embedded";
    return "tcp:" + *host_ + ":" + std::to_string(port_);
}

std::string Target::environment_text() const {
    std::string text = std::string(kProtocolName) + "\n";
    text += config_ ? config_->to_text() : "broker = unknown\n";
    return text;
}

std::string Target::environment_digest() const { return sha256_hex(std::string_view(environment_text())); }

}  // namespace tmtcg::harness
