#include <gtest/gtest.h>

#include <memory>

#include "support.hpp"
#include "tmtcg/harness/mock_broker.hpp"
#include "tmtcg/harness/mock_server.hpp"
#include "tmtcg/harness/session.hpp"
#include "tmtcg/harness/target.hpp"
#include "tmtcg/mqtt/codec.hpp"

using namespace tmtcg;
using namespace tmtcg::harness;
using namespace tmtcg::mqtt;

namespace {

MockBrokerState fresh(BrokerConfig config = {}) {
    MockBrokerState s;
    s.config = std::move(config);
    return s;
}

Connect connect_as(std::string id, bool clean = true) {
    Connect c;
    c.client_id = std::move(id);
    c.clean_session = clean;
    return c;
}

std::uint8_t connack_rc(const MockOutcome& out) {
    return std::get<ConnAck>(out.responses.at(0)).return_code;
}

std::shared_ptr<EmbeddedEndpoint> embedded(BrokerConfig config = {}) {
    return std::make_shared<EmbeddedEndpoint>(
        std::make_shared<MockBroker>(std::move(config), std::make_shared<VirtualClock>()));
}

Bytes frame(const Packet& p) { return encode(p); }

}  // namespace

TEST(MockHandle, FirstPacketMustBeConnect) {
    auto s = mock_open(fresh(), 1);
    auto [out, next] = mock_handle(s, 1, PingReq{}, 0);
    EXPECT_TRUE(out.close);
    EXPECT_TRUE(out.responses.empty());
}

TEST(MockHandle, SecondConnectCloses) {
    auto s = mock_open(fresh(), 1);
    auto [a, s1] = mock_handle(s, 1, connect_as("a"), 0);
    EXPECT_EQ(connack_rc(a), connack::kAccepted);
    auto [b, s2] = mock_handle(s1, 1, connect_as("a"), 0);
    EXPECT_TRUE(b.close);
    EXPECT_EQ(s2.connected_clients(), 0u);
}

TEST(MockHandle, ConnectionLimit) {
    BrokerConfig cfg;
    cfg.max_connections = 2;
    auto s = fresh(cfg);
    for (ConnId c = 1; c <= 3; ++c) s = mock_open(s, c);
    s = mock_handle(s, 1, connect_as("a"), 0).second;
    s = mock_handle(s, 2, connect_as("b"), 0).second;
    auto [out, next] = mock_handle(s, 3, connect_as("c"), 0);
    EXPECT_EQ(connack_rc(out), connack::kServerUnavailable);
    EXPECT_TRUE(out.close);
    // A client that leaves frees its slot.
    next = mock_drop(next, 1);
    next = mock_open(next, 4);
    EXPECT_EQ(connack_rc(mock_handle(next, 4, connect_as("d"), 0).first), connack::kAccepted);
}

TEST(MockHandle, Credentials) {
    BrokerConfig cfg;
    cfg.username = "user";
    cfg.password = "secret";
    auto s = mock_open(fresh(cfg), 1);
    EXPECT_EQ(connack_rc(mock_handle(s, 1, connect_as("a"), 0).first), connack::kNotAuthorized);
    auto bad = connect_as("a");
    bad.username = "user";
    bad.password = to_bytes("wrong");
    EXPECT_EQ(connack_rc(mock_handle(s, 1, bad, 0).first), connack::kBadCredentials);
    auto good = bad;
    good.password = to_bytes("secret");
    EXPECT_EQ(connack_rc(mock_handle(s, 1, good, 0).first), connack::kAccepted);
}

TEST(MockHandle, ClientIdRules) {
    auto s = mock_open(fresh(), 1);
    EXPECT_EQ(connack_rc(mock_handle(s, 1, connect_as("", false), 0).first), connack::kIdentifierRejected);
    EXPECT_EQ(connack_rc(mock_handle(s, 1, connect_as("", true), 0).first), connack::kAccepted);

    BrokerConfig strict;
    strict.strict_mode = true;
    auto t = mock_open(fresh(strict), 1);
    EXPECT_EQ(connack_rc(mock_handle(t, 1, connect_as(std::string(24, 'x')), 0).first),
              connack::kIdentifierRejected);
    EXPECT_EQ(connack_rc(mock_handle(t, 1, connect_as(std::string(23, 'x')), 0).first), connack::kAccepted);
}

TEST(MockHandle, TakeoverDropsPreviousConnection) {
    auto s = mock_open(mock_open(fresh(), 1), 2);
    s = mock_handle(s, 1, connect_as("dup"), 0).second;
    auto [out, next] = mock_handle(s, 2, connect_as("dup"), 0);
    EXPECT_EQ(connack_rc(out), connack::kAccepted);
    EXPECT_EQ(out.closed_others, std::vector<ConnId>{1});
    EXPECT_EQ(next.clients.at("dup"), 2u);

    BrokerConfig strict;
    strict.strict_mode = true;
    auto t = mock_open(mock_open(fresh(strict), 1), 2);
    t = mock_handle(t, 1, connect_as("dup"), 0).second;
    EXPECT_EQ(connack_rc(mock_handle(t, 2, connect_as("dup"), 0).first), connack::kIdentifierRejected);
}

TEST(MockHandle, PersistentSessionSurvivesReconnect) {
    auto s = mock_open(fresh(), 1);
    s = mock_handle(s, 1, connect_as("p", false), 0).second;
    s = mock_handle(s, 1, Subscribe{1, {{"a/#", 1}}}, 0).second;
    s = mock_drop(s, 1);
    s = mock_open(s, 2);
    auto [out, next] = mock_handle(s, 2, connect_as("p", false), 0);
    EXPECT_TRUE(std::get<ConnAck>(out.responses.at(0)).session_present);
    EXPECT_EQ(next.sessions.at("p").subscriptions.at("a/#"), 1);
}

TEST(MockHandle, PublishAckAndDelivery) {
    auto s = mock_open(mock_open(fresh(), 1), 2);
    s = mock_handle(s, 1, connect_as("sub"), 0).second;
    s = mock_handle(s, 2, connect_as("pub"), 0).second;
    s = mock_handle(s, 1, Subscribe{7, {{"sensors/+", 0}}}, 0).second;
    Publish p{.topic = "sensors/temp", .payload = to_bytes("21"), .qos = 1, .packet_id = 9};
    auto [out, next] = mock_handle(s, 2, p, 0);
    ASSERT_EQ(out.responses.size(), 1u);
    EXPECT_EQ(out.responses[0], Packet{PubAck{9}});
    ASSERT_EQ(out.deliveries.size(), 1u);
    EXPECT_EQ(out.deliveries[0].conn, 1u);
    const auto& fwd = std::get<Publish>(out.deliveries[0].packet);
    EXPECT_EQ(fwd.qos, 0);  // min(publish, granted)
    EXPECT_EQ(fwd.payload, to_bytes("21"));
}

TEST(MockHandle, PublishRateLimitCloses) {
    BrokerConfig cfg;
    cfg.max_publish_per_second = 3;
    auto s = mock_open(fresh(cfg), 1);
    s = mock_handle(s, 1, connect_as("fast"), 0).second;
    const Publish p{.topic = "t", .payload = {}};
    for (int i = 0; i < 3; ++i) {
        auto [out, next] = mock_handle(s, 1, p, 10 * i);
        EXPECT_FALSE(out.close);
        s = next;
    }
    EXPECT_TRUE(mock_handle(s, 1, p, 50).first.close);
    // Outside the one-second window the budget is back.
    EXPECT_FALSE(mock_handle(s, 1, p, 1100).first.close);
}

TEST(MockHandle, StrictModeRefusesHashSubscription) {
    BrokerConfig cfg;
    cfg.strict_mode = true;
    auto s = mock_open(fresh(cfg), 1);
    s = mock_handle(s, 1, connect_as("c"), 0).second;
    auto [out, next] = mock_handle(s, 1, Subscribe{3, {{"#", 0}, {"a", 1}}}, 0);
    EXPECT_EQ(out.responses.at(0), Packet{(SubAck{3, {kSubAckFailure, 1}})});
}

TEST(MockHandle, ServerPacketsFromClientClose) {
    auto s = mock_open(fresh(), 1);
    s = mock_handle(s, 1, connect_as("c"), 0).second;
    EXPECT_TRUE(mock_handle(s, 1, PingResp{}, 0).first.close);
    EXPECT_TRUE(mock_handle(s, 1, ConnAck{}, 0).first.close);
}

TEST(MockHandle, IsPure) {
    auto s = mock_open(fresh(), 1);
    const auto copy = s;
    const auto a = mock_handle(s, 1, connect_as("x"), 0);
    const auto b = mock_handle(s, 1, connect_as("x"), 0);
    EXPECT_EQ(s, copy);
    EXPECT_EQ(a, b);
}

TEST(ProtocolCheck, CleanAndDirtyUnits) {
    EXPECT_FALSE(protocol_check(frame(PingReq{})).has_value());
    EXPECT_TRUE(protocol_check(frame(PingResp{})).has_value());
    EXPECT_TRUE(protocol_check(Bytes{0xC0}).has_value());
    EXPECT_TRUE(protocol_check(Bytes{}).has_value());
}

TEST(MockBrokerStream, SplitFramesAndOversizeDrop) {
    BrokerConfig cfg;
    cfg.max_packet_bytes = 32;
    MockBroker broker(cfg, std::make_shared<VirtualClock>());
    const auto conn = *broker.open();
    const auto c = frame(connect_as("s"));
    broker.feed(conn, ByteView(c.data(), 3));
    EXPECT_TRUE(broker.take(conn).bytes.empty());
    broker.feed(conn, ByteView(c.data() + 3, c.size() - 3));
    const auto reply = broker.take(conn);
    EXPECT_EQ(reply.bytes, frame(ConnAck{}));
    EXPECT_FALSE(reply.closed);

    broker.feed(conn, frame(Publish{.topic = "t", .payload = Bytes(64, 0)}));
    EXPECT_TRUE(broker.take(conn).closed);
}

TEST(MockBrokerStream, HaltRefusesConnections) {
    MockBroker broker({}, std::make_shared<VirtualClock>());
    broker.halt();
    EXPECT_FALSE(broker.open().has_value());
    broker.resume();
    EXPECT_TRUE(broker.open().has_value());
}

TEST(Expectation, DerivedFromFrame) {
    EXPECT_EQ(expectation_for_frame(frame(connect_as("a"))), Expectation::reply(PacketType::ConnAck));
    EXPECT_EQ(expectation_for_frame(frame(Subscribe{4, {{"a", 0}}})), Expectation::reply(PacketType::SubAck, 4));
    EXPECT_EQ(expectation_for_frame(frame(Publish{.topic = "a", .payload = {}})), Expectation::silence());
    EXPECT_EQ(expectation_for_frame(frame(Disconnect{})), Expectation::silence(true));
    EXPECT_EQ(expectation_for_frame(Bytes{0xF0, 0x00}), Expectation::closure());
    EXPECT_EQ(expectation_for_frame(frame(PingResp{})), Expectation::closure());
}

TEST(Session, VerdictClassification) {
    auto ep = embedded();
    auto s = Session::open(ep);
    EXPECT_EQ(s.phase(), Phase::Fresh);
    EXPECT_EQ(s.send_and_observe(frame(connect_as("v"))).verdict, Verdict::Accepted);
    EXPECT_EQ(s.phase(), Phase::MqttConnected);
    EXPECT_EQ(s.client_id(), std::optional<std::string>("v"));
    EXPECT_EQ(s.send_and_observe(frame(PingReq{})).verdict, Verdict::Accepted);
    EXPECT_EQ(s.send_and_observe(frame(Publish{.topic = "a", .payload = {}})).verdict, Verdict::Accepted);
    EXPECT_EQ(s.send_and_observe(frame(connect_as("v"))).verdict, Verdict::ConnectionClosed);
    EXPECT_EQ(s.phase(), Phase::Closed);
    EXPECT_EQ(s.send_and_observe(frame(PingReq{})).verdict, Verdict::ConnectionClosed);
}

TEST(Session, RefusedConnectIsRejected) {
    BrokerConfig cfg;
    cfg.username = "u";
    auto s = Session::open(embedded(cfg));
    EXPECT_EQ(s.send_and_observe(frame(connect_as("v"))).verdict, Verdict::Rejected);
    EXPECT_EQ(s.phase(), Phase::Closed);

    BrokerConfig strict;
    strict.strict_mode = true;
    auto t = Session::open(embedded(strict));
    t.send_and_observe(frame(connect_as("v")));
    const auto fb = t.send_and_observe(frame(Subscribe{2, {{"#", 0}}}));
    EXPECT_EQ(fb.verdict, Verdict::Rejected);
}

TEST(Session, DisconnectAcceptedAndClosed) {
    auto s = Session::open(embedded());
    s.send_and_observe(frame(connect_as("v")));
    EXPECT_EQ(s.send_and_observe(frame(Disconnect{})).verdict, Verdict::Accepted);
    EXPECT_EQ(s.phase(), Phase::Closed);
}

TEST(Session, TruncatedFrameGetsNoResponse) {
    auto s = Session::open(embedded());
    s.send_and_observe(frame(connect_as("v")));
    const auto f = encode_malformed(TruncatedFrame{PingReq{}, 1});
    EXPECT_EQ(s.send_and_observe(f).verdict, Verdict::NoResponse);
}

TEST(Session, VirtualTimeAdvancesPerSend) {
    auto ep = embedded();
    auto s = Session::open(ep);
    const auto before = ep->clock().now_ms();
    const auto fb = s.send_and_observe(frame(connect_as("v")));
    EXPECT_EQ(fb.latency_ms, 0);
    EXPECT_EQ(ep->clock().now_ms() - before, SessionOptions{}.virtual_step_ms);
}

TEST(Session, ProbeLiveness) {
    auto ep = embedded();
    EXPECT_TRUE(probe_liveness(ep));
    ep->broker().halt();
    EXPECT_FALSE(probe_liveness(ep));
    EXPECT_THROW(Session::open(ep), OpenError);
}

TEST(Target, EnvironmentDigestTracksConfig) {
    BrokerConfig a, b;
    b.max_connections = 5;
    EXPECT_EQ(Target::embedded(a).environment_digest(), Target::embedded(a).environment_digest());
    EXPECT_NE(Target::embedded(a).environment_digest(), Target::embedded(b).environment_digest());
    EXPECT_EQ(Target::embedded(a).environment_digest(), Target::tcp("127.0.0.1", 1, a).environment_digest());
    EXPECT_NE(Target::tcp("127.0.0.1", 1).environment_digest(), Target::embedded(a).environment_digest());
    const auto t = Target::embedded(a);
    EXPECT_NE(t.fresh_endpoint(), t.fresh_endpoint());
}

// The same transmissions give the same verdicts in-process and over TCP.
TEST(TcpTransport, MatchesEmbeddedVerdicts) {
    auto broker = std::make_shared<MockBroker>(BrokerConfig{}, std::make_shared<SteadyClock>());
    MockServer server(broker);
    auto tcp = std::make_shared<TcpEndpoint>("127.0.0.1", server.port());

    const std::vector<Bytes> script{
        frame(connect_as("eq")),
        frame(Subscribe{1, {{"sensors/#", 1}}}),
        frame(Publish{.topic = "sensors/temp", .payload = to_bytes("x"), .qos = 1, .packet_id = 2}),
        frame(Unsubscribe{3, {"sensors/#"}}),
        frame(PingReq{}),
        frame(connect_as("eq")),
        frame(PingReq{}),
    };
    SessionOptions opts;
    opts.timeout_ms = 1000;
    auto over_tcp = Session::open(tcp, opts);
    auto in_process = Session::open(embedded(), opts);
    for (const auto& f : script) {
        const auto a = over_tcp.send_and_observe(f);
        const auto b = in_process.send_and_observe(f);
        EXPECT_EQ(a.verdict, b.verdict) << describe(std::get<Decoded>(decode(f)).packet);
        EXPECT_EQ(a.packets, b.packets);
        EXPECT_EQ(over_tcp.phase(), in_process.phase());
    }
    over_tcp.close();
    EXPECT_TRUE(probe_liveness(tcp, opts));
    server.stop();
}

TEST(TcpTransport, UnreachablePortFailsProbe) {
    std::uint16_t port;
    {
        auto broker = std::make_shared<MockBroker>(BrokerConfig{}, std::make_shared<SteadyClock>());
        MockServer server(broker);
        port = server.port();
    }
    SessionOptions opts;
    opts.timeout_ms = 300;
    EXPECT_FALSE(probe_liveness(std::make_shared<TcpEndpoint>("127.0.0.1", port, 300), opts));
}
