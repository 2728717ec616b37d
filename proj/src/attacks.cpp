#include "tmtcg/attacks.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <optional>
#include <thread>

#include "tmtcg/mqtt/codec.hpp"

namespace tmtcg::attacks {

namespace {

using catalog::ActionKind;
using catalog::BoundAction;
using harness::Expectation;
using harness::Feedback;
using harness::Phase;
using harness::Session;
using harness::Verdict;
using threat::Category;

constexpr int kAfterProbeAttempts = 10;
constexpr auto kAfterProbeDelay = std::chrono::milliseconds(100);

BoundAction attack_action(std::string id, catalog::Params params, std::vector<Bytes> frames) {
    BoundAction a;
    a.kind = ActionKind::Attack;
    a.name = std::move(id);
    a.params = std::move(params);
    a.frames = std::move(frames);
    return a;
}

Bytes concat(const std::vector<Bytes>& frames) {
    Bytes out;
    for (const auto& f : frames) out.insert(out.end(), f.begin(), f.end());
    return out;
}

mqtt::Connect connect_packet(std::string client_id, const harness::SessionOptions& options) {
    mqtt::Connect c;
    c.client_id = std::move(client_id);
    c.clean_session = true;
    c.keep_alive_s = 60;
    if (options.username) c.username = options.username;
    if (options.password && options.username) c.password = to_bytes(*options.password);
    return c;
}

std::optional<Session> open_sibling(const Session& s) {
    try {
        return s.open_sibling();
    } catch (const harness::OpenError&) {
        return std::nullopt;
    }
}

harness::ProbeRecord probe(const Session& s, std::string label, int attempts) {
    bool alive = false;
    for (int i = 0; i < attempts && !alive; ++i) {
        if (i > 0) std::this_thread::sleep_for(kAfterProbeDelay);
        alive = harness::probe_liveness(s.shared_endpoint(), s.options());
    }
    return {std::move(label), s.endpoint().clock().now_ms(), alive};
}

std::string hex8(Rng& rng) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rng.uniform(0x100000000ULL)));
    return buf;
}

// flood_publish ------------------------------------------------------------

BoundAction bind_flood_publish(Rng& rng, const AttackSettings& settings, const Session&) {
    const auto topic = catalog::kTopicPool[rng.uniform(catalog::kTopicPool.size())];
    Bytes payload(settings.flood_publish_payload);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng.uniform(256));
    mqtt::Publish pub;
    pub.topic = topic;
    pub.payload = payload;
    const Bytes frame = mqtt::encode(pub);
    return attack_action("flood_publish",
                         {{"count", std::to_string(settings.flood_publish_count)},
                          {"payload_bytes", std::to_string(payload.size())},
                          {"topic", topic}},
                         std::vector<Bytes>(settings.flood_publish_count, frame));
}

Feedback run_flood_publish(Session& s, const BoundAction& a) {
    auto fb = s.send_and_observe(concat(a.frames), Expectation::silence());
    fb.note = std::to_string(a.frames.size()) + " publishes in one burst";
    return fb;
}

// flood_connect ------------------------------------------------------------

BoundAction bind_flood_connect(Rng& rng, const AttackSettings& settings, const Session& s) {
    const std::string prefix = "tcf-" + hex8(rng) + "-";
    std::vector<Bytes> frames;
    for (std::size_t i = 0; i < settings.flood_connect_connections; ++i) {
        frames.push_back(mqtt::encode(connect_packet(prefix + std::to_string(i), s.options())));
    }
    return attack_action("flood_connect",
                         {{"connections", std::to_string(settings.flood_connect_connections)},
                          {"concurrency", std::to_string(settings.flood_connect_concurrency)},
                          {"client_id_prefix", prefix}},
                         std::move(frames));
}

Feedback run_flood_connect(Session& s, const BoundAction& a) {
    std::size_t concurrency = 1;
    if (auto it = a.params.find("concurrency"); it != a.params.end()) {
        concurrency = std::max<std::size_t>(1, static_cast<std::size_t>(parse_int(it->second)));
    }
    const std::size_t n = a.frames.size();
    std::vector<std::optional<Session>> siblings(n);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> accepted{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            auto sib = open_sibling(s);
            if (!sib) continue;
            const auto fb = sib->send_and_observe(a.frames[i], Expectation::reply(mqtt::PacketType::ConnAck));
            if (fb.verdict == Verdict::Accepted) ++accepted;
            siblings[i] = std::move(sib);
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(concurrency, n); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    Feedback fb;
    fb.probes.push_back(probe(s, "flood_connect:during", 1));
    for (auto& sib : siblings) {
        if (sib) sib->close();
    }
    siblings.clear();
    const int attempts = s.endpoint().clock().is_virtual() ? 1 : kAfterProbeAttempts;
    fb.probes.push_back(probe(s, "flood_connect:after", attempts));

    const std::size_t refused = n - accepted;
    if (!fb.probes.back().alive) {
        fb.verdict = Verdict::SutDown;
    } else {
        fb.verdict = refused > 0 ? Verdict::Rejected : Verdict::Accepted;
    }
    fb.note = std::to_string(accepted.load()) + " of " + std::to_string(n) + " connections accepted";
    return fb;
}

// malformed_frame ----------------------------------------------------------

mqtt::Packet draw_base(Rng& rng) {
    static const char* const kBases[] = {"connect", "publish_qos1", "subscribe", "unsubscribe"};
    const auto* cmd = catalog::find_command(kBases[rng.uniform(std::size(kBases))]);
    return cmd->build(cmd->draw(rng));
}

BoundAction bind_malformed_frame(Rng& rng, const AttackSettings&, const Session&) {
    static constexpr std::uint8_t kReservedBytes[] = {0x00, 0xF0, 0x12, 0x83, 0xC1, 0xE2};
    static constexpr int kDeltas[] = {-3, -2, -1, 1, 2, 3};
    mqtt::MalformationSpec spec;
    switch (rng.uniform(4)) {
        case 0: {
            auto base = draw_base(rng);
            const auto size = mqtt::encode(base).size();
            spec = mqtt::TruncatedFrame{base, static_cast<std::size_t>(rng.between(1, size - 1))};
            break;
        }
        case 1: spec = mqtt::BadRemainingLength{draw_base(rng), kDeltas[rng.uniform(std::size(kDeltas))]}; break;
        case 2: spec = mqtt::ReservedType{kReservedBytes[rng.uniform(std::size(kReservedBytes))]}; break;
        default: spec = mqtt::OversizedClientId{static_cast<std::size_t>(rng.between(0x10000, 70'000))}; break;
    }
    return attack_action("malformed_frame", {{"malformation", mqtt::describe(spec)}}, {mqtt::encode_malformed(spec)});
}

Feedback run_malformed_frame(Session& s, const BoundAction& a) {
    auto fb = s.send_and_observe(a.frames.at(0), Expectation::closure());
    if (s.phase() != Phase::Closed) {
        s.close();
        fb.note = "broker kept the connection; closed by client";
    }
    return fb;
}

// oversized_payload --------------------------------------------------------

BoundAction bind_oversized_payload(Rng& rng, const AttackSettings& settings, const Session&) {
    mqtt::Publish pub;
    pub.topic = catalog::kTopicPool[rng.uniform(catalog::kTopicPool.size())];
    pub.payload.assign(settings.oversized_payload_bytes, static_cast<std::uint8_t>(rng.uniform(256)));
    return attack_action("oversized_payload",
                         {{"bytes", std::to_string(settings.oversized_payload_bytes)}, {"topic", pub.topic}},
                         {mqtt::encode(pub)});
}

Feedback run_oversized_payload(Session& s, const BoundAction& a) {
    return s.send_and_observe(a.frames.at(0), Expectation::silence());
}

// client_id_spoof ----------------------------------------------------------

BoundAction bind_client_id_spoof(Rng& rng, const AttackSettings&, const Session& s) {
    // Only drawn on a connected session, so the victim id is known; the
    // fallback keeps binding total.
    const std::string victim = s.client_id().value_or("tcg-" + hex8(rng));
    return attack_action("client_id_spoof", {{"victim", victim}},
                         {mqtt::encode(connect_packet(victim, s.options())), mqtt::encode(mqtt::Disconnect{})});
}

Feedback run_client_id_spoof(Session& s, const BoundAction& a) {
    Feedback fb;
    auto intruder = open_sibling(s);
    if (!intruder) {
        fb.verdict = Verdict::ConnectionClosed;
        fb.note = "intruder could not connect";
        return fb;
    }
    fb = intruder->send_and_observe(a.frames.at(0), Expectation::reply(mqtt::PacketType::ConnAck));
    if (s.phase() != Phase::Closed) s.observe(Expectation::silence());
    fb.note = s.phase() == Phase::Closed ? "victim connection dropped" : "victim connection kept";
    if (intruder->phase() != Phase::Closed) intruder->send_and_observe(a.frames.at(1), Expectation::silence(true));
    intruder->close();
    return fb;
}

// auth_bypass_probe --------------------------------------------------------

BoundAction bind_auth_bypass_probe(Rng& rng, const AttackSettings&, const Session&) {
    const std::string id = "tcg-" + hex8(rng);
    mqtt::Connect anonymous;
    anonymous.client_id = id;
    mqtt::Connect wrong = anonymous;
    wrong.username = "tcg-intruder";
    wrong.password = to_bytes(hex8(rng));
    return attack_action("auth_bypass_probe", {{"client_id", id}, {"username", *wrong.username}},
                         {mqtt::encode(anonymous), mqtt::encode(wrong), mqtt::encode(mqtt::Disconnect{})});
}

Feedback run_auth_bypass_probe(Session& s, const BoundAction& a) {
    Feedback out;
    std::vector<Verdict> verdicts;
    for (std::size_t i = 0; i < 2; ++i) {
        auto intruder = open_sibling(s);
        if (!intruder) {
            verdicts.push_back(Verdict::ConnectionClosed);
            continue;
        }
        auto fb = intruder->send_and_observe(a.frames.at(i), Expectation::reply(mqtt::PacketType::ConnAck));
        verdicts.push_back(fb.verdict);
        out.packets.insert(out.packets.end(), fb.packets.begin(), fb.packets.end());
        if (intruder->phase() == Phase::MqttConnected) {
            intruder->send_and_observe(a.frames.at(2), Expectation::silence(true));
        }
        intruder->close();
    }
    const auto accepted = std::ranges::count(verdicts, Verdict::Accepted);
    if (accepted > 0) {
        out.verdict = Verdict::Accepted;
        out.note = std::to_string(accepted) + " of 2 unauthenticated connects accepted";
    } else if (std::ranges::all_of(verdicts, [](Verdict v) { return v == Verdict::Rejected; })) {
        out.verdict = Verdict::Rejected;
    } else {
        out.verdict = *std::ranges::find_if(verdicts, [](Verdict v) { return v != Verdict::Rejected; });
    }
    return out;
}

std::vector<AttackPattern> make_library() {
    using V = Verdict;
    std::vector<AttackPattern> lib{
        {"auth_bypass_probe",
         "Connect without or with wrong credentials",
         {Category::ElevationOfPrivilege},
         "CAPEC-115 Authentication Bypass",
         {{"client_id", "tcg- + 8 hex digits"}, {"username", "fixed"}},
         {V::Rejected},
         bind_auth_bypass_probe,
         run_auth_bypass_probe},
        {"client_id_spoof",
         "Connect with a client id that is already in use",
         {Category::Spoofing},
         "CAPEC-151 Identity Spoofing",
         {{"victim", "client id of the attacked session"}},
         {V::Accepted, V::Rejected},
         bind_client_id_spoof,
         run_client_id_spoof},
        {"flood_connect",
         "Open many parallel connections",
         {Category::DenialOfService},
         "CAPEC-125 Flooding",
         {{"connections", ">= 1"}, {"concurrency", ">= 1"}, {"client_id_prefix", "tcf- + 8 hex digits + -"}},
         {V::Accepted, V::Rejected},
         bind_flood_connect,
         run_flood_connect},
        {"flood_publish",
         "Burst of QoS 0 publishes",
         {Category::DenialOfService},
         "CAPEC-125 Flooding",
         {{"count", ">= 1"}, {"payload_bytes", ">= 0"}, {"topic", "topic pool"}},
         {V::Accepted, V::ConnectionClosed},
         bind_flood_publish,
         run_flood_publish},
        {"malformed_frame",
         "Frame that violates the wire format",
         {Category::Tampering},
         "CAPEC-28 Fuzzing",
         {{"malformation", "one malformation variant"}},
         {V::ConnectionClosed, V::NoResponse},
         bind_malformed_frame,
         run_malformed_frame},
        {"oversized_payload",
         "Publish larger than the broker packet limit",
         {Category::DenialOfService},
         "CAPEC-130 Excessive Allocation",
         {{"bytes", "> broker packet limit"}, {"topic", "topic pool"}},
         {V::ConnectionClosed},
         bind_oversized_payload,
         run_oversized_payload},
    };
    return lib;
}

std::size_t setting(const KvConfig& config, const std::string& key, std::size_t fallback, std::size_t min) {
    if (!config.contains(key)) return fallback;
    const auto v = config.get_int(key);
    if (v < static_cast<std::int64_t>(min)) {
        throw ConfigError(config.where(key) + ": " + key + " must be >= " + std::to_string(min));
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

AttackSettings AttackSettings::from_config(const KvConfig& config) {
    AttackSettings s;
    s.flood_publish_count = setting(config, "attack.flood_publish.count", s.flood_publish_count, 1);
    s.flood_publish_payload = setting(config, "attack.flood_publish.payload_bytes", s.flood_publish_payload, 0);
    s.flood_connect_connections =
        setting(config, "attack.flood_connect.connections", s.flood_connect_connections, 1);
    s.flood_connect_concurrency =
        setting(config, "attack.flood_connect.concurrency", s.flood_connect_concurrency, 1);
    s.oversized_payload_bytes = setting(config, "attack.oversized_payload.bytes", s.oversized_payload_bytes, 1);
    return s;
}

bool AttackPattern::is_robust(harness::Verdict v) const {
    return std::ranges::find(robust_verdicts, v) != robust_verdicts.end();
}

const std::vector<AttackPattern>& builtin_attacks() {
    static const std::vector<AttackPattern> library = make_library();
    return library;
}

const AttackPattern* find_attack(const std::vector<AttackPattern>& library, std::string_view id) {
    for (const auto& a : library) {
        if (a.id == id) return &a;
    }
    return nullptr;
}

risk::CategoryAttackIndex category_index(const std::vector<AttackPattern>& library) {
    risk::CategoryAttackIndex index;
    for (const auto& a : library) {
        for (auto c : a.categories) index[c].push_back(a.id);
    }
    for (auto& [c, ids] : index) std::ranges::sort(ids);
    return index;
}

AttackPool select_attacks(const std::map<std::string, double>& weights, const std::vector<AttackPattern>& library) {
    AttackPool pool;
    for (const auto& [id, w] : weights) {
        const auto* a = find_attack(library, id);
        if (a == nullptr) throw ConfigError("unknown attack id: " + id);
        if (w > 0) pool.push_back({a, w});
    }
    return pool;
}

harness::Feedback execute_action(harness::Session& session, const catalog::BoundAction& action,
                                 const std::vector<AttackPattern>& library) {
    if (action.kind == ActionKind::Regular) {
        if (action.frames.size() != 1) throw std::invalid_argument(action.name + ": regular action needs one frame");
        return session.send_and_observe(action.frames[0]);
    }
    const auto* a = find_attack(library, action.name);
    if (a == nullptr) throw std::invalid_argument("unknown attack: " + action.name);
    if (action.frames.empty()) throw std::invalid_argument(action.name + ": attack without frames");
    return a->execute(session, action);
}

}  // namespace tmtcg::attacks
