#pragma once

// Reference oracles and random input builders shared by unit and acceptance tests.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "tmtcg/catalog.hpp"
#include "tmtcg/harness/mock_broker.hpp"
#include "tmtcg/mqtt/codec.hpp"
#include "tmtcg/mqtt/packet.hpp"
#include "tmtcg/risk.hpp"
#include "tmtcg/rng.hpp"
#include "tmtcg/threat_model.hpp"

namespace tmtcg::support {

// ---------------------------------------------------------------- threats

/// Random valid DFD with at most `max_elements` elements.
inline threat::DfdModel random_dfd(Rng& rng, std::size_t max_elements = 20) {
    using threat::ElementKind;
    threat::DfdModel m;
    const std::size_t total = rng.between(2, max_elements);
    const std::size_t boundaries = rng.uniform(std::min<std::size_t>(4, total / 3 + 1));
    std::size_t nodes = rng.between(2, std::max<std::size_t>(2, total - boundaries));
    if (boundaries + nodes > total) nodes = total - boundaries;
    const std::size_t flows = total - boundaries - nodes;

    std::vector<std::string> node_ids, boundary_ids;
    for (std::size_t i = 0; i < boundaries; ++i) {
        threat::DfdElement b;
        b.id = "tb" + std::to_string(i);
        b.name = "Zone " + std::to_string(i);
        b.kind = ElementKind::TrustBoundary;
        boundary_ids.push_back(b.id);
        m.elements.push_back(b);
    }
    static constexpr ElementKind kNodeKinds[] = {ElementKind::Process, ElementKind::DataStore,
                                                 ElementKind::ExternalEntity};
    for (std::size_t i = 0; i < nodes; ++i) {
        threat::DfdElement n;
        n.id = "n" + std::to_string(i);
        n.name = rng.chance(0.3) ? "" : "Node " + std::to_string(i);
        n.kind = kNodeKinds[rng.uniform(3)];
        node_ids.push_back(n.id);
        m.elements.push_back(n);
        if (!boundary_ids.empty() && rng.chance(0.6)) {
            m.boundary_membership[n.id] = boundary_ids[rng.uniform(boundary_ids.size())];
        }
    }
    for (std::size_t i = 0; i < flows; ++i) {
        threat::DfdElement f;
        f.id = "f" + std::to_string(i);
        f.name = "Flow " + std::to_string(i);
        f.kind = ElementKind::DataFlow;
        const auto s = rng.uniform(node_ids.size());
        auto t = rng.uniform(node_ids.size() - 1);
        if (t >= s) ++t;
        f.source_id = node_ids[s];
        f.target_id = node_ids[t];
        m.elements.push_back(f);
    }
    // Shuffle so the element order carries no meaning.
    for (std::size_t i = m.elements.size(); i > 1; --i) std::swap(m.elements[i - 1], m.elements[rng.uniform(i)]);
    return m;
}

/// Random rule table; every template satisfies check_template.
inline std::vector<threat::ThreatTemplate> random_templates(Rng& rng) {
    std::vector<threat::ThreatTemplate> out;
    const std::size_t n = rng.between(1, 8);
    for (std::size_t i = 0; i < n; ++i) {
        threat::ThreatTemplate t;
        t.template_id = "rule" + std::to_string(i);
        t.category = threat::kAllCategories[rng.uniform(threat::kAllCategories.size())];
        for (auto k : threat::kAllElementKinds) {
            if (rng.chance(0.4)) t.applies_to.insert(k);
        }
        if (t.applies_to.empty()) t.applies_to.insert(threat::kAllElementKinds[rng.uniform(5)]);
        t.requires_boundary_crossing = t.applies_to.count(threat::ElementKind::DataFlow) && rng.chance(0.5);
        t.title = "Rule " + std::to_string(i) + " on {element}";
        out.push_back(t);
    }
    return out;
}

/// Brute force: every (template, element) pair, crossing decided by a
/// linear scan of the membership table.
inline std::set<std::tuple<std::string, std::string, threat::Category>> oracle_threats(
    const threat::DfdModel& m, const std::vector<threat::ThreatTemplate>& templates) {
    auto zone_of = [&](const std::string& id) -> std::string {
        for (const auto& [element, boundary] : m.boundary_membership) {
            if (element == id) return "in:" + boundary;
        }
        return "outside";
    };
    std::set<std::tuple<std::string, std::string, threat::Category>> out;
    for (const auto& t : templates) {
        for (const auto& e : m.elements) {
            bool kind_ok = false;
            for (auto k : t.applies_to) kind_ok = kind_ok || k == e.kind;
            if (!kind_ok) continue;
            if (t.requires_boundary_crossing) {
                if (e.kind != threat::ElementKind::DataFlow) continue;
                if (zone_of(e.source_id) == zone_of(e.target_id)) continue;
            }
            out.emplace(t.template_id + "@" + e.id, e.id, t.category);
        }
    }
    return out;
}

inline std::string random_text(Rng& rng, std::size_t max_len) {
    static const std::vector<std::string> kPieces{"a", "b", "Z", "0", " ", "&", "<", ">", "\"", "'", "\xc3\xa9",
                                                  "\xe2\x82\xac", "{", "}", "-", "_", "\t"};
    std::string s;
    const auto n = rng.uniform(max_len + 1);
    for (std::size_t i = 0; i < n; ++i) s += kPieces[rng.uniform(kPieces.size())];
    return s;
}

/// Sorted, uniquely identified scored threats with awkward titles.
inline std::vector<risk::ScoredThreat> random_scored_threats(Rng& rng) {
    std::map<std::string, risk::ScoredThreat> by_id;
    const std::size_t n = rng.uniform(15);
    for (std::size_t i = 0; i < n; ++i) {
        risk::ScoredThreat s;
        s.threat.template_id = "t." + std::to_string(rng.uniform(6));
        s.threat.element_id = "e" + std::to_string(rng.uniform(10));
        s.threat.threat_id = threat::Threat::make_id(s.threat.template_id, s.threat.element_id);
        s.threat.category = threat::kAllCategories[rng.uniform(6)];
        s.threat.title = random_text(rng, 12);
        s.likelihood = static_cast<int>(rng.between(1, 5));
        s.impact = static_cast<int>(rng.between(1, 5));
        s.score = s.likelihood * s.impact;
        s.selected = rng.chance(0.5);
        by_id[s.threat.threat_id] = s;
    }
    std::vector<risk::ScoredThreat> out;
    for (auto& [id, s] : by_id) out.push_back(s);
    return out;
}

// ---------------------------------------------------------------- codec

/// Remaining-length encoding by repeated division, as written in the standard.
inline Bytes oracle_varint(std::uint32_t x) {
    Bytes out;
    do {
        std::uint8_t b = x % 128;
        x /= 128;
        if (x > 0) b |= 0x80;
        out.push_back(b);
    } while (x > 0);
    return out;
}

inline std::optional<std::uint32_t> oracle_varint_decode(const Bytes& in) {
    std::uint32_t multiplier = 1, value = 0;
    for (std::size_t i = 0; i < in.size() && i < 4; ++i) {
        value += (in[i] & 0x7F) * multiplier;
        if (!(in[i] & 0x80)) return value;
        multiplier *= 128;
    }
    return std::nullopt;
}

inline std::string random_level(Rng& rng) {
    static const std::vector<std::string> kLevels{"a", "b", "sensors", "temp", "x1", "\xc3\xa9t\xc3\xa9", "", "$sys"};
    return kLevels[rng.uniform(kLevels.size())];
}

inline std::string random_topic(Rng& rng) {
    std::string t = random_level(rng);
    const auto levels = rng.uniform(4);
    for (std::size_t i = 0; i < levels; ++i) t += "/" + random_level(rng);
    return t.empty() ? "t" : t;
}

inline std::string random_filter(Rng& rng) {
    std::string f;
    const auto levels = rng.between(1, 4);
    for (std::size_t i = 0; i < levels; ++i) {
        if (i) f += "/";
        const auto r = rng.uniform(6);
        if (r == 0) f += "+";
        else if (r == 1 && i + 1 == levels) f += "#";
        else f += random_level(rng);
    }
    return f.empty() ? "#" : f;
}

inline Bytes random_payload(Rng& rng, std::size_t max_len) {
    Bytes b(rng.uniform(max_len + 1));
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.uniform(256));
    return b;
}

inline std::uint16_t random_pid(Rng& rng) { return static_cast<std::uint16_t>(rng.between(1, 0xFFFF)); }

/// Random packet that satisfies every encoder invariant.
inline mqtt::Packet random_packet(Rng& rng) {
    using namespace mqtt;
    switch (rng.uniform(11)) {
        case 0: {
            Connect c;
            c.client_id = rng.chance(0.1) ? "" : "c" + std::to_string(rng.uniform(1'000'000));
            c.clean_session = rng.chance(0.5);
            c.keep_alive_s = static_cast<std::uint16_t>(rng.uniform(0x10000));
            if (rng.chance(0.5)) {
                c.username = random_topic(rng);
                if (rng.chance(0.5)) c.password = random_payload(rng, 20);
            }
            return c;
        }
        case 1: {
            ConnAck a;
            a.return_code = static_cast<std::uint8_t>(rng.uniform(6));
            a.session_present = a.return_code == 0 && rng.chance(0.5);
            return a;
        }
        case 2: {
            Publish p;
            p.topic = random_topic(rng);
            p.payload = random_payload(rng, rng.chance(0.05) ? 300 : 40);
            p.qos = static_cast<std::uint8_t>(rng.uniform(2));
            p.retain = rng.chance(0.3);
            if (p.qos == 1) {
                p.packet_id = random_pid(rng);
                p.dup = rng.chance(0.3);
            }
            return p;
        }
        case 3: return PubAck{random_pid(rng)};
        case 4: {
            Subscribe s;
            s.packet_id = random_pid(rng);
            const auto n = rng.between(1, 4);
            for (std::size_t i = 0; i < n; ++i) {
                s.subscriptions.push_back({random_filter(rng), static_cast<std::uint8_t>(rng.uniform(2))});
            }
            return s;
        }
        case 5: {
            SubAck s;
            s.packet_id = random_pid(rng);
            const auto n = rng.between(1, 4);
            static constexpr std::uint8_t kCodes[] = {0, 1, kSubAckFailure};
            for (std::size_t i = 0; i < n; ++i) s.return_codes.push_back(kCodes[rng.uniform(3)]);
            return s;
        }
        case 6: {
            Unsubscribe u;
            u.packet_id = random_pid(rng);
            const auto n = rng.between(1, 4);
            for (std::size_t i = 0; i < n; ++i) u.filters.push_back(random_filter(rng));
            return u;
        }
        case 7: return UnsubAck{random_pid(rng)};
        case 8: return PingReq{};
        case 9: return PingResp{};
        default: return Disconnect{};
    }
}

// ---------------------------------------------------------------- topics

/// Recursive matcher over split levels, independent of the production one.
inline bool oracle_topic_match(const std::vector<std::string>& f, std::size_t fi, const std::vector<std::string>& t,
                               std::size_t ti) {
    if (fi == f.size()) return ti == t.size();
    if (f[fi] == "#") return true;
    if (ti == t.size()) return false;
    if (f[fi] == "+" || f[fi] == t[ti]) return oracle_topic_match(f, fi + 1, t, ti + 1);
    return false;
}

inline std::vector<std::string> split_levels(const std::string& s) {
    std::vector<std::string> out{""};
    for (char c : s) {
        if (c == '/') out.emplace_back();
        else out.back() += c;
    }
    return out;
}

inline bool oracle_matches(const std::string& filter, const std::string& topic) {
    const auto f = split_levels(filter);
    const auto t = split_levels(topic);
    if (!topic.empty() && topic[0] == '$' && (f[0] == "+" || f[0] == "#")) return false;
    return oracle_topic_match(f, 0, t, 0);
}

// ---------------------------------------------------------------- broker fold

/// Replays the frames of a case through mock_handle alone and reports whether
/// each step got the answer a conforming broker owes it.
inline std::vector<bool> fold_accepts(const harness::BrokerConfig& config,
                                      const std::vector<catalog::BoundAction>& actions) {
    using namespace mqtt;
    harness::MockBrokerState state;
    state.config = config;
    constexpr harness::ConnId kConn = 1;
    state = harness::mock_open(state, kConn);
    std::int64_t now = 0;
    bool open = true;
    std::vector<bool> out;
    for (const auto& a : actions) {
        bool ok = open && a.frames.size() == 1;
        if (ok) {
            const auto decoded = decode(a.frames.front());
            const auto* d = std::get_if<Decoded>(&decoded);
            ok = d && d->consumed == a.frames.front().size();
            if (ok) {
                now += 100;
                auto [outcome, next] = harness::mock_handle(state, kConn, d->packet, now);
                state = std::move(next);
                const auto type = type_of(d->packet);
                auto has = [&](PacketType want) {
                    return std::any_of(outcome.responses.begin(), outcome.responses.end(),
                                       [&](const Packet& p) { return type_of(p) == want; });
                };
                switch (type) {
                    case PacketType::Connect:
                        ok = !outcome.close && has(PacketType::ConnAck) &&
                             std::get<ConnAck>(outcome.responses.front()).return_code == 0;
                        break;
                    case PacketType::Publish:
                        ok = !outcome.close &&
                             (std::get<Publish>(d->packet).qos == 0 || has(PacketType::PubAck));
                        break;
                    case PacketType::Subscribe: {
                        ok = !outcome.close && has(PacketType::SubAck);
                        for (const auto& p : outcome.responses) {
                            if (const auto* s = std::get_if<SubAck>(&p)) {
                                ok = ok && std::count(s->return_codes.begin(), s->return_codes.end(),
                                                      kSubAckFailure) == 0;
                            }
                        }
                        break;
                    }
                    case PacketType::Unsubscribe: ok = !outcome.close && has(PacketType::UnsubAck); break;
                    case PacketType::PingReq: ok = !outcome.close && has(PacketType::PingResp); break;
                    case PacketType::Disconnect: ok = true; break;
                    default: ok = false;
                }
                if (outcome.close) open = false;
            }
        }
        out.push_back(ok);
    }
    return out;
}

// ---------------------------------------------------------------- files

/// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& name)
        : path_(std::filesystem::temp_directory_path() / ("tmtcg-test-" + name + "-" + std::to_string(::getpid()))) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace tmtcg::support
