#include "json_util.hpp"

#include "tmtcg/digest.hpp"
#include "tmtcg/mqtt/codec.hpp"

namespace tmtcg::jsonio {

std::string seal(Json doc) {
    doc.erase("digest");
    doc["digest"] = sha256_hex(std::string_view(doc.dump()));
    return doc.dump(2) + "\n";
}

Json unseal(std::string_view text, std::string_view what) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw FormatError(std::string(what) + ": not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw FormatError(std::string(what) + ": top level must be an object");
    auto it = doc.find("digest");
    if (it == doc.end() || !it->is_string()) throw FormatError(std::string(what) + ": missing digest");
    const std::string stated = *it;
    doc.erase("digest");
    if (sha256_hex(std::string_view(doc.dump())) != stated) {
        throw FormatError(std::string(what) + ": digest mismatch; the file was modified");
    }
    return doc;
}

const Json& member(const Json& j, const char* key, std::string_view path) {
    if (!j.is_object()) throw FormatError(std::string(path) + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(std::string(path) + "." + key + ": missing");
    return *it;
}

namespace {

[[noreturn]] void wrong_type(const char* key, std::string_view path, const char* want) {
    throw FormatError(std::string(path) + "." + key + ": expected " + want);
}

}  // namespace

std::string get_string(const Json& j, const char* key, std::string_view path) {
    const auto& v = member(j, key, path);
    if (!v.is_string()) wrong_type(key, path, "a string");
    return v.get<std::string>();
}

std::uint64_t get_uint(const Json& j, const char* key, std::string_view path) {
    const auto& v = member(j, key, path);
    if (!v.is_number_unsigned()) wrong_type(key, path, "a non-negative integer");
    return v.get<std::uint64_t>();
}

std::int64_t get_int(const Json& j, const char* key, std::string_view path) {
    const auto& v = member(j, key, path);
    if (!v.is_number_integer()) wrong_type(key, path, "an integer");
    return v.get<std::int64_t>();
}

double get_double(const Json& j, const char* key, std::string_view path) {
    const auto& v = member(j, key, path);
    if (!v.is_number()) wrong_type(key, path, "a number");
    return v.get<double>();
}

bool get_bool(const Json& j, const char* key, std::string_view path) {
    const auto& v = member(j, key, path);
    if (!v.is_boolean()) wrong_type(key, path, "a boolean");
    return v.get<bool>();
}

harness::Verdict get_verdict(const Json& j, const char* key, std::string_view path) {
    const auto name = get_string(j, key, path);
    auto v = harness::parse_verdict(name);
    if (!v) throw FormatError(std::string(path) + "." + key + ": unknown verdict " + name);
    return *v;
}

Json feedback_to_json(const harness::Feedback& fb) {
    Json packets = Json::array();
    for (const auto& p : fb.packets) packets.push_back(to_hex(mqtt::encode(p)));
    Json probes = Json::array();
    for (const auto& p : fb.probes) probes.push_back({{"label", p.label}, {"at_ms", p.at_ms}, {"alive", p.alive}});
    return {{"verdict", std::string(harness::to_string(fb.verdict))},
            {"packets", packets},
            {"latency_ms", fb.latency_ms},
            {"probes", probes},
            {"note", fb.note}};
}

harness::Feedback feedback_from_json(const Json& j) {
    constexpr std::string_view path = "observed";
    harness::Feedback fb;
    fb.verdict = get_verdict(j, "verdict", path);
    fb.latency_ms = get_int(j, "latency_ms", path);
    fb.note = get_string(j, "note", path);
    const auto& packets = member(j, "packets", path);
    if (!packets.is_array()) throw FormatError("observed.packets: expected an array");
    for (const auto& p : packets) {
        auto bytes = p.is_string() ? from_hex(p.get<std::string>()) : std::nullopt;
        if (!bytes) throw FormatError("observed.packets: expected hex strings");
        auto result = mqtt::decode(*bytes);
        auto* d = std::get_if<mqtt::Decoded>(&result);
        if (d == nullptr || d->consumed != bytes->size()) throw FormatError("observed.packets: undecodable packet");
        fb.packets.push_back(d->packet);
    }
    const auto& probes = member(j, "probes", path);
    if (!probes.is_array()) throw FormatError("observed.probes: expected an array");
    for (const auto& p : probes) {
        fb.probes.push_back({get_string(p, "label", "probe"), get_int(p, "at_ms", "probe"),
                             get_bool(p, "alive", "probe")});
    }
    return fb;
}

}  // namespace tmtcg::jsonio
