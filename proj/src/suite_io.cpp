#include "tmtcg/suite_io.hpp"
#include <set>

#include <filesystem>
#include <fstream>

#include "json_util.hpp"
#include "tmtcg/kv_config.hpp"

namespace tmtcg {

void write_text_file(const std::string& path, std::string_view text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("cannot write " + path);
}

namespace gen {

using jsonio::Json;

namespace {

constexpr int kSuiteFormat = 1;

Json action_to_json(const catalog::BoundAction& a) {
    Json frames = Json::array();
    for (const auto& f : a.frames) frames.push_back(to_hex(f));
    Json params = Json::object();
    for (const auto& [k, v] : a.params) params[k] = v;
    return {{"kind", std::string(catalog::to_string(a.kind))}, {"name", a.name}, {"params", params},
            {"frames", frames}};
}

catalog::BoundAction action_from_json(const Json& j, const std::string& path) {
    catalog::BoundAction a;
    const auto kind = jsonio::get_string(j, "kind", path);
    auto k = catalog::parse_action_kind(kind);
    if (!k) throw FormatError(path + ".kind: unknown action kind " + kind);
    a.kind = *k;
    a.name = jsonio::get_string(j, "name", path);
    const auto& params = jsonio::member(j, "params", path);
    if (!params.is_object()) throw FormatError(path + ".params: expected an object");
    for (const auto& [key, value] : params.items()) {
        if (!value.is_string()) throw FormatError(path + ".params." + key + ": expected a string");
        a.params[key] = value.get<std::string>();
    }
    const auto& frames = jsonio::member(j, "frames", path);
    if (!frames.is_array() || frames.empty()) throw FormatError(path + ".frames: expected a non-empty array");
    for (const auto& f : frames) {
        auto bytes = f.is_string() ? from_hex(f.get<std::string>()) : std::nullopt;
        if (!bytes || bytes->empty()) throw FormatError(path + ".frames: expected non-empty hex strings");
        a.frames.push_back(std::move(*bytes));
    }
    if (a.kind == catalog::ActionKind::Regular && a.frames.size() != 1) {
        throw FormatError(path + ".frames: a regular action has exactly one frame");
    }
    return a;
}

}  // namespace

std::string write_suite(const TestSuite& suite) {
    Json cases = Json::array();
    for (const auto& c : suite.cases) {
        Json steps = Json::array();
        for (const auto& s : c.steps) {
            steps.push_back({{"action", action_to_json(s.action)},
                             {"observed", jsonio::feedback_to_json(s.observed)},
                             {"expected", std::string(harness::to_string(s.expected))}});
        }
        cases.push_back({{"case_id", c.case_id},
                         {"kind", std::string(to_string(c.kind))},
                         {"provenance",
                          {{"seed", c.provenance.seed},
                           {"config_digest", c.provenance.config_digest},
                           {"threat_digest", c.provenance.threat_digest}}},
                         {"steps", steps}});
    }
    Json pool = Json::array();
    for (const auto& [id, w] : suite.attack_pool) pool.push_back({{"attack", id}, {"weight", w}});
    const auto& cfg = suite.config;
    const auto& as = suite.attack_settings;
    Json doc{
        {"format", kSuiteFormat},
        {"suite_id", suite.suite_id},
        {"environment",
         {{"digest", suite.environment.digest},
          {"descriptor", suite.environment.descriptor},
          {"text", suite.environment.text},
          {"clock", suite.environment.clock}}},
        {"config",
         {{"seed", cfg.seed},
          {"num_positive", cfg.num_positive},
          {"num_negative", cfg.num_negative},
          {"num_attack", cfg.num_attack},
          {"max_length", cfg.max_length},
          {"attack_probability", cfg.attack_probability},
          {"rejection_budget", cfg.rejection_budget}}},
        {"attack_settings",
         {{"flood_publish_count", as.flood_publish_count},
          {"flood_publish_payload", as.flood_publish_payload},
          {"flood_connect_connections", as.flood_connect_connections},
          {"flood_connect_concurrency", as.flood_connect_concurrency},
          {"oversized_payload_bytes", as.oversized_payload_bytes}}},
        {"attack_pool", pool},
        {"complete", suite.complete},
        {"diagnostics", suite.diagnostics},
        {"cases", cases},
    };
    return jsonio::seal(std::move(doc));
}

TestSuite read_suite(std::string_view text) {
    const Json doc = jsonio::unseal(text, "suite");
    if (jsonio::get_int(doc, "format", "suite") != kSuiteFormat) throw FormatError("suite: unsupported format");

    TestSuite s;
    s.suite_id = jsonio::get_string(doc, "suite_id", "suite");
    const auto& env = jsonio::member(doc, "environment", "suite");
    s.environment = Environment{jsonio::get_string(env, "digest", "environment"),
                                jsonio::get_string(env, "descriptor", "environment"),
                                jsonio::get_string(env, "text", "environment"),
                                jsonio::get_string(env, "clock", "environment")};

    const auto& cfg = jsonio::member(doc, "config", "suite");
    s.config.seed = jsonio::get_uint(cfg, "seed", "config");
    s.config.num_positive = jsonio::get_uint(cfg, "num_positive", "config");
    s.config.num_negative = jsonio::get_uint(cfg, "num_negative", "config");
    s.config.num_attack = jsonio::get_uint(cfg, "num_attack", "config");
    s.config.max_length = jsonio::get_uint(cfg, "max_length", "config");
    s.config.attack_probability = jsonio::get_double(cfg, "attack_probability", "config");
    s.config.rejection_budget = jsonio::get_uint(cfg, "rejection_budget", "config");

    const auto& as = jsonio::member(doc, "attack_settings", "suite");
    s.attack_settings.flood_publish_count = jsonio::get_uint(as, "flood_publish_count", "attack_settings");
    s.attack_settings.flood_publish_payload = jsonio::get_uint(as, "flood_publish_payload", "attack_settings");
    s.attack_settings.flood_connect_connections =
        jsonio::get_uint(as, "flood_connect_connections", "attack_settings");
    s.attack_settings.flood_connect_concurrency =
        jsonio::get_uint(as, "flood_connect_concurrency", "attack_settings");
    s.attack_settings.oversized_payload_bytes = jsonio::get_uint(as, "oversized_payload_bytes", "attack_settings");

    for (const auto& e : jsonio::member(doc, "attack_pool", "suite")) {
        s.attack_pool.emplace_back(jsonio::get_string(e, "attack", "attack_pool"),
                                   jsonio::get_double(e, "weight", "attack_pool"));
    }
    s.complete = jsonio::get_bool(doc, "complete", "suite");
    for (const auto& d : jsonio::member(doc, "diagnostics", "suite")) {
        if (!d.is_string()) throw FormatError("suite.diagnostics: expected strings");
        s.diagnostics.push_back(d.get<std::string>());
    }

    const auto& cases = jsonio::member(doc, "cases", "suite");
    if (!cases.is_array()) throw FormatError("suite.cases: expected an array");
    std::set<std::string> ids;
    for (const auto& c : cases) {
        TestCase tc;
        tc.case_id = jsonio::get_string(c, "case_id", "case");
        const std::string path = "case " + tc.case_id;
        if (!ids.insert(tc.case_id).second) throw FormatError(path + ": duplicate case id");
        const auto kind = jsonio::get_string(c, "kind", path);
        auto k = parse_case_kind(kind);
        if (!k) throw FormatError(path + ": unknown kind " + kind);
        tc.kind = *k;
        const auto& prov = jsonio::member(c, "provenance", path);
        tc.provenance = Provenance{jsonio::get_uint(prov, "seed", path), jsonio::get_string(prov, "config_digest", path),
                                   jsonio::get_string(prov, "threat_digest", path)};
        const auto& steps = jsonio::member(c, "steps", path);
        if (!steps.is_array()) throw FormatError(path + ".steps: expected an array");
        for (const auto& st : steps) {
            Step step;
            step.action = action_from_json(jsonio::member(st, "action", path), path + ".action");
            step.observed = jsonio::feedback_from_json(jsonio::member(st, "observed", path));
            step.expected = jsonio::get_verdict(st, "expected", path);
            tc.steps.push_back(std::move(step));
        }
        s.cases.push_back(std::move(tc));
    }
    return s;
}

void save_suite(const TestSuite& suite, const std::string& path) { write_text_file(path, write_suite(suite)); }

TestSuite load_suite(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const ConfigError& e) {
        throw FormatError(e.what());
    }
    return read_suite(text);
}

}  // namespace gen
}  // namespace tmtcg
