#include "tmtcg/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "tmtcg/digest.hpp"
#include "tmtcg/kv_config.hpp"
#include "tmtcg/risk.hpp"
#include "tmtcg/suite_io.hpp"
#include "tmtcg/threat_model.hpp"
#include "tmtcg/threat_xml.hpp"

namespace tmtcg::pipeline {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kPathKeys{"dfd", "templates", "matrix", "out_dir"};

std::string resolve(const std::string& value, const std::string& base) {
    if (value.empty()) return value;
    const fs::path p(value);
    if (p.is_absolute()) return p.lexically_normal().string();
    return (fs::path(base) / p).lexically_normal().string();
}

std::size_t as_size(const std::string& key, const std::string& value, std::int64_t min) {
    std::int64_t v = 0;
    try {
        v = parse_int(value);
    } catch (const ConfigError&) {
        throw ConfigError(key + ": not an integer: " + value);
    }
    if (v < min) throw ConfigError(key + " must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
}

std::string read_input(const std::string& stage, const std::string& what, const std::string& path) {
    if (path.empty()) throw StageError(stage, "no " + what + " file given");
    try {
        return read_text_file(path);
    } catch (const ConfigError& e) {
        throw StageError(stage, e.what());
    }
}

std::string digest_of(std::string_view text) { return sha256_hex(text); }

}  // namespace

TargetSpec TargetSpec::parse(const std::string& text) {
    TargetSpec t;
    if (text == "embedded") return t;
    constexpr std::string_view kPrefix = "tcp:";
    const auto colon = text.rfind(':');
    if (!text.starts_with(kPrefix) || colon <= kPrefix.size()) {
        throw ConfigError("target must be 'embedded' or 'tcp:<host>:<port>': " + text);
    }
    t.host = text.substr(kPrefix.size(), colon - kPrefix.size());
    const auto port = as_size("target port", text.substr(colon + 1), 1);
    if (port > 65535) throw ConfigError("target port out of range: " + text);
    t.port = static_cast<std::uint16_t>(port);
    return t;
}

std::string TargetSpec::to_string() const { return host ? "tcp:" + *host + ":" + std::to_string(port) : "embedded"; }

const std::vector<std::string>& PipelineConfig::known_keys() {
    static const std::vector<std::string> keys{
        "dfd",
        "templates",
        "matrix",
        "out_dir",
        "target",
        "seed",
        "num_positive",
        "num_negative",
        "num_attack",
        "max_length",
        "attack_probability",
        "rejection_budget",
        "broker.max_connections",
        "broker.max_publish_per_second",
        "broker.max_packet_bytes",
        "broker.strict_mode",
        "broker.username",
        "broker.password",
        "client.username",
        "client.password",
        "session.timeout_ms",
        "session.silence_ms",
        "attack.flood_publish.count",
        "attack.flood_publish.payload_bytes",
        "attack.flood_connect.connections",
        "attack.flood_connect.concurrency",
        "attack.oversized_payload.bytes",
    };
    return keys;
}

PipelineConfig PipelineConfig::from_entries(const std::map<std::string, std::string>& entries,
                                            const std::string& base_dir) {
    const auto& known = known_keys();
    for (const auto& [key, value] : entries) {
        if (std::ranges::find(known, key) == known.end()) throw ConfigError("unknown configuration key: " + key);
    }
    auto get = [&](const std::string& key) -> const std::string* {
        auto it = entries.find(key);
        return it == entries.end() ? nullptr : &it->second;
    };

    PipelineConfig c;
    if (auto v = get("dfd")) c.dfd_path = resolve(*v, base_dir);
    if (auto v = get("templates")) c.templates_path = resolve(*v, base_dir);
    if (auto v = get("matrix")) c.matrix_path = resolve(*v, base_dir);
    c.out_dir = resolve(get("out_dir") ? *get("out_dir") : ".", base_dir);
    if (auto v = get("target")) c.target = TargetSpec::parse(*v);

    if (auto v = get("seed")) {
        try {
            std::size_t used = 0;
            c.gen.seed = std::stoull(*v, &used);
            if (used != v->size()) throw std::invalid_argument(*v);
        } catch (const std::exception&) {
            throw ConfigError("seed: not an unsigned integer: " + *v);
        }
    }
    if (auto v = get("num_positive")) c.gen.num_positive = as_size("num_positive", *v, 0);
    if (auto v = get("num_negative")) c.gen.num_negative = as_size("num_negative", *v, 0);
    if (auto v = get("num_attack")) c.gen.num_attack = as_size("num_attack", *v, 0);
    if (auto v = get("max_length")) c.gen.max_length = as_size("max_length", *v, 1);
    if (auto v = get("attack_probability")) c.gen.attack_probability = parse_double(*v);
    if (auto v = get("rejection_budget")) c.gen.rejection_budget = as_size("rejection_budget", *v, 1);
    c.gen.validate();

    if (auto v = get("broker.max_connections")) c.broker.max_connections = as_size("broker.max_connections", *v, 1);
    if (auto v = get("broker.max_publish_per_second")) {
        c.broker.max_publish_per_second = as_size("broker.max_publish_per_second", *v, 1);
    }
    if (auto v = get("broker.max_packet_bytes")) c.broker.max_packet_bytes = as_size("broker.max_packet_bytes", *v, 2);
    if (auto v = get("broker.strict_mode")) c.broker.strict_mode = parse_bool(*v);
    if (auto v = get("broker.username")) c.broker.username = *v;
    if (auto v = get("broker.password")) c.broker.password = *v;
    if (c.broker.password && !c.broker.username) throw ConfigError("broker.password requires broker.username");
    c.broker_declared = std::ranges::any_of(entries, [](const auto& e) { return e.first.starts_with("broker."); });

    if (auto v = get("client.username")) c.session.username = *v;
    if (auto v = get("client.password")) c.session.password = *v;
    if (auto v = get("session.timeout_ms")) c.session.timeout_ms = static_cast<std::int64_t>(as_size("session.timeout_ms", *v, 1));
    if (auto v = get("session.silence_ms")) c.session.silence_ms = static_cast<std::int64_t>(as_size("session.silence_ms", *v, 1));

    KvConfig attack_keys;
    {
        std::ostringstream text;
        for (const auto& [key, value] : entries) {
            if (key.starts_with("attack.")) text << key << " = " << value << "\n";
        }
        attack_keys = KvConfig::parse(text.str());
    }
    c.attacks = attacks::AttackSettings::from_config(attack_keys);
    return c;
}

PipelineConfig PipelineConfig::load(const std::string& path, const std::map<std::string, std::string>& overrides,
                                     const std::string& overrides_base) {
    const auto file = KvConfig::load(path);
    const std::string base = fs::path(path).parent_path().string();

    std::map<std::string, std::string> merged;
    for (const auto& [key, entry] : file.entries()) {
        const bool is_path = std::ranges::find(kPathKeys, key) != kPathKeys.end();
        merged[key] = is_path ? resolve(entry.value, base.empty() ? "." : base) : entry.value;
    }
    for (const auto& [key, value] : overrides) {
        const bool is_path = std::ranges::find(kPathKeys, key) != kPathKeys.end();
        const std::string v = is_path ? resolve(value, overrides_base) : value;
        auto it = merged.find(key);
        if (it != merged.end() && it->second != v) {
            throw ConfigError(file.where(key) + ": " + key + " = " + it->second +
                              " conflicts with the command line value " + v);
        }
        merged[key] = v;
    }
    return from_entries(merged, ".");
}

harness::Target PipelineConfig::make_target() const {
    if (!target.host) return harness::Target::embedded(broker, session);
    return harness::Target::tcp(*target.host, target.port,
                                broker_declared ? std::optional<harness::BrokerConfig>(broker) : std::nullopt, session);
}

std::string PipelineConfig::threats_path() const { return (fs::path(out_dir) / "threats.xml").string(); }
std::string PipelineConfig::suite_path() const { return (fs::path(out_dir) / "suite.json").string(); }
std::string PipelineConfig::report_path() const { return (fs::path(out_dir) / "report.json").string(); }

std::string derive(const std::string& dfd_path, const std::string& templates_path, const std::string& matrix_path) {
    const std::string stage = "derive";
    const auto dfd_text = read_input(stage, "DFD", dfd_path);
    const auto templates_text = read_input(stage, "templates", templates_path);
    try {
        const auto model = threat::parse_dfd_xml(dfd_text);
        if (const auto violations = threat::validate_dfd(model); !violations.empty()) {
            std::string message = "invalid DFD " + dfd_path + ":";
            for (const auto& v : violations) message += "\n  " + v.element_id + ": " + v.reason;
            throw StageError(stage, message);
        }
        const auto templates = threat::parse_templates_xml(templates_text);
        const auto matrix = matrix_path.empty() ? risk::RiskMatrix::defaults() : risk::RiskMatrix::load(matrix_path);
        const auto threats = threat::derive_threats(model, templates);
        auto scored = risk::assess(threats, model, matrix);
        std::ranges::sort(scored, {}, [](const risk::ScoredThreat& s) { return s.threat.threat_id; });
        return export_threats(scored, {{"dfd-digest", digest_of(dfd_text)},
                                       {"templates-digest", digest_of(templates_text)},
                                       {"matrix-digest", digest_of(matrix.to_text())}});
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

attacks::AttackPool attack_pool_for(const std::string& threats_xml, const std::string& templates_path) {
    const auto doc = import_threat_document(threats_xml);
    const auto templates = threat::parse_templates_xml(read_text_file(templates_path));
    const auto& library = attacks::builtin_attacks();
    const auto weights = risk::prioritized_weights(doc.threats, templates, attacks::category_index(library));
    return attacks::select_attacks(weights, library);
}

gen::TestSuite generate(const std::string& threats_xml, const std::string& templates_path,
                        const PipelineConfig& config) {
    const std::string stage = "generate";
    gen::GenInputs inputs;
    try {
        inputs.pool = attack_pool_for(threats_xml, templates_path);
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
    inputs.attack_settings = config.attacks;
    inputs.threat_digest = digest_of(threats_xml);
    try {
        return gen::generate_suite(config.gen, config.make_target(), inputs);
    } catch (const ConfigError& e) {
        throw StageError(stage, e.what());
    }
}

PipelineResult run(const PipelineConfig& config) {
    PipelineResult result;
    result.threats_path = config.threats_path();
    result.suite_path = config.suite_path();
    result.report_path = config.report_path();

    const auto threats_xml = derive(config.dfd_path, config.templates_path, config.matrix_path);
    try {
        write_text_file(result.threats_path, threats_xml);
    } catch (const std::exception& e) {
        throw StageError("derive", e.what());
    }

    // Each stage reads the previous stage's file, as the separate commands do.
    const auto suite = generate(read_input("generate", "threats", result.threats_path), config.templates_path, config);
    try {
        gen::save_suite(suite, result.suite_path);
    } catch (const std::exception& e) {
        throw StageError("generate", e.what());
    }
    if (!suite.complete) {
        std::string message = "broker stopped answering; partial suite written to " + result.suite_path;
        for (const auto& d : suite.diagnostics) message += "\n  " + d;
        throw StageError("generate", message);
    }

    try {
        const auto loaded = gen::load_suite(result.suite_path);
        result.report = exec::run_suite(loaded, config.make_target());
        exec::save_report(result.report, result.report_path);
    } catch (const exec::SutDownError& e) {
        throw StageError("execute", e.what());
    } catch (const FormatError& e) {
        throw StageError("execute", e.what());
    }
    result.exit_code = exec::exit_code(result.report);
    return result;
}

}  // namespace tmtcg::pipeline
