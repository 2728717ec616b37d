// Command line front end: derive, generate, execute, diff, pipeline, serve-mock.

#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "tmtcg/executor.hpp"
#include "tmtcg/harness/mock_server.hpp"
#include "tmtcg/kv_config.hpp"
#include "tmtcg/pipeline.hpp"
#include "tmtcg/suite_io.hpp"

using namespace tmtcg;

namespace {

constexpr int kUsageError = 2;

/// Flags that mirror configuration keys. Each subcommand registers the ones
/// it uses; set flags are merged with the config file.
struct Overrides {
    std::string config_path;
    std::map<std::string, std::string> values;

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::string>(
            flag, [this, key](const std::string& v) { values[key] = v; }, help + " [" + key + "]");
    }

    void add_config(CLI::App* app) { app->add_option("--config", config_path, "key = value configuration file"); }

    pipeline::PipelineConfig resolve() const {
        if (config_path.empty()) return pipeline::PipelineConfig::from_entries(values, ".");
        return pipeline::PipelineConfig::load(config_path, values, ".");
    }
};

void add_model_flags(CLI::App* app, Overrides& o) {
    o.add(app, "--dfd", "dfd", "data flow diagram XML");
    o.add(app, "--templates", "templates", "threat templates XML");
    o.add(app, "--matrix", "matrix", "risk matrix file");
    o.add(app, "--out-dir", "out_dir", "directory for artifacts");
}

void add_generation_flags(CLI::App* app, Overrides& o) {
    o.add(app, "--seed", "seed", "random seed");
    o.add(app, "--num-positive", "num_positive", "positive cases");
    o.add(app, "--num-negative", "num_negative", "negative cases");
    o.add(app, "--num-attack", "num_attack", "attack cases");
    o.add(app, "--max-length", "max_length", "maximum steps per case");
    o.add(app, "--attack-probability", "attack_probability", "chance of drawing an attack per step");
    o.add(app, "--rejection-budget", "rejection_budget", "consecutive rejected candidates before stopping");
    o.add(app, "--flood-publish-count", "attack.flood_publish.count", "publishes per flood");
    o.add(app, "--flood-connect-connections", "attack.flood_connect.connections", "connections per flood");
    o.add(app, "--flood-connect-concurrency", "attack.flood_connect.concurrency", "parallel connection attempts");
    o.add(app, "--oversized-bytes", "attack.oversized_payload.bytes", "oversized payload size");
}

void add_target_flags(CLI::App* app, Overrides& o) {
    o.add(app, "--target", "target", "embedded or tcp:<host>:<port>");
    o.add(app, "--max-connections", "broker.max_connections", "broker connection limit");
    o.add(app, "--max-publish-rate", "broker.max_publish_per_second", "broker publish limit per connection");
    o.add(app, "--max-packet-bytes", "broker.max_packet_bytes", "broker packet size limit");
    o.add(app, "--strict", "broker.strict_mode", "broker strict mode (true/false)");
    o.add(app, "--broker-username", "broker.username", "username the broker requires");
    o.add(app, "--broker-password", "broker.password", "password the broker requires");
    o.add(app, "--username", "client.username", "username sent by test clients");
    o.add(app, "--password", "client.password", "password sent by test clients");
    o.add(app, "--timeout-ms", "session.timeout_ms", "response timeout");
    o.add(app, "--silence-ms", "session.silence_ms", "listen window when no response is due");
}

int cmd_derive(const Overrides& o, const std::string& out) {
    const auto cfg = o.resolve();
    const auto xml = pipeline::derive(cfg.dfd_path, cfg.templates_path, cfg.matrix_path);
    const auto path = out.empty() ? cfg.threats_path() : out;
    write_text_file(path, xml);
    std::cout << "threats written to " << path << "\n";
    return 0;
}

int cmd_generate(const Overrides& o, const std::string& threats, const std::string& out) {
    const auto cfg = o.resolve();
    const auto threats_path = threats.empty() ? cfg.threats_path() : threats;
    std::string xml;
    try {
        xml = read_text_file(threats_path);
    } catch (const ConfigError& e) {
        throw pipeline::StageError("generate", e.what());
    }
    const auto suite = pipeline::generate(xml, cfg.templates_path, cfg);
    const auto path = out.empty() ? cfg.suite_path() : out;
    gen::save_suite(suite, path);
    for (const auto& d : suite.diagnostics) std::cerr << "generate: " << d << "\n";
    std::cout << suite.cases.size() << " cases written to " << path << "\n";
    if (!suite.complete) {
        std::cerr << "generate: broker stopped answering; the suite is partial\n";
        return kUsageError;
    }
    return 0;
}

int cmd_execute(const Overrides& o, const std::string& suite_in, const std::string& out) {
    const auto cfg = o.resolve();
    const auto suite = gen::load_suite(suite_in.empty() ? cfg.suite_path() : suite_in);
    const auto report = exec::run_suite(suite, cfg.make_target());
    const auto path = out.empty() ? cfg.report_path() : out;
    exec::save_report(report, path);
    std::cout << exec::format_summary(report) << "report written to " << path << "\n";
    return exec::exit_code(report);
}

int cmd_diff(const std::string& a, const std::string& b) {
    const auto diff = exec::diff_reports(exec::load_report(a), exec::load_report(b));
    std::cout << exec::format_diff(diff);
    return diff.empty() ? 0 : 1;
}

int cmd_pipeline(const Overrides& o) {
    const auto cfg = o.resolve();
    const auto result = pipeline::run(cfg);
    std::cout << "threats: " << result.threats_path << "\n"
              << "suite:   " << result.suite_path << "\n"
              << "report:  " << result.report_path << "\n"
              << exec::format_summary(result.report);
    return result.exit_code;
}

volatile std::sig_atomic_t g_stop = 0;

int cmd_serve(const Overrides& o, const std::string& host, std::uint16_t port) {
    const auto cfg = o.resolve();
    auto broker = std::make_shared<harness::MockBroker>(cfg.broker, std::make_shared<harness::SteadyClock>());
    harness::MockServer server(broker, host, port);
    std::cout << "mock broker listening on " << host << ":" << server.port() << "\n" << std::flush;
    std::signal(SIGINT, [](int) { g_stop = 1; });
    std::signal(SIGTERM, [](int) { g_stop = 1; });
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Threat-model driven test generation for MQTT brokers"};
    app.require_subcommand(1);

    Overrides derive_o, generate_o, execute_o, pipeline_o, serve_o;
    std::string out, threats_in, suite_in, report_a, report_b, host = "127.0.0.1";
    std::uint16_t port = 1883;

    auto* derive = app.add_subcommand("derive", "derive and score threats from a DFD");
    derive_o.add_config(derive);
    add_model_flags(derive, derive_o);
    derive->add_option("--out,-o", out, "threat XML output (default <out_dir>/threats.xml)");

    auto* generate = app.add_subcommand("generate", "generate a test suite from a threat list");
    generate_o.add_config(generate);
    add_model_flags(generate, generate_o);
    add_generation_flags(generate, generate_o);
    add_target_flags(generate, generate_o);
    generate->add_option("--threats", threats_in, "threat XML input (default <out_dir>/threats.xml)");
    generate->add_option("--out,-o", out, "suite output (default <out_dir>/suite.json)");

    auto* execute = app.add_subcommand("execute", "replay a suite against a target");
    execute_o.add_config(execute);
    execute_o.add(execute, "--out-dir", "out_dir", "directory for artifacts");
    add_target_flags(execute, execute_o);
    execute->add_option("--suite", suite_in, "suite input (default <out_dir>/suite.json)");
    execute->add_option("--out,-o", out, "report output (default <out_dir>/report.json)");

    auto* diff = app.add_subcommand("diff", "compare two execution reports");
    diff->add_option("before", report_a, "first report")->required();
    diff->add_option("after", report_b, "second report")->required();

    auto* pipe = app.add_subcommand("pipeline", "derive, generate and execute in one run");
    pipeline_o.add_config(pipe);
    add_model_flags(pipe, pipeline_o);
    add_generation_flags(pipe, pipeline_o);
    add_target_flags(pipe, pipeline_o);

    auto* serve = app.add_subcommand("serve-mock", "expose the mock broker on a TCP port");
    serve_o.add_config(serve);
    add_target_flags(serve, serve_o);
    serve->add_option("--host", host, "address to bind");
    serve->add_option("--port", port, "port to bind, 0 for any");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsageError;
    }

    try {
        if (*derive) return cmd_derive(derive_o, out);
        if (*generate) return cmd_generate(generate_o, threats_in, out);
        if (*execute) return cmd_execute(execute_o, suite_in, out);
        if (*diff) return cmd_diff(report_a, report_b);
        if (*pipe) return cmd_pipeline(pipeline_o);
        if (*serve) return cmd_serve(serve_o, host, port);
    } catch (const pipeline::StageError& e) {
        std::cerr << e.what() << "\n";
        return e.exit_code();
    } catch (const exec::SutDownError& e) {
        std::cerr << "execute: " << e.what() << "\n";
        return kUsageError;
    } catch (const exec::UsageError& e) {
        std::cerr << "diff: " << e.what() << "\n";
        return kUsageError;
    } catch (const FormatError& e) {
        std::cerr << e.what() << "\n";
        return kUsageError;
    } catch (const ConfigError& e) {
        std::cerr << "config: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    }
    return kUsageError;
}
