#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmtcg/attacks.hpp"
#include "tmtcg/executor.hpp"
#include "tmtcg/generator.hpp"
#include "tmtcg/harness/mock_broker.hpp"
#include "tmtcg/harness/session.hpp"
#include "tmtcg/harness/target.hpp"

namespace tmtcg::pipeline {

/// A stage failed; `exit_code` is what the command line tool returns.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message, int exit_code = 2)
        : std::runtime_error(stage + ": " + message), stage_(std::move(stage)), exit_code_(exit_code) {}

    const std::string& stage() const { return stage_; }
    int exit_code() const { return exit_code_; }

private:
    std::string stage_;
    int exit_code_;
};

struct TargetSpec {
    std::optional<std::string> host;  // unset: embedded
    std::uint16_t port = 0;

    /// "embedded" or "tcp:<host>:<port>". Throws ConfigError.
    static TargetSpec parse(const std::string& text);
    std::string to_string() const;
};

struct PipelineConfig {
    std::string dfd_path;
    std::string templates_path;
    std::string matrix_path;  // empty: built-in matrix
    std::string out_dir = ".";
    gen::GenConfig gen;
    attacks::AttackSettings attacks;
    TargetSpec target;
    harness::BrokerConfig broker;
    /// Some broker.* key was given; for a TCP target this declares the
    /// remote configuration for the environment digest.
    bool broker_declared = false;
    harness::SessionOptions session;

    /// Every key the configuration accepts.
    static const std::vector<std::string>& known_keys();

    /// Builds from `key = value` entries. Relative paths resolve against
    /// `base_dir`. Unknown keys and bad values throw ConfigError.
    static PipelineConfig from_entries(const std::map<std::string, std::string>& entries,
                                       const std::string& base_dir);
    /// Reads a config file; relative paths resolve against its directory.
    /// `overrides` come from the command line; a key set in both places with
    /// different values is an error.
    static PipelineConfig load(const std::string& path, const std::map<std::string, std::string>& overrides = {},
                               const std::string& overrides_base = ".");

    harness::Target make_target() const;

    std::string threats_path() const;
    std::string suite_path() const;
    std::string report_path() const;
};

/// Validates the model, derives and scores threats, and returns the threat
/// XML. Throws StageError("derive").
std::string derive(const std::string& dfd_path, const std::string& templates_path, const std::string& matrix_path);

/// Imports threats, weights and selects attacks, and generates a suite.
/// Throws StageError("generate") for bad input. A suite cut short by an
/// unresponsive broker is returned with complete = false.
gen::TestSuite generate(const std::string& threats_xml, const std::string& templates_path, const PipelineConfig& config);

/// Attack pool the threat list enables.
attacks::AttackPool attack_pool_for(const std::string& threats_xml, const std::string& templates_path);

struct PipelineResult {
    std::string threats_path;
    std::string suite_path;
    std::string report_path;
    exec::ExecutionReport report;
    int exit_code = 0;
};

/// derive, generate and execute, writing every artifact into out_dir.
/// Throws StageError for the first stage that fails.
PipelineResult run(const PipelineConfig& config);

}  // namespace tmtcg::pipeline
