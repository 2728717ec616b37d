#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tmtcg/attacks.hpp"
#include "tmtcg/catalog.hpp"
#include "tmtcg/harness/session.hpp"
#include "tmtcg/harness/target.hpp"

namespace tmtcg::gen {

enum class CaseKind { Positive, Negative, Attack };

std::string_view to_string(CaseKind kind);
std::optional<CaseKind> parse_case_kind(std::string_view name);

struct GenConfig {
    std::uint64_t seed = 0;
    std::size_t num_positive = 0;
    std::size_t num_negative = 0;
    std::size_t num_attack = 0;
    std::size_t max_length = 15;
    double attack_probability = 0.3;
    std::size_t rejection_budget = 20;

    /// Throws ConfigError.
    void validate() const;
    /// Canonical `key = value` text, hashed into provenance.
    std::string to_text() const;

    bool operator==(const GenConfig&) const = default;
};

struct Step {
    catalog::BoundAction action;
    harness::Feedback observed;  // at generation time
    harness::Verdict expected = harness::Verdict::Accepted;

    bool operator==(const Step&) const = default;
};

struct Provenance {
    std::uint64_t seed = 0;
    std::string config_digest;
    std::string threat_digest;

    bool operator==(const Provenance&) const = default;
};

struct TestCase {
    std::string case_id;
    CaseKind kind = CaseKind::Positive;
    std::vector<Step> steps;
    Provenance provenance;

    bool operator==(const TestCase&) const = default;
};

struct Environment {
    std::string digest;
    std::string descriptor;  // target the suite was generated against
    std::string text;        // protocol and broker configuration
    std::string clock;       // "virtual" or "steady"

    bool operator==(const Environment&) const = default;
};

struct TestSuite {
    std::string suite_id;
    Environment environment;
    GenConfig config;
    attacks::AttackSettings attack_settings;
    std::vector<std::pair<std::string, double>> attack_pool;  // id, weight
    std::vector<TestCase> cases;
    /// False when generation stopped early because the broker went down.
    bool complete = true;
    std::vector<std::string> diagnostics;

    bool operator==(const TestSuite&) const = default;
};

struct GenInputs {
    const std::vector<catalog::Command>* commands = &catalog::default_commands();
    const std::vector<attacks::AttackPattern>* library = &attacks::builtin_attacks();
    attacks::AttackPool pool;
    attacks::AttackSettings attack_settings;
    /// Digest of the threat list that produced `pool`; empty when none.
    std::string threat_digest;
};

inline constexpr std::size_t kAttemptsPerCase = 3;

/// Builds num_positive + num_negative + num_attack cases, each on a fresh
/// endpoint from `target`, by executing every candidate step and keeping it
/// only when the broker's answer fits the case kind. Deterministic for an
/// embedded target. Never throws for broker trouble: a broker that stops
/// answering ends generation with complete = false.
TestSuite generate_suite(const GenConfig& config, const harness::Target& target, const GenInputs& inputs);

/// Digest of everything besides the target that determines a suite.
std::string config_digest(const GenConfig& config, const GenInputs& inputs);

}  // namespace tmtcg::gen
