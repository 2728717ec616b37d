#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tmtcg/generator.hpp"
#include "tmtcg/harness/session.hpp"
#include "tmtcg/harness/target.hpp"

namespace tmtcg::exec {

enum class Outcome { Pass, Fail, Inconclusive };

std::string_view to_string(Outcome outcome);
std::optional<Outcome> parse_outcome(std::string_view name);

/// The broker did not answer the initial liveness probe.
class SutDownError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reports that cannot be compared.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepResult {
    std::size_t index = 0;
    std::string action;
    harness::Verdict expected = harness::Verdict::Accepted;
    harness::Feedback observed;
    Outcome outcome = Outcome::Pass;
    /// Fail on a target whose environment differs from the suite's.
    bool environment_mismatch = false;

    bool operator==(const StepResult&) const = default;
};

struct CaseResult {
    std::string case_id;
    gen::CaseKind kind = gen::CaseKind::Positive;
    std::vector<StepResult> steps;

    bool operator==(const CaseResult&) const = default;
};

struct TimelineEntry {
    std::string case_id;  // empty for the initial probe
    harness::ProbeRecord probe;

    bool operator==(const TimelineEntry&) const = default;
};

struct Summary {
    std::size_t pass = 0;
    std::size_t fail = 0;          // unflagged failures
    std::size_t inconclusive = 0;
    std::size_t env_warnings = 0;  // failures flagged as environment mismatch

    bool operator==(const Summary&) const = default;
};

struct ExecutionReport {
    std::string suite_id;
    std::string target;
    std::string clock;
    std::string suite_environment_digest;
    std::string target_environment_digest;
    std::vector<CaseResult> cases;
    Summary summary;
    std::vector<TimelineEntry> timeline;
    std::int64_t duration_ms = 0;

    bool environment_matches() const { return suite_environment_digest == target_environment_digest; }
    bool operator==(const ExecutionReport&) const = default;
};

/// Summary folded from the per-step outcomes.
Summary summarize(const std::vector<CaseResult>& cases);

struct RunOptions {
    /// Probes before a case is written off as Inconclusive.
    int recovery_attempts = 3;
    std::int64_t recovery_delay_ms = 200;
};

/// Replays every case on a fresh endpoint from `target`. Throws SutDownError
/// when the first liveness probe fails.
ExecutionReport run_suite(const gen::TestSuite& suite, const harness::Target& target, const RunOptions& options = {});

/// 0: everything passed, or only environment warnings. 1: any other Fail.
/// 2: anything Inconclusive.
int exit_code(const ExecutionReport& report);

std::string write_report(const ExecutionReport& report);
/// Throws FormatError.
ExecutionReport read_report(std::string_view text);
void save_report(const ExecutionReport& report, const std::string& path);
ExecutionReport load_report(const std::string& path);

struct StepDiff {
    std::size_t index = 0;
    std::string action;
    Outcome before = Outcome::Pass;
    Outcome after = Outcome::Pass;
    harness::Verdict verdict_before = harness::Verdict::Accepted;
    harness::Verdict verdict_after = harness::Verdict::Accepted;

    bool operator==(const StepDiff&) const = default;
};

struct CaseDiff {
    std::string case_id;
    std::vector<StepDiff> steps;
    /// Case present in only one of the reports.
    bool missing_before = false;
    bool missing_after = false;

    bool operator==(const CaseDiff&) const = default;
};

/// Steps whose outcome differs, grouped by case in case-id order. Throws
/// UsageError when the reports belong to different suites.
std::vector<CaseDiff> diff_reports(const ExecutionReport& before, const ExecutionReport& after);

std::string format_diff(const std::vector<CaseDiff>& diff);
std::string format_summary(const ExecutionReport& report);

}  // namespace tmtcg::exec
