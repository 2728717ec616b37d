#include "tmtcg/executor.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "json_util.hpp"
#include "tmtcg/attacks.hpp"
#include "tmtcg/kv_config.hpp"
#include "tmtcg/suite_io.hpp"

namespace tmtcg::exec {

namespace {

using harness::Verdict;
using jsonio::Json;

constexpr int kReportFormat = 1;

std::int64_t steady_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

harness::ProbeRecord probe(const std::shared_ptr<harness::Endpoint>& endpoint, const harness::Target& target,
                           const std::string& label, int attempts, std::int64_t delay_ms) {
    bool alive = false;
    for (int i = 0; i < attempts && !alive; ++i) {
        if (i > 0 && !endpoint->clock().is_virtual()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
        }
        alive = harness::probe_liveness(endpoint, target.session_options());
    }
    return {label, endpoint->clock().now_ms(), alive};
}

StepResult inconclusive(std::size_t index, const gen::Step& step, std::string note) {
    StepResult r;
    r.index = index;
    r.action = step.action.name;
    r.expected = step.expected;
    r.observed.verdict = Verdict::SutDown;
    r.observed.note = std::move(note);
    r.outcome = Outcome::Inconclusive;
    return r;
}

}  // namespace

std::string_view to_string(Outcome outcome) {
    switch (outcome) {
        case Outcome::Pass: return "Pass";
        case Outcome::Fail: return "Fail";
        case Outcome::Inconclusive: return "Inconclusive";
    }
    return "?";
}

std::optional<Outcome> parse_outcome(std::string_view name) {
    if (name == "Pass") return Outcome::Pass;
    if (name == "Fail") return Outcome::Fail;
    if (name == "Inconclusive") return Outcome::Inconclusive;
    return std::nullopt;
}

Summary summarize(const std::vector<CaseResult>& cases) {
    Summary s;
    for (const auto& c : cases) {
        for (const auto& r : c.steps) {
            switch (r.outcome) {
                case Outcome::Pass: ++s.pass; break;
                case Outcome::Inconclusive: ++s.inconclusive; break;
                case Outcome::Fail: ++(r.environment_mismatch ? s.env_warnings : s.fail); break;
            }
        }
    }
    return s;
}

ExecutionReport run_suite(const gen::TestSuite& suite, const harness::Target& target, const RunOptions& options) {
    const auto started = steady_ms();
    ExecutionReport report;
    report.suite_id = suite.suite_id;
    report.target = target.descriptor();
    report.clock = target.clock_kind();
    report.suite_environment_digest = suite.environment.digest;
    report.target_environment_digest = target.environment_digest();
    const bool env_match = report.environment_matches();

    // Virtual-clock targets report virtual time so their reports are reproducible.
    const bool virtual_time = target.clock_kind() == "virtual";
    std::int64_t virtual_elapsed = 0;

    {
        const auto endpoint = target.fresh_endpoint();
        auto initial = probe(endpoint, target, "initial", 1, 0);
        report.timeline.push_back({"", initial});
        if (!initial.alive) throw SutDownError("broker at " + target.descriptor() + " is not answering");
        virtual_elapsed += endpoint->clock().now_ms();
    }

    for (const auto& tc : suite.cases) {
        CaseResult result;
        result.case_id = tc.case_id;
        result.kind = tc.kind;

        const auto endpoint = target.fresh_endpoint();
        const auto before =
            probe(endpoint, target, "before-case", options.recovery_attempts, options.recovery_delay_ms);
        report.timeline.push_back({tc.case_id, before});

        std::unique_ptr<harness::Session> session;
        std::string down;
        if (!before.alive) {
            down = "broker not answering before the case";
        } else {
            try {
                session = std::make_unique<harness::Session>(harness::Session::open(endpoint, target.session_options()));
            } catch (const harness::OpenError& e) {
                down = e.what();
            }
        }

        for (std::size_t i = 0; i < tc.steps.size(); ++i) {
            const auto& step = tc.steps[i];
            if (!down.empty()) {
                result.steps.push_back(inconclusive(i, step, down));
                continue;
            }
            StepResult r;
            r.index = i;
            r.action = step.action.name;
            r.expected = step.expected;
            r.observed = attacks::execute_action(*session, step.action);
            for (const auto& p : r.observed.probes) report.timeline.push_back({tc.case_id, p});

            if (r.observed.verdict == Verdict::SutDown) {
                r.outcome = Outcome::Inconclusive;
                down = "broker went down during " + step.action.name;
            } else if (r.observed.verdict == step.expected) {
                r.outcome = Outcome::Pass;
            } else {
                r.outcome = Outcome::Fail;
                r.environment_mismatch = !env_match;
                report.timeline.push_back({tc.case_id, probe(endpoint, target, "after-fail", 1, 0)});
            }
            result.steps.push_back(std::move(r));
        }
        session.reset();
        virtual_elapsed += endpoint->clock().now_ms();
        report.cases.push_back(std::move(result));
    }

    report.summary = summarize(report.cases);
    report.duration_ms = virtual_time ? virtual_elapsed : steady_ms() - started;
    return report;
}

int exit_code(const ExecutionReport& report) {
    if (report.summary.inconclusive > 0) return 2;
    if (report.summary.fail > 0) return 1;
    return 0;
}

std::string write_report(const ExecutionReport& report) {
    Json cases = Json::array();
    for (const auto& c : report.cases) {
        Json steps = Json::array();
        for (const auto& s : c.steps) {
            steps.push_back({{"index", s.index},
                             {"action", s.action},
                             {"expected", std::string(harness::to_string(s.expected))},
                             {"observed", jsonio::feedback_to_json(s.observed)},
                             {"outcome", std::string(to_string(s.outcome))},
                             {"environment_mismatch", s.environment_mismatch}});
        }
        cases.push_back({{"case_id", c.case_id}, {"kind", std::string(gen::to_string(c.kind))}, {"steps", steps}});
    }
    Json timeline = Json::array();
    for (const auto& t : report.timeline) {
        timeline.push_back({{"case_id", t.case_id},
                            {"label", t.probe.label},
                            {"at_ms", t.probe.at_ms},
                            {"alive", t.probe.alive}});
    }
    const auto& s = report.summary;
    Json doc{
        {"format", kReportFormat},
        {"suite_id", report.suite_id},
        {"target", report.target},
        {"clock", report.clock},
        {"environment",
         {{"suite_digest", report.suite_environment_digest},
          {"target_digest", report.target_environment_digest},
          {"match", report.environment_matches()}}},
        {"summary",
         {{"pass", s.pass}, {"fail", s.fail}, {"inconclusive", s.inconclusive}, {"env_warnings", s.env_warnings}}},
        {"timeline", timeline},
        {"duration_ms", report.duration_ms},
        {"cases", cases},
    };
    return jsonio::seal(std::move(doc));
}

ExecutionReport read_report(std::string_view text) {
    const Json doc = jsonio::unseal(text, "report");
    if (jsonio::get_int(doc, "format", "report") != kReportFormat) throw FormatError("report: unsupported format");
    ExecutionReport r;
    r.suite_id = jsonio::get_string(doc, "suite_id", "report");
    r.target = jsonio::get_string(doc, "target", "report");
    r.clock = jsonio::get_string(doc, "clock", "report");
    const auto& env = jsonio::member(doc, "environment", "report");
    r.suite_environment_digest = jsonio::get_string(env, "suite_digest", "environment");
    r.target_environment_digest = jsonio::get_string(env, "target_digest", "environment");
    r.duration_ms = jsonio::get_int(doc, "duration_ms", "report");

    for (const auto& t : jsonio::member(doc, "timeline", "report")) {
        r.timeline.push_back({jsonio::get_string(t, "case_id", "timeline"),
                              {jsonio::get_string(t, "label", "timeline"), jsonio::get_int(t, "at_ms", "timeline"),
                               jsonio::get_bool(t, "alive", "timeline")}});
    }
    for (const auto& c : jsonio::member(doc, "cases", "report")) {
        CaseResult cr;
        cr.case_id = jsonio::get_string(c, "case_id", "case");
        const std::string path = "case " + cr.case_id;
        auto kind = gen::parse_case_kind(jsonio::get_string(c, "kind", path));
        if (!kind) throw FormatError(path + ": unknown kind");
        cr.kind = *kind;
        for (const auto& st : jsonio::member(c, "steps", path)) {
            StepResult s;
            s.index = jsonio::get_uint(st, "index", path);
            s.action = jsonio::get_string(st, "action", path);
            s.expected = jsonio::get_verdict(st, "expected", path);
            s.observed = jsonio::feedback_from_json(jsonio::member(st, "observed", path));
            auto outcome = parse_outcome(jsonio::get_string(st, "outcome", path));
            if (!outcome) throw FormatError(path + ": unknown outcome");
            s.outcome = *outcome;
            s.environment_mismatch = jsonio::get_bool(st, "environment_mismatch", path);
            cr.steps.push_back(std::move(s));
        }
        r.cases.push_back(std::move(cr));
    }
    r.summary = summarize(r.cases);
    const auto& s = jsonio::member(doc, "summary", "report");
    const Summary stated{jsonio::get_uint(s, "pass", "summary"), jsonio::get_uint(s, "fail", "summary"),
                         jsonio::get_uint(s, "inconclusive", "summary"),
                         jsonio::get_uint(s, "env_warnings", "summary")};
    if (!(stated == r.summary)) throw FormatError("report: summary does not match the step outcomes");
    return r;
}

void save_report(const ExecutionReport& report, const std::string& path) { write_text_file(path, write_report(report)); }

ExecutionReport load_report(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const ConfigError& e) {
        throw FormatError(e.what());
    }
    return read_report(text);
}

std::vector<CaseDiff> diff_reports(const ExecutionReport& before, const ExecutionReport& after) {
    if (before.suite_id != after.suite_id) {
        throw UsageError("reports belong to different suites: " + before.suite_id + " vs " + after.suite_id);
    }
    std::map<std::string, const CaseResult*> a;
    std::map<std::string, const CaseResult*> b;
    std::set<std::string> ids;
    for (const auto& c : before.cases) {
        a[c.case_id] = &c;
        ids.insert(c.case_id);
    }
    for (const auto& c : after.cases) {
        b[c.case_id] = &c;
        ids.insert(c.case_id);
    }

    std::vector<CaseDiff> out;
    for (const auto& id : ids) {
        CaseDiff d;
        d.case_id = id;
        const auto ia = a.find(id);
        const auto ib = b.find(id);
        if (ia == a.end() || ib == b.end()) {
            d.missing_before = ia == a.end();
            d.missing_after = ib == b.end();
            out.push_back(std::move(d));
            continue;
        }
        const auto& sa = ia->second->steps;
        const auto& sb = ib->second->steps;
        for (std::size_t i = 0; i < std::max(sa.size(), sb.size()); ++i) {
            if (i < sa.size() && i < sb.size()) {
                if (sa[i].outcome == sb[i].outcome) continue;
                d.steps.push_back({i, sa[i].action, sa[i].outcome, sb[i].outcome, sa[i].observed.verdict,
                                   sb[i].observed.verdict});
            } else {
                // Step counts only differ for reports of edited suites.
                const auto& only = i < sa.size() ? sa[i] : sb[i];
                d.steps.push_back({i, only.action, i < sa.size() ? only.outcome : Outcome::Inconclusive,
                                   i < sb.size() ? only.outcome : Outcome::Inconclusive, only.observed.verdict,
                                   only.observed.verdict});
            }
        }
        if (!d.steps.empty()) out.push_back(std::move(d));
    }
    return out;
}

std::string format_diff(const std::vector<CaseDiff>& diff) {
    if (diff.empty()) return "no differences\n";
    std::ostringstream out;
    for (const auto& c : diff) {
        if (c.missing_before || c.missing_after) {
            out << c.case_id << ": only in the " << (c.missing_before ? "second" : "first") << " report\n";
            continue;
        }
        out << c.case_id << ":\n";
        for (const auto& s : c.steps) {
            out << "  step " << s.index << " " << s.action << ": " << to_string(s.before) << " -> "
                << to_string(s.after) << " (" << harness::to_string(s.verdict_before) << " -> "
                << harness::to_string(s.verdict_after) << ")\n";
        }
    }
    return out.str();
}

std::string format_summary(const ExecutionReport& report) {
    std::ostringstream out;
    const auto& s = report.summary;
    out << report.suite_id << " on " << report.target << ": " << s.pass << " pass, " << s.fail << " fail, "
        << s.inconclusive << " inconclusive";
    if (s.env_warnings > 0) out << ", " << s.env_warnings << " environment warnings";
    out << "\n";
    if (!report.environment_matches()) out << "warning: target environment differs from the suite's\n";
    for (const auto& c : report.cases) {
        for (const auto& r : c.steps) {
            if (r.outcome == Outcome::Pass) continue;
            out << "  " << c.case_id << " step " << r.index << " " << r.action << ": " << to_string(r.outcome)
                << ", expected " << harness::to_string(r.expected) << ", observed "
                << harness::to_string(r.observed.verdict);
            if (r.environment_mismatch) out << " [environment-mismatch]";
            if (!r.observed.note.empty()) out << " (" << r.observed.note << ")";
            out << "\n";
        }
    }
    return out.str();
}

}  // namespace tmtcg::exec
