// End-to-end acceptance checks; prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "support.hpp"
#include "tmtcg/executor.hpp"
#include "tmtcg/generator.hpp"
#include "tmtcg/kv_config.hpp"
#include "tmtcg/pipeline.hpp"
#include "tmtcg/suite_io.hpp"
#include "tmtcg/threat_xml.hpp"

using namespace tmtcg;
using namespace tmtcg::harness;

namespace {

const std::string kData = TMTCG_DATA_DIR;

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) detail << "failed: " << what << "; ";
        ok = ok && cond;
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool is_flooding(const gen::TestCase& c, const std::set<std::string>& names) {
    for (const auto& s : c.steps) {
        if (s.action.kind == catalog::ActionKind::Attack && names.count(s.action.name)) return true;
    }
    return false;
}

std::size_t count_flooding(const gen::TestSuite& suite) {
    std::size_t n = 0;
    for (const auto& c : suite.cases) n += is_flooding(c, {"flood_publish", "flood_connect"});
    return n;
}

// ---------------------------------------------------------------- 1

void derivation_oracle(Check& c) {
    const auto t0 = Clock::now();
    std::size_t mismatches = 0;
    for (std::uint64_t i = 0; i < 200; ++i) {
        auto rng = Rng::split(1, i);
        const auto model = support::random_dfd(rng, 20);
        const auto templates = support::random_templates(rng);
        std::set<std::tuple<std::string, std::string, threat::Category>> got;
        for (const auto& t : threat::derive_threats(model, templates)) got.emplace(t.threat_id, t.element_id, t.category);
        mismatches += got != support::oracle_threats(model, templates);
    }
    const auto s = seconds_since(t0);
    c.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
    c.require(s < 5.0, "took longer than 5 s");
    c.detail << mismatches << " mismatches over 200 DFDs, " << s << " s";
}

// ---------------------------------------------------------------- 2

void codec_round_trip(Check& c) {
    const auto t0 = Clock::now();
    Rng rng(2);
    std::size_t bad_round_trips = 0, bad_prefixes = 0, prefixes = 0;
    for (int i = 0; i < 10'000; ++i) {
        const auto p = support::random_packet(rng);
        const auto frame = mqtt::encode(p);
        const auto r = mqtt::decode(frame);
        const auto* d = std::get_if<mqtt::Decoded>(&r);
        bad_round_trips += !(d && d->packet == p && d->consumed == frame.size());
        for (std::size_t n = 0; n < frame.size(); ++n, ++prefixes) {
            bad_prefixes += !std::holds_alternative<mqtt::NeedMoreData>(mqtt::decode(ByteView(frame.data(), n)));
        }
    }
    std::size_t bad_varints = 0;
    for (std::uint32_t v : {0u, 127u, 128u, 16383u, 16384u, 2097151u, 2097152u, 268435455u}) {
        Bytes ours;
        mqtt::append_remaining_length(v, ours);
        Bytes frame{0xD0};
        frame.insert(frame.end(), ours.begin(), ours.end());
        const auto h = mqtt::decode_fixed_header(frame);
        const auto* fh = std::get_if<mqtt::FixedHeader>(&h);
        bad_varints += !(ours == support::oracle_varint(v) && support::oracle_varint_decode(ours) == v && fh &&
                         fh->remaining_length == v);
    }
    const auto s = seconds_since(t0);
    c.require(bad_round_trips == 0, "round trip");
    c.require(bad_varints == 0, "varint boundaries");
    c.require(bad_prefixes == 0, "strict prefixes");
    c.require(s < 10.0, "took longer than 10 s");
    c.detail << "10000 packets, " << bad_round_trips << " round-trip errors, " << bad_varints
             << " varint disagreements, " << bad_prefixes << "/" << prefixes << " prefixes not NeedMoreData, " << s
             << " s";
}

// ---------------------------------------------------------------- 3

void generator_shape(Check& c) {
    const auto t0 = Clock::now();
    gen::GenConfig cfg;
    cfg.seed = 42;
    cfg.num_positive = 20;
    cfg.num_negative = 20;
    cfg.max_length = 15;
    const BrokerConfig broker;
    const auto target = Target::embedded(broker);
    const auto suite = gen::generate_suite(cfg, target, {});
    const auto again = gen::generate_suite(cfg, target, {});

    std::size_t positives = 0, positive_ok = 0, positive_steps = 0, negatives = 0, negative_ok = 0;
    for (const auto& tc : suite.cases) {
        if (tc.kind == gen::CaseKind::Positive) {
            ++positives;
            positive_steps += tc.steps.size();
            std::vector<catalog::BoundAction> actions;
            for (const auto& s : tc.steps) actions.push_back(s.action);
            const auto folded = support::fold_accepts(broker, actions);
            bool all = !folded.empty();
            for (std::size_t i = 0; i < folded.size(); ++i) {
                all = all && folded[i] && tc.steps[i].expected == Verdict::Accepted;
            }
            positive_ok += all;
        } else if (tc.kind == gen::CaseKind::Negative) {
            ++negatives;
            std::size_t rejected = 0;
            for (const auto& s : tc.steps) rejected += s.expected != Verdict::Accepted;
            negative_ok += rejected == 1 && tc.steps.back().expected != Verdict::Accepted;
        }
    }
    const double mean = positives ? double(positive_steps) / double(positives) : 0.0;
    const bool identical = gen::write_suite(suite) == gen::write_suite(again);
    const auto s = seconds_since(t0);
    c.require(suite.complete, "suite complete");
    c.require(positives == 20 && positive_ok == 20, "positives verified by fold");
    c.require(negatives == 20 && negative_ok == 20, "negatives end in their only rejection");
    c.require(mean > 7.5, "mean positive length");
    c.require(identical, "byte-identical reruns");
    c.require(s < 30.0, "took longer than 30 s");
    c.detail << positive_ok << "/" << positives << " positives fold-verified, " << negative_ok << "/" << negatives
             << " negatives well-formed, mean positive length " << mean << ", reruns "
             << (identical ? "identical" : "differ") << ", " << s << " s";
}

// ---------------------------------------------------------------- 4

void threat_gating(Check& c, const support::ScratchDir& dir) {
    auto base = pipeline::PipelineConfig::load(kData + "/demo.pipeline");

    auto run_with = [&](const std::string& name, const std::string& templates, const std::string& matrix) {
        const auto t0 = Clock::now();
        auto cfg = base;
        cfg.out_dir = dir.file(name);
        cfg.templates_path = templates;
        cfg.matrix_path = matrix;
        const auto result = pipeline::run(cfg);
        const auto flooding = count_flooding(gen::load_suite(result.suite_path));
        c.require(seconds_since(t0) < 60.0, name + " took longer than 60 s");
        return flooding;
    };

    const auto with_dos = run_with("gating-dos", base.templates_path, base.matrix_path);

    auto templates = threat::parse_templates_xml(read_text_file(base.templates_path));
    std::erase_if(templates, [](const threat::ThreatTemplate& t) {
        return t.category == threat::Category::DenialOfService;
    });
    write_text_file(dir.file("no-dos.templates.xml"), threat::write_templates_xml(templates));
    const auto without_dos = run_with("gating-no-dos", dir.file("no-dos.templates.xml"), base.matrix_path);

    auto matrix = risk::RiskMatrix::load(base.matrix_path);
    matrix.set_threshold(21);  // above the highest DoS score (4 x 5)
    write_text_file(dir.file("raised.matrix"), matrix.to_text());
    const auto raised = run_with("gating-raised", base.templates_path, dir.file("raised.matrix"));

    c.require(with_dos >= 1, "DoS template yields flooding cases");
    c.require(without_dos == 0, "no flooding without the DoS template");
    c.require(raised == 0, "no flooding above threshold");
    c.detail << "flooding cases: " << with_dos << " with DoS template, " << without_dos << " without, " << raised
             << " with threshold 21";
}

// ---------------------------------------------------------------- 5

void observable_dos(Check& c) {
    BrokerConfig broker;
    broker.max_connections = 10;
    const auto target = Target::embedded(broker);
    gen::GenConfig cfg;
    cfg.seed = 5;
    cfg.num_attack = 1;
    cfg.max_length = 3;
    cfg.attack_probability = 1.0;
    gen::GenInputs in;
    in.pool = attacks::select_attacks({{"flood_connect", 1.0}}, attacks::builtin_attacks());
    const auto suite = gen::generate_suite(cfg, target, in);
    const auto report = exec::run_suite(suite, target);

    std::optional<bool> during, after;
    for (const auto& t : report.timeline) {
        if (t.probe.label == "flood_connect:during") during = t.probe.alive;
        if (t.probe.label == "flood_connect:after") after = t.probe.alive;
    }
    // The timeline must survive the report file.
    const auto reread = exec::read_report(exec::write_report(report));
    c.require(during.has_value() && !*during, "probe down during flood");
    c.require(after.has_value() && *after, "probe up after cleanup");
    c.require(reread.timeline == report.timeline, "timeline persisted");
    c.detail << "probe during flood: " << (during ? (*during ? "alive" : "down") : "missing")
             << ", after cleanup: " << (after ? (*after ? "alive" : "down") : "missing") << ", "
             << report.timeline.size() << " timeline entries";
}

// ---------------------------------------------------------------- 6

void replay_and_diff(Check& c, const support::ScratchDir& dir) {
    auto cfg = pipeline::PipelineConfig::load(kData + "/demo.pipeline");
    cfg.out_dir = dir.file("replay");
    // Fits under the default limit of 100 and overflows a limit of 5.
    cfg.attacks.flood_connect_connections = 50;
    const auto result = pipeline::run(cfg);
    const auto suite = gen::load_suite(result.suite_path);

    auto lowered = cfg;
    lowered.broker.max_connections = 5;
    const auto low = exec::run_suite(suite, lowered.make_target());
    exec::save_report(low, dir.file("replay/report-low.json"));

    const auto diff = exec::diff_reports(exec::load_report(result.report_path),
                                         exec::load_report(dir.file("replay/report-low.json")));
    std::set<std::string> named, flooding;
    for (const auto& d : diff) named.insert(d.case_id);
    for (const auto& tc : suite.cases) {
        if (is_flooding(tc, {"flood_connect"})) flooding.insert(tc.case_id);
    }

    c.require(result.exit_code == 0 && result.report.summary.fail == 0, "matching replay clean");
    c.require(!flooding.empty(), "suite has flooding cases");
    c.require(named == flooding, "diff names exactly the flooding cases");
    c.detail << "matching replay exit " << result.exit_code << " with " << result.report.summary.fail
             << " fails; diff names " << named.size() << " case(s), suite has " << flooding.size()
             << " connection-flooding case(s)";
}

// ---------------------------------------------------------------- 7

void serialization(Check& c) {
    std::size_t bad = 0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        auto rng = Rng::split(7, i);
        const auto threats = support::random_scored_threats(rng);
        const auto xml = export_threats(threats);
        bad += xml != export_threats(threats) || import_threats(xml) != threats;
    }
    const auto target = Target::embedded({});
    gen::GenConfig cfg;
    cfg.seed = 77;
    cfg.num_positive = 5;
    cfg.num_negative = 5;
    cfg.num_attack = 2;
    cfg.max_length = 8;
    gen::GenInputs in;
    in.pool = attacks::select_attacks({{"malformed_frame", 1.0}, {"flood_publish", 1.0}}, attacks::builtin_attacks());
    in.attack_settings.flood_publish_count = 200;
    const auto s1 = gen::generate_suite(cfg, target, in);
    const auto s2 = gen::generate_suite(cfg, target, in);
    const bool suites = gen::write_suite(s1) == gen::write_suite(s2) &&
                        gen::write_suite(gen::read_suite(gen::write_suite(s1))) == gen::write_suite(s1);
    const auto r1 = exec::write_report(exec::run_suite(s1, target));
    const auto r2 = exec::write_report(exec::run_suite(s2, target));
    const bool reports = r1 == r2 && exec::write_report(exec::read_report(r1)) == r1;

    c.require(bad == 0, "threat import/export identity");
    c.require(suites, "suite writer deterministic");
    c.require(reports, "report writer deterministic");
    c.detail << bad << "/100 threat lists broke import/export, suite writer "
             << (suites ? "stable" : "unstable") << ", report writer " << (reports ? "stable" : "unstable");
}

}  // namespace

int main() {
    support::ScratchDir dir("acceptance");
    const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
        {"threat derivation matches brute-force oracle", derivation_oracle},
        {"codec round trip, varint boundaries, strict prefixes", codec_round_trip},
        {"generator validity and shape", generator_shape},
        {"threat gating end to end", [&](Check& c) { threat_gating(c, dir); }},
        {"observable denial of service", observable_dos},
        {"replay fidelity and regression diff", [&](Check& c) { replay_and_diff(c, dir); }},
        {"serialization stability", serialization},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        try {
            criteria[i].second(c);
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail << "exception: " << e.what();
        }
        failures += !c.ok;
        std::cout << (c.ok ? "PASS" : "FAIL") << " criterion " << (i + 1) << ": " << criteria[i].first << " ("
                  << c.detail.str() << ")" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
