#include "tmtcg/generator.hpp"

#include <cstdio>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "tmtcg/digest.hpp"
#include "tmtcg/kv_config.hpp"

namespace tmtcg::gen {

namespace {

using catalog::ActionKind;
using catalog::BoundAction;
using harness::Phase;
using harness::Session;
using harness::Verdict;

/// The broker stopped answering liveness probes.
struct SutDown {
    std::string what;
};

/// This attempt cannot produce a case; try again on a fresh broker.
struct AttemptFailed {
    std::string what;
};

std::string case_id(CaseKind kind, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%03zu", kind == CaseKind::Positive   ? "positive"
                                              : kind == CaseKind::Negative ? "negative"
                                                                            : "attack",
                  n);
    return buf;
}

class CaseBuilder {
public:
    CaseBuilder(const GenConfig& cfg, const harness::Target& target, const GenInputs& in, Rng& rng)
        : cfg_(cfg), target_(target), in_(in), rng_(rng) {}

    std::vector<Step> build(CaseKind kind) {
        steps_.clear();
        has_attack_ = false;
        budget_ = cfg_.rejection_budget;
        start_fresh();
        switch (kind) {
            case CaseKind::Positive: extend(cfg_.max_length, false, true); break;
            case CaseKind::Attack:
                extend(cfg_.max_length, true, true);
                if (!has_attack_) throw AttemptFailed{"no attack step could be placed"};
                break;
            case CaseKind::Negative: {
                const auto prefix = static_cast<std::size_t>(rng_.uniform(cfg_.max_length));
                extend(prefix, false, false);
                add_violation();
                break;
            }
        }
        if (steps_.empty()) throw AttemptFailed{"rejection budget exhausted before the first step"};
        session_.reset();
        return std::move(steps_);
    }

private:
    void start_fresh() {
        session_.reset();
        auto endpoint = target_.fresh_endpoint();
        if (!harness::probe_liveness(endpoint, target_.session_options())) {
            throw SutDown{"liveness probe failed before case"};
        }
        try {
            session_ = std::make_unique<Session>(Session::open(endpoint, target_.session_options()));
        } catch (const harness::OpenError& e) {
            throw SutDown{e.what()};
        }
    }

    /// Rebuilds the accepted prefix on a fresh broker after a candidate
    /// that may have disturbed its state.
    void restore() {
        start_fresh();
        for (const auto& step : steps_) {
            const auto fb = attacks::execute_action(*session_, step.action, *in_.library);
            if (fb.verdict == Verdict::SutDown) throw SutDown{"broker went down while restoring a prefix"};
            if (fb.verdict != step.expected) {
                throw AttemptFailed{"prefix replay diverged at " + step.action.name + ": " +
                                    std::string(harness::to_string(fb.verdict))};
            }
        }
    }

    harness::Feedback run(const BoundAction& action) {
        auto fb = attacks::execute_action(*session_, action, *in_.library);
        if (fb.verdict == Verdict::SutDown) {
            throw SutDown{action.name + " left the broker unresponsive"};
        }
        return fb;
    }

    void append(BoundAction action, harness::Feedback fb) {
        const auto verdict = fb.verdict;
        steps_.push_back(Step{std::move(action), std::move(fb), verdict});
        budget_ = cfg_.rejection_budget;
    }

    /// Grows the sequence up to `length` accepted steps. Terminal commands
    /// only fill the last slot, and only when `allow_terminal`.
    void extend(std::size_t length, bool attacks, bool allow_terminal) {
        const auto& commands = *in_.commands;
        while (steps_.size() < length && budget_ > 0) {
            const bool final_slot = steps_.size() + 1 == length;
            const bool connected = session_->phase() == Phase::MqttConnected;

            const bool can_attack = attacks && connected && !in_.pool.empty();
            bool use_attack = can_attack && rng_.chance(cfg_.attack_probability);
            if (can_attack && final_slot && !has_attack_) use_attack = true;

            if (use_attack) {
                std::vector<double> weights;
                for (const auto& e : in_.pool) weights.push_back(e.weight);
                const auto& pattern = *in_.pool[rng_.weighted(weights)].pattern;
                auto action = pattern.bind(rng_, in_.attack_settings, *session_);
                auto fb = run(action);
                append(std::move(action), std::move(fb));
                has_attack_ = true;
            } else {
                std::vector<const catalog::Command*> eligible;
                for (const auto& c : commands) {
                    if (!c.terminal || (final_slot && allow_terminal)) eligible.push_back(&c);
                }
                const auto& command = *eligible[rng_.uniform(eligible.size())];
                auto action = catalog::bind(command, rng_);
                if (command.requires_phase == Phase::Fresh) add_credentials(command, action);
                auto fb = run(action);
                if (fb.verdict == Verdict::Accepted) {
                    append(std::move(action), std::move(fb));
                } else {
                    --budget_;
                    restore();
                    continue;
                }
            }
            if (session_->phase() == Phase::Closed) break;
        }
    }

    /// CONNECT carries the client credentials the target expects.
    void add_credentials(const catalog::Command& command, BoundAction& action) const {
        const auto& o = target_.session_options();
        if (!o.username) return;
        auto params = action.params;
        params["username"] = *o.username;
        if (o.password) params["password"] = *o.password;
        action = catalog::bind_with(command, params);
    }

    /// Appends one protocol violation that the broker does not accept.
    void add_violation() {
        budget_ = cfg_.rejection_budget;
        while (budget_ > 0) {
            if (session_->phase() == Phase::Closed) throw AttemptFailed{"session closed before the violation"};
            const auto candidates = catalog::violations_for(session_->phase());
            const auto& violation = *candidates[rng_.uniform(candidates.size())];
            auto action = violation.bind(rng_);
            auto fb = run(action);
            if (fb.verdict != Verdict::Accepted) {
                append(std::move(action), std::move(fb));
                return;
            }
            --budget_;
            restore();
        }
        throw AttemptFailed{"broker accepted every proposed violation"};
    }

    const GenConfig& cfg_;
    const harness::Target& target_;
    const GenInputs& in_;
    Rng& rng_;
    std::unique_ptr<Session> session_;
    std::vector<Step> steps_;
    std::size_t budget_ = 0;
    bool has_attack_ = false;
};

}  // namespace

std::string_view to_string(CaseKind kind) {
    switch (kind) {
        case CaseKind::Positive: return "positive";
        case CaseKind::Negative: return "negative";
        case CaseKind::Attack: return "attack";
    }
    return "?";
}

std::optional<CaseKind> parse_case_kind(std::string_view name) {
    if (name == "positive") return CaseKind::Positive;
    if (name == "negative") return CaseKind::Negative;
    if (name == "attack") return CaseKind::Attack;
    return std::nullopt;
}

void GenConfig::validate() const {
    if (max_length < 1) throw ConfigError("max_length must be >= 1");
    if (num_attack > 0 && max_length < 2) {
        throw ConfigError("attack cases need max_length >= 2 (a CONNECT precedes every attack)");
    }
    if (!(attack_probability >= 0.0 && attack_probability <= 1.0)) {
        throw ConfigError("attack_probability must be in [0, 1]");
    }
    if (rejection_budget < 1) throw ConfigError("rejection_budget must be >= 1");
}

std::string GenConfig::to_text() const {
    std::ostringstream out;
    out << "seed = " << seed << "\n"
        << "num_positive = " << num_positive << "\n"
        << "num_negative = " << num_negative << "\n"
        << "num_attack = " << num_attack << "\n"
        << "max_length = " << max_length << "\n"
        << "attack_probability = " << attack_probability << "\n"
        << "rejection_budget = " << rejection_budget << "\n";
    return out.str();
}

std::string config_digest(const GenConfig& config, const GenInputs& inputs) {
    std::ostringstream out;
    out << config.to_text();
    const auto& s = inputs.attack_settings;
    out << "attack.flood_publish.count = " << s.flood_publish_count << "\n"
        << "attack.flood_publish.payload_bytes = " << s.flood_publish_payload << "\n"
        << "attack.flood_connect.connections = " << s.flood_connect_connections << "\n"
        << "attack.flood_connect.concurrency = " << s.flood_connect_concurrency << "\n"
        << "attack.oversized_payload.bytes = " << s.oversized_payload_bytes << "\n";
    for (const auto& c : *inputs.commands) out << "command = " << c.name << "\n";
    for (const auto& e : inputs.pool) out << "pool." << e.pattern->id << " = " << e.weight << "\n";
    return sha256_hex(std::string_view(out.str()));
}

TestSuite generate_suite(const GenConfig& config, const harness::Target& target, const GenInputs& inputs) {
    config.validate();

    TestSuite suite;
    suite.config = config;
    suite.attack_settings = inputs.attack_settings;
    for (const auto& e : inputs.pool) suite.attack_pool.emplace_back(e.pattern->id, e.weight);
    suite.environment = Environment{target.environment_digest(), target.descriptor(), target.environment_text(),
                                    target.clock_kind()};

    const Provenance provenance{config.seed, config_digest(config, inputs), inputs.threat_digest};
    suite.suite_id =
        "suite-" + sha256_hex(std::string_view(provenance.config_digest + provenance.threat_digest +
                                               suite.environment.digest))
                       .substr(0, 16);

    const std::pair<CaseKind, std::size_t> plan[] = {
        {CaseKind::Positive, config.num_positive},
        {CaseKind::Negative, config.num_negative},
        {CaseKind::Attack, config.num_attack},
    };

    std::uint64_t index = 0;
    try {
        for (const auto& [kind, count] : plan) {
            for (std::size_t n = 0; n < count; ++n, ++index) {
                const auto id = case_id(kind, n);
                Rng rng = Rng::split(config.seed, index);
                CaseBuilder builder(config, target, inputs, rng);
                std::optional<std::vector<Step>> steps;
                std::string last_error;
                for (std::size_t attempt = 0; attempt < kAttemptsPerCase && !steps; ++attempt) {
                    try {
                        steps = builder.build(kind);
                    } catch (const AttemptFailed& e) {
                        last_error = e.what;
                    }
                }
                if (!steps) {
                    suite.diagnostics.push_back(id + ": gave up after " + std::to_string(kAttemptsPerCase) +
                                                " attempts: " + last_error);
                    continue;
                }
                suite.cases.push_back(TestCase{id, kind, std::move(*steps), provenance});
            }
        }
    } catch (const SutDown& e) {
        suite.complete = false;
        suite.diagnostics.push_back("generation aborted: " + e.what);
    }
    return suite;
}

}  // namespace tmtcg::gen
