#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tmtcg/catalog.hpp"
#include "tmtcg/harness/session.hpp"
#include "tmtcg/kv_config.hpp"
#include "tmtcg/risk.hpp"
#include "tmtcg/rng.hpp"
#include "tmtcg/threat_model.hpp"

namespace tmtcg::attacks {

struct AttackSettings {
    std::size_t flood_publish_count = 1000;
    std::size_t flood_publish_payload = 16;
    std::size_t flood_connect_connections = 100;
    std::size_t flood_connect_concurrency = 8;
    std::size_t oversized_payload_bytes = 70'000;

    /// Reads `attack.<field>` keys; absent keys keep their defaults.
    static AttackSettings from_config(const KvConfig& config);
    bool operator==(const AttackSettings&) const = default;
};

struct AttackPattern {
    std::string id;
    std::string title;
    std::vector<threat::Category> categories;
    std::string catalog_ref;
    std::vector<catalog::ParamSpec> params;
    /// Verdicts a well-behaved broker produces. Anything else is a finding.
    std::vector<harness::Verdict> robust_verdicts;
    /// Draws parameters and builds every frame the attack will send.
    std::function<catalog::BoundAction(Rng&, const AttackSettings&, const harness::Session&)> bind;
    /// Sends exactly the bound frames; the same action replays identically.
    std::function<harness::Feedback(harness::Session&, const catalog::BoundAction&)> execute;

    bool is_robust(harness::Verdict v) const;
};

/// flood_publish, flood_connect, malformed_frame, oversized_payload,
/// client_id_spoof, auth_bypass_probe; sorted by id.
const std::vector<AttackPattern>& builtin_attacks();
const AttackPattern* find_attack(const std::vector<AttackPattern>& library, std::string_view id);

/// Attack ids per category, for threats without explicit references.
risk::CategoryAttackIndex category_index(const std::vector<AttackPattern>& library);

struct PoolEntry {
    const AttackPattern* pattern = nullptr;
    double weight = 0;
};
using AttackPool = std::vector<PoolEntry>;  // ordered by attack id

/// Attacks with weight > 0. Throws ConfigError naming an unknown id.
AttackPool select_attacks(const std::map<std::string, double>& weights, const std::vector<AttackPattern>& library);

/// Runs a bound action on `session`: regular actions send their single frame,
/// attacks dispatch to their pattern. Throws std::invalid_argument for an
/// unknown attack.
harness::Feedback execute_action(harness::Session& session, const catalog::BoundAction& action,
                                 const std::vector<AttackPattern>& library = builtin_attacks());

}  // namespace tmtcg::attacks
