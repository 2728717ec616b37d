#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tmtcg/threat_model.hpp"

namespace tmtcg::risk {

using threat::Category;
using threat::ElementKind;

inline constexpr int kMinLevel = 1;
inline constexpr int kMaxLevel = 5;
inline constexpr int kMaxScore = kMaxLevel * kMaxLevel;

/// 5x5 likelihood x impact matrix with a selection threshold.
///
/// Lookups are total: categories or (category, kind) pairs without an
/// explicit entry fall back to the default level.
class RiskMatrix {
public:
    static constexpr int kDefaultLevel = 3;

    /// The shipped configuration; see data/default.matrix.
    static RiskMatrix defaults();

    int likelihood(Category c) const;
    int impact(Category c, ElementKind k) const;
    int threshold() const { return threshold_; }

    void set_likelihood(Category c, int level);
    void set_impact(Category c, ElementKind k, int level);
    void set_threshold(int threshold);

    /// Line-oriented text: `likelihood.<Category> = n`,
    /// `impact.<Category>.<Kind> = n`, `threshold = n`. Entries override
    /// defaults(); unknown keys and out-of-range values throw ConfigError.
    static RiskMatrix parse(std::string_view text, std::string_view source_name = "<matrix>");
    static RiskMatrix load(const std::string& path);

    /// Canonical text form listing every entry; parse(to_text()) == *this.
    std::string to_text() const;

    /// Equal when every lookup and the threshold agree.
    bool operator==(const RiskMatrix& other) const;

private:
    std::map<Category, int> likelihood_;
    std::map<std::pair<Category, ElementKind>, int> impact_;
    int threshold_ = 12;
};

struct ScoredThreat {
    threat::Threat threat;
    int likelihood = kMinLevel;
    int impact = kMinLevel;
    int score = kMinLevel;
    bool selected = false;

    bool operator==(const ScoredThreat&) const = default;
};

/// Scores each threat, preserving order. The element kind for the impact
/// lookup comes from `model`; throws std::invalid_argument for a threat
/// whose element is not in the model.
std::vector<ScoredThreat> assess(std::span<const threat::Threat> threats, const threat::DfdModel& model,
                                 const RiskMatrix& matrix);

/// Attack ids tagged with each category, for threats whose template
/// carries no explicit attack references.
using CategoryAttackIndex = std::map<Category, std::vector<std::string>>;

/// attack id -> max(score / 25) over the selected threats that enable it.
/// A threat enables the attacks its template references; when the template
/// has no references (or is not among `templates`) it enables every attack
/// listed for its category in `fallback`.
std::map<std::string, double> prioritized_weights(std::span<const ScoredThreat> scored,
                                                  std::span<const threat::ThreatTemplate> templates,
                                                  const CategoryAttackIndex& fallback);

}  // namespace tmtcg::risk
