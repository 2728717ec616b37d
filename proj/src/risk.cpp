#include "tmtcg/risk.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "tmtcg/kv_config.hpp"

namespace tmtcg::risk {

namespace {

void check_level(int level, std::string_view what) {
    if (level < kMinLevel || level > kMaxLevel) {
        throw ConfigError(std::string(what) + " must be in 1..5, got " + std::to_string(level));
    }
}

}  // namespace

RiskMatrix RiskMatrix::defaults() {
    RiskMatrix m;
    m.set_likelihood(Category::Spoofing, 3);
    m.set_likelihood(Category::Tampering, 3);
    m.set_likelihood(Category::Repudiation, 2);
    m.set_likelihood(Category::InformationDisclosure, 3);
    m.set_likelihood(Category::DenialOfService, 4);
    m.set_likelihood(Category::ElevationOfPrivilege, 2);

    m.set_impact(Category::Spoofing, ElementKind::Process, 4);
    m.set_impact(Category::Tampering, ElementKind::Process, 4);
    m.set_impact(Category::Tampering, ElementKind::DataFlow, 4);
    m.set_impact(Category::InformationDisclosure, ElementKind::DataStore, 4);
    m.set_impact(Category::DenialOfService, ElementKind::Process, 5);
    m.set_impact(Category::ElevationOfPrivilege, ElementKind::Process, 5);
    m.set_threshold(12);
    return m;
}

int RiskMatrix::likelihood(Category c) const {
    auto it = likelihood_.find(c);
    return it == likelihood_.end() ? kDefaultLevel : it->second;
}

int RiskMatrix::impact(Category c, ElementKind k) const {
    auto it = impact_.find({c, k});
    return it == impact_.end() ? kDefaultLevel : it->second;
}

void RiskMatrix::set_likelihood(Category c, int level) {
    check_level(level, "likelihood." + std::string(threat::to_string(c)));
    likelihood_[c] = level;
}

void RiskMatrix::set_impact(Category c, ElementKind k, int level) {
    check_level(level, "impact." + std::string(threat::to_string(c)) + "." + std::string(threat::to_string(k)));
    impact_[{c, k}] = level;
}

void RiskMatrix::set_threshold(int threshold) {
    if (threshold < 1 || threshold > kMaxScore) {
        throw ConfigError("threshold must be in 1..25, got " + std::to_string(threshold));
    }
    threshold_ = threshold;
}

RiskMatrix RiskMatrix::parse(std::string_view text, std::string_view source_name) {
    const auto cfg = KvConfig::parse(text, source_name);
    RiskMatrix m = defaults();
    for (const auto& [key, entry] : cfg.entries()) {
        const auto where = cfg.where(key);
        try {
            if (key == "threshold") {
                m.set_threshold(static_cast<int>(cfg.get_int(key)));
                continue;
            }
            const auto dot = key.find('.');
            const std::string head = key.substr(0, dot);
            if (head == "likelihood" && dot != std::string::npos) {
                auto cat = threat::parse_category(key.substr(dot + 1));
                if (!cat) throw ConfigError("unknown category in key '" + key + "'");
                m.set_likelihood(*cat, static_cast<int>(cfg.get_int(key)));
                continue;
            }
            if (head == "impact" && dot != std::string::npos) {
                const auto rest = key.substr(dot + 1);
                const auto dot2 = rest.find('.');
                if (dot2 == std::string::npos) throw ConfigError("impact key needs <Category>.<Kind>: '" + key + "'");
                auto cat = threat::parse_category(rest.substr(0, dot2));
                auto kind = threat::parse_element_kind(rest.substr(dot2 + 1));
                if (!cat || !kind) throw ConfigError("unknown category or element kind in key '" + key + "'");
                m.set_impact(*cat, *kind, static_cast<int>(cfg.get_int(key)));
                continue;
            }
            throw ConfigError("unknown key '" + key + "'");
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            // get_int already prefixes the location.
            if (msg.rfind(where, 0) == 0) throw;
            throw ConfigError(where + ": " + msg);
        }
    }
    return m;
}

RiskMatrix RiskMatrix::load(const std::string& path) {
    return parse(read_text_file(path), path);
}

bool RiskMatrix::operator==(const RiskMatrix& other) const {
    if (threshold_ != other.threshold_) return false;
    for (auto c : threat::kAllCategories) {
        if (likelihood(c) != other.likelihood(c)) return false;
        for (auto k : threat::kAllElementKinds) {
            if (impact(c, k) != other.impact(c, k)) return false;
        }
    }
    return true;
}

std::string RiskMatrix::to_text() const {
    std::ostringstream out;
    for (auto c : threat::kAllCategories) {
        out << "likelihood." << threat::to_string(c) << " = " << likelihood(c) << "\n";
    }
    for (auto c : threat::kAllCategories) {
        for (auto k : threat::kAllElementKinds) {
            out << "impact." << threat::to_string(c) << "." << threat::to_string(k) << " = " << impact(c, k) << "\n";
        }
    }
    out << "threshold = " << threshold_ << "\n";
    return out.str();
}

std::vector<ScoredThreat> assess(std::span<const threat::Threat> threats, const threat::DfdModel& model,
                                 const RiskMatrix& matrix) {
    std::vector<ScoredThreat> out;
    out.reserve(threats.size());
    for (const auto& t : threats) {
        const auto* element = model.find(t.element_id);
        if (element == nullptr) {
            throw std::invalid_argument("threat " + t.threat_id + " references element \"" + t.element_id +
                                        "\" which is not in the model");
        }
        ScoredThreat s{.threat = t};
        s.likelihood = matrix.likelihood(t.category);
        s.impact = matrix.impact(t.category, element->kind);
        s.score = s.likelihood * s.impact;
        s.selected = s.score >= matrix.threshold();
        out.push_back(std::move(s));
    }
    return out;
}

std::map<std::string, double> prioritized_weights(std::span<const ScoredThreat> scored,
                                                  std::span<const threat::ThreatTemplate> templates,
                                                  const CategoryAttackIndex& fallback) {
    std::map<std::string, double> weights;
    auto raise = [&](const std::string& attack, double w) {
        auto [it, inserted] = weights.emplace(attack, w);
        if (!inserted) it->second = std::max(it->second, w);
    };
    for (const auto& s : scored) {
        if (!s.selected) continue;
        const double w = static_cast<double>(s.score) / kMaxScore;
        auto tmpl = std::find_if(templates.begin(), templates.end(),
                                 [&](const threat::ThreatTemplate& t) { return t.template_id == s.threat.template_id; });
        if (tmpl != templates.end() && !tmpl->attack_pattern_refs.empty()) {
            for (const auto& ref : tmpl->attack_pattern_refs) raise(ref, w);
            continue;
        }
        if (auto it = fallback.find(s.threat.category); it != fallback.end()) {
            for (const auto& id : it->second) raise(id, w);
        }
    }
    return weights;
}

}  // namespace tmtcg::risk
