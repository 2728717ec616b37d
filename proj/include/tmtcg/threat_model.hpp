#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tmtcg::threat {

enum class ElementKind { Process, DataStore, ExternalEntity, DataFlow, TrustBoundary };

enum class Category {
    Spoofing,
    Tampering,
    Repudiation,
    InformationDisclosure,
    DenialOfService,
    ElevationOfPrivilege,
};

inline constexpr std::array kAllElementKinds = {
    ElementKind::Process, ElementKind::DataStore, ElementKind::ExternalEntity,
    ElementKind::DataFlow, ElementKind::TrustBoundary,
};

inline constexpr std::array kAllCategories = {
    Category::Spoofing, Category::Tampering, Category::Repudiation,
    Category::InformationDisclosure, Category::DenialOfService, Category::ElevationOfPrivilege,
};

std::string_view to_string(ElementKind kind);
std::string_view to_string(Category category);
std::optional<ElementKind> parse_element_kind(std::string_view text);
std::optional<Category> parse_category(std::string_view text);

/// One node, flow or trust boundary of a data flow diagram.
struct DfdElement {
    std::string id;
    std::string name;
    ElementKind kind = ElementKind::Process;
    // Only meaningful for DataFlow.
    std::string source_id;
    std::string target_id;
    std::map<std::string, std::string> properties;

    bool operator==(const DfdElement&) const = default;
};

struct DfdModel {
    std::vector<DfdElement> elements;
    /// element id -> trust boundary id; elements without an entry sit outside
    /// every boundary.
    std::map<std::string, std::string> boundary_membership;

    const DfdElement* find(std::string_view id) const;

    bool operator==(const DfdModel&) const = default;
};

struct Violation {
    std::string element_id;
    std::string reason;

    bool operator==(const Violation&) const = default;
};

/// Every well-formedness violation of `model`; empty iff the model is valid.
std::vector<Violation> validate_dfd(const DfdModel& model);

/// True when the flow's endpoints sit in different trust zones.
bool crosses_boundary(const DfdModel& model, const DfdElement& flow);

struct ThreatTemplate {
    std::string template_id;
    Category category = Category::Spoofing;
    std::set<ElementKind> applies_to;
    /// DataFlow-only predicate: the template fires only for flows that cross
    /// a trust boundary.
    bool requires_boundary_crossing = false;
    /// May contain "{element}", replaced by the element name in derived threats.
    std::string title;
    std::string description;
    std::vector<std::string> attack_pattern_refs;

    bool operator==(const ThreatTemplate&) const = default;
};

/// Throws std::invalid_argument when the template breaks an invariant.
void check_template(const ThreatTemplate& t);

struct Threat {
    std::string threat_id;
    std::string template_id;
    std::string element_id;
    Category category = Category::Spoofing;
    std::string title;

    static std::string make_id(std::string_view template_id, std::string_view element_id);

    bool operator==(const Threat&) const = default;
};

class InvalidModelError : public std::runtime_error {
public:
    explicit InvalidModelError(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

/// True when template `t` yields a threat for element `e` of `model`.
bool applies(const ThreatTemplate& t, const DfdModel& model, const DfdElement& e);

/// All (template, element) matches, sorted by (element_id, template_id).
/// Throws InvalidModelError when validate_dfd reports violations and
/// std::invalid_argument for a broken template or duplicate template ids.
std::vector<Threat> derive_threats(const DfdModel& model, std::span<const ThreatTemplate> templates);

/// Per-element STRIDE table: Process -> STRIDE, DataStore -> TRID,
/// ExternalEntity -> SR, DataFlow -> TID. One template per category.
std::vector<ThreatTemplate> default_stride_templates();

/// client (ExternalEntity) -> broker (Process) over a single MQTT flow.
DfdModel demo_model();

}  // namespace tmtcg::threat
