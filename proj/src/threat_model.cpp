#include "tmtcg/threat_model.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace tmtcg::threat {

std::string_view to_string(ElementKind kind) {
    switch (kind) {
        case ElementKind::Process: return "Process";
        case ElementKind::DataStore: return "DataStore";
        case ElementKind::ExternalEntity: return "ExternalEntity";
        case ElementKind::DataFlow: return "DataFlow";
        case ElementKind::TrustBoundary: return "TrustBoundary";
    }
    return "?";
}

std::string_view to_string(Category category) {
    switch (category) {
        case Category::Spoofing: return "Spoofing";
        case Category::Tampering: return "Tampering";
        case Category::Repudiation: return "Repudiation";
        case Category::InformationDisclosure: return "InformationDisclosure";
        case Category::DenialOfService: return "DenialOfService";
        case Category::ElevationOfPrivilege: return "ElevationOfPrivilege";
    }
    return "?";
}

std::optional<ElementKind> parse_element_kind(std::string_view text) {
    for (auto k : kAllElementKinds) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

std::optional<Category> parse_category(std::string_view text) {
    for (auto c : kAllCategories) {
        if (to_string(c) == text) return c;
    }
    return std::nullopt;
}

const DfdElement* DfdModel::find(std::string_view id) const {
    auto it = std::find_if(elements.begin(), elements.end(), [&](const DfdElement& e) { return e.id == id; });
    return it == elements.end() ? nullptr : &*it;
}

std::vector<Violation> validate_dfd(const DfdModel& model) {
    std::vector<Violation> out;

    std::unordered_map<std::string, const DfdElement*> by_id;
    std::unordered_set<std::string> reported_dup;
    for (const auto& e : model.elements) {
        if (e.id.empty()) {
            out.push_back({e.id, "empty element id"});
            continue;
        }
        if (!by_id.emplace(e.id, &e).second && reported_dup.insert(e.id).second) {
            out.push_back({e.id, "duplicate id \"" + e.id + "\""});
        }
    }

    auto check_endpoint = [&](const DfdElement& flow, const std::string& ref, std::string_view role) {
        auto it = by_id.find(ref);
        if (ref.empty() || it == by_id.end()) {
            out.push_back({flow.id, "dangling endpoint: " + std::string(role) + " \"" + ref + "\" does not exist"});
            return;
        }
        const auto kind = it->second->kind;
        if (kind == ElementKind::DataFlow || kind == ElementKind::TrustBoundary) {
            out.push_back({flow.id, std::string(role) + " \"" + ref + "\" is a " + std::string(to_string(kind)) +
                                        ", not a node"});
        }
    };

    for (const auto& e : model.elements) {
        if (e.kind != ElementKind::DataFlow) continue;
        check_endpoint(e, e.source_id, "source");
        check_endpoint(e, e.target_id, "target");
        if (!e.source_id.empty() && e.source_id == e.target_id) {
            out.push_back({e.id, "self-loop flow: source and target are both \"" + e.source_id + "\""});
        }
    }

    for (const auto& [element, boundary] : model.boundary_membership) {
        if (by_id.find(element) == by_id.end()) {
            out.push_back({element, "membership references unknown element \"" + element + "\""});
        }
        auto it = by_id.find(boundary);
        if (it == by_id.end()) {
            out.push_back({element, "membership references unknown boundary \"" + boundary + "\""});
        } else if (it->second->kind != ElementKind::TrustBoundary) {
            out.push_back({element, "membership references \"" + boundary + "\", which is not a TrustBoundary"});
        }
    }
    return out;
}

bool crosses_boundary(const DfdModel& model, const DfdElement& flow) {
    if (flow.kind != ElementKind::DataFlow) return false;
    auto zone = [&](const std::string& id) -> std::optional<std::string> {
        auto it = model.boundary_membership.find(id);
        if (it == model.boundary_membership.end()) return std::nullopt;
        return it->second;
    };
    return zone(flow.source_id) != zone(flow.target_id);
}

void check_template(const ThreatTemplate& t) {
    if (t.template_id.empty()) throw std::invalid_argument("threat template with empty id");
    if (t.template_id.find('@') != std::string::npos) {
        throw std::invalid_argument("threat template " + t.template_id + ": id must not contain '@'");
    }
    if (t.applies_to.empty()) {
        throw std::invalid_argument("threat template " + t.template_id + ": applies_to is empty");
    }
    if (t.requires_boundary_crossing && !t.applies_to.count(ElementKind::DataFlow)) {
        throw std::invalid_argument("threat template " + t.template_id +
                                    ": requires_boundary_crossing without DataFlow in applies_to");
    }
}

std::string Threat::make_id(std::string_view template_id, std::string_view element_id) {
    std::string id;
    id.reserve(template_id.size() + element_id.size() + 1);
    id.append(template_id).append("@").append(element_id);
    return id;
}

InvalidModelError::InvalidModelError(std::vector<Violation> violations)
    : std::runtime_error([&] {
          std::string msg = "invalid DFD model (" + std::to_string(violations.size()) + " violation(s))";
          for (const auto& v : violations) msg += "\n  " + v.element_id + ": " + v.reason;
          return msg;
      }()),
      violations_(std::move(violations)) {}

bool applies(const ThreatTemplate& t, const DfdModel& model, const DfdElement& e) {
    if (!t.applies_to.count(e.kind)) return false;
    return !t.requires_boundary_crossing || crosses_boundary(model, e);
}

namespace {

std::string substitute_element(std::string title, const std::string& name) {
    static constexpr std::string_view kPlaceholder = "{element}";
    for (auto pos = title.find(kPlaceholder); pos != std::string::npos;
         pos = title.find(kPlaceholder, pos + name.size())) {
        title.replace(pos, kPlaceholder.size(), name);
    }
    return title;
}

}  // namespace

std::vector<Threat> derive_threats(const DfdModel& model, std::span<const ThreatTemplate> templates) {
    if (auto violations = validate_dfd(model); !violations.empty()) {
        throw InvalidModelError(std::move(violations));
    }
    std::unordered_set<std::string> template_ids;
    for (const auto& t : templates) {
        check_template(t);
        if (!template_ids.insert(t.template_id).second) {
            throw std::invalid_argument("duplicate threat template id " + t.template_id);
        }
    }

    std::vector<Threat> out;
    for (const auto& e : model.elements) {
        for (const auto& t : templates) {
            if (!applies(t, model, e)) continue;
            out.push_back(Threat{
                .threat_id = Threat::make_id(t.template_id, e.id),
                .template_id = t.template_id,
                .element_id = e.id,
                .category = t.category,
                .title = substitute_element(t.title, e.name.empty() ? e.id : e.name),
            });
        }
    }
    std::sort(out.begin(), out.end(), [](const Threat& a, const Threat& b) {
        return std::tie(a.element_id, a.template_id) < std::tie(b.element_id, b.template_id);
    });
    return out;
}

std::vector<ThreatTemplate> default_stride_templates() {
    using K = ElementKind;
    return {
        {"stride.spoofing", Category::Spoofing, {K::Process, K::ExternalEntity}, false,
         "Spoofing of {element}", "An attacker impersonates the identity of {element}.", {"client_id_spoof"}},
        {"stride.tampering", Category::Tampering, {K::Process, K::DataStore, K::DataFlow}, false,
         "Tampering with {element}", "Data handled by {element} is modified in transit or at rest.",
         {"malformed_frame"}},
        {"stride.repudiation", Category::Repudiation, {K::Process, K::DataStore, K::ExternalEntity}, false,
         "Repudiation by {element}", "Actions performed through {element} cannot be attributed.", {}},
        {"stride.information_disclosure", Category::InformationDisclosure, {K::Process, K::DataStore, K::DataFlow},
         false, "Information disclosure from {element}", "Data handled by {element} is exposed to unauthorized parties.",
         {}},
        {"stride.denial_of_service", Category::DenialOfService, {K::Process, K::DataStore, K::DataFlow}, false,
         "Denial of service against {element}", "{element} is made unavailable to legitimate users.",
         {"flood_publish", "flood_connect", "oversized_payload"}},
        {"stride.elevation_of_privilege", Category::ElevationOfPrivilege, {K::Process}, false,
         "Elevation of privilege in {element}", "An attacker gains capabilities on {element} beyond those granted.",
         {"auth_bypass_probe"}},
    };
}

DfdModel demo_model() {
    DfdModel m;
    DfdElement client;
    client.id = "client";
    client.name = "Field device";
    client.kind = ElementKind::ExternalEntity;
    m.elements.push_back(client);
    DfdElement broker;
    broker.id = "broker";
    broker.name = "MQTT data hub";
    broker.kind = ElementKind::Process;
    broker.properties = {{"protocol", "mqtt"}, {"port", "1883"}};
    m.elements.push_back(broker);
    m.elements.push_back({.id = "flow",
                          .name = "Telemetry publish",
                          .kind = ElementKind::DataFlow,
                          .source_id = "client",
                          .target_id = "broker",
                          .properties = {{"protocol", "mqtt"}}});
    return m;
}

}  // namespace tmtcg::threat
