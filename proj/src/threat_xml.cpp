#include "tmtcg/threat_xml.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "xml_dom.hpp"

namespace tmtcg {

namespace {

constexpr std::string_view kXmlDecl = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";

void require_root(const xml::Node& root, std::string_view name) {
    if (root.name != name) {
        throw XmlSchemaError(root.describe() + ": expected root element <" + std::string(name) + ">");
    }
    const auto& version = xml::require_attribute(root, "version");
    if (version != "1") {
        throw XmlSchemaError(root.describe() + ": unsupported version \"" + version + "\"");
    }
}

int require_int(const xml::Node& node, std::string_view key) {
    const auto& text = xml::require_attribute(node, key);
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw XmlSchemaError(node.describe() + ": attribute '" + std::string(key) + "' is not an integer: \"" + text +
                             "\"");
    }
    return value;
}

bool require_bool(const xml::Node& node, std::string_view key) {
    const auto& text = xml::require_attribute(node, key);
    if (text == "true") return true;
    if (text == "false") return false;
    throw XmlSchemaError(node.describe() + ": attribute '" + std::string(key) + "' must be true or false, got \"" +
                         text + "\"");
}

bool is_digest_key(std::string_view key) {
    constexpr std::string_view kSuffix = "-digest";
    return key.size() > kSuffix.size() && key.substr(key.size() - kSuffix.size()) == kSuffix &&
           std::all_of(key.begin(), key.end(), [](char c) { return (c >= 'a' && c <= 'z') || c == '-'; });
}

threat::Category require_category(const xml::Node& node) {
    const auto& text = xml::require_attribute(node, "category");
    auto c = threat::parse_category(text);
    if (!c) {
        throw XmlSchemaError(node.describe() + ": \"" + text + "\" is not a STRIDE category");
    }
    return *c;
}

void read_properties(const xml::Node& node, threat::DfdElement& e) {
    for (const auto& child : node.children) {
        if (child->name != "property") {
            throw XmlSchemaError(child->describe() + ": unexpected element inside <" + node.name + ">");
        }
        xml::allow_only_attributes(*child, {"key", "value"});
        const auto& key = xml::require_attribute(*child, "key");
        if (!e.properties.emplace(key, xml::require_attribute(*child, "value")).second) {
            throw XmlSchemaError(child->describe() + ": duplicate property '" + key + "'");
        }
    }
}

void write_properties(std::ostringstream& out, const threat::DfdElement& e, std::string_view tag) {
    if (e.properties.empty()) {
        out << "/>\n";
        return;
    }
    out << ">\n";
    for (const auto& [k, v] : e.properties) {
        out << "    <property key=\"" << xml::escape_attribute(k) << "\" value=\"" << xml::escape_attribute(v)
            << "\"/>\n";
    }
    out << "  </" << tag << ">\n";
}

}  // namespace

namespace threat {

DfdModel parse_dfd_xml(std::string_view document) {
    const auto root = xml::parse(document);
    require_root(*root, "dfd");
    xml::allow_only_attributes(*root, {"version", "name"});
    xml::require_no_text(*root);

    DfdModel model;
    for (const auto& child : root->children) {
        const auto& n = *child;
        xml::require_no_text(n);
        if (n.name == "element") {
            xml::allow_only_attributes(n, {"id", "kind", "name"});
            DfdElement e;
            e.id = xml::require_attribute(n, "id");
            const auto& kind_text = xml::require_attribute(n, "kind");
            auto kind = parse_element_kind(kind_text);
            if (!kind || *kind == ElementKind::DataFlow || *kind == ElementKind::TrustBoundary) {
                throw XmlSchemaError(n.describe() + ": kind must be Process, DataStore or ExternalEntity, got \"" +
                                     kind_text + "\"");
            }
            e.kind = *kind;
            e.name = xml::require_attribute(n, "name");
            read_properties(n, e);
            model.elements.push_back(std::move(e));
        } else if (n.name == "flow") {
            xml::allow_only_attributes(n, {"id", "source", "target", "name"});
            DfdElement e;
            e.kind = ElementKind::DataFlow;
            e.id = xml::require_attribute(n, "id");
            e.source_id = xml::require_attribute(n, "source");
            e.target_id = xml::require_attribute(n, "target");
            if (const auto* name = n.attribute("name")) e.name = *name;
            read_properties(n, e);
            model.elements.push_back(std::move(e));
        } else if (n.name == "boundary") {
            xml::allow_only_attributes(n, {"id", "name"});
            DfdElement e;
            e.kind = ElementKind::TrustBoundary;
            e.id = xml::require_attribute(n, "id");
            if (const auto* name = n.attribute("name")) e.name = *name;
            read_properties(n, e);
            model.elements.push_back(std::move(e));
        } else if (n.name == "membership") {
            xml::allow_only_attributes(n, {"element", "boundary"});
            const auto& element = xml::require_attribute(n, "element");
            if (!model.boundary_membership.emplace(element, xml::require_attribute(n, "boundary")).second) {
                throw XmlSchemaError(n.describe() + ": element \"" + element + "\" already has a boundary");
            }
        } else {
            throw XmlSchemaError(n.describe() + ": unexpected element in <dfd>");
        }
    }
    return model;
}

std::string write_dfd_xml(const DfdModel& model) {
    std::ostringstream out;
    out << kXmlDecl << "<dfd version=\"1\">\n";
    for (const auto& e : model.elements) {
        switch (e.kind) {
            case ElementKind::DataFlow:
                out << "  <flow id=\"" << xml::escape_attribute(e.id) << "\" source=\""
                    << xml::escape_attribute(e.source_id) << "\" target=\"" << xml::escape_attribute(e.target_id)
                    << "\"";
                if (!e.name.empty()) out << " name=\"" << xml::escape_attribute(e.name) << "\"";
                write_properties(out, e, "flow");
                break;
            case ElementKind::TrustBoundary:
                out << "  <boundary id=\"" << xml::escape_attribute(e.id) << "\"";
                if (!e.name.empty()) out << " name=\"" << xml::escape_attribute(e.name) << "\"";
                write_properties(out, e, "boundary");
                break;
            default:
                out << "  <element id=\"" << xml::escape_attribute(e.id) << "\" kind=\"" << to_string(e.kind)
                    << "\" name=\"" << xml::escape_attribute(e.name) << "\"";
                write_properties(out, e, "element");
        }
    }
    for (const auto& [element, boundary] : model.boundary_membership) {
        out << "  <membership element=\"" << xml::escape_attribute(element) << "\" boundary=\""
            << xml::escape_attribute(boundary) << "\"/>\n";
    }
    out << "</dfd>\n";
    return out.str();
}

std::vector<ThreatTemplate> parse_templates_xml(std::string_view document) {
    const auto root = xml::parse(document);
    require_root(*root, "templates");
    xml::allow_only_attributes(*root, {"version"});
    xml::require_no_text(*root);

    std::vector<ThreatTemplate> out;
    for (const auto& child : root->children) {
        const auto& n = *child;
        if (n.name != "template") throw XmlSchemaError(n.describe() + ": unexpected element in <templates>");
        xml::allow_only_attributes(n, {"id", "category", "title", "requires-boundary-crossing"});
        xml::require_no_text(n);
        ThreatTemplate t;
        t.template_id = xml::require_attribute(n, "id");
        t.category = require_category(n);
        t.title = xml::require_attribute(n, "title");
        if (n.attribute("requires-boundary-crossing")) {
            t.requires_boundary_crossing = require_bool(n, "requires-boundary-crossing");
        }
        for (const auto& sub : n.children) {
            if (sub->name == "applies") {
                xml::allow_only_attributes(*sub, {"kind"});
                const auto& kind_text = xml::require_attribute(*sub, "kind");
                auto kind = parse_element_kind(kind_text);
                if (!kind) throw XmlSchemaError(sub->describe() + ": unknown element kind \"" + kind_text + "\"");
                t.applies_to.insert(*kind);
            } else if (sub->name == "attack") {
                xml::allow_only_attributes(*sub, {"ref"});
                t.attack_pattern_refs.push_back(xml::require_attribute(*sub, "ref"));
            } else if (sub->name == "description") {
                t.description = sub->text;
            } else {
                throw XmlSchemaError(sub->describe() + ": unexpected element in <template>");
            }
        }
        try {
            check_template(t);
        } catch (const std::invalid_argument& e) {
            throw XmlSchemaError(n.describe() + ": " + e.what());
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::string write_templates_xml(std::span<const ThreatTemplate> templates) {
    std::ostringstream out;
    out << kXmlDecl << "<templates version=\"1\">\n";
    for (const auto& t : templates) {
        out << "  <template id=\"" << xml::escape_attribute(t.template_id) << "\" category=\""
            << to_string(t.category) << "\" title=\"" << xml::escape_attribute(t.title)
            << "\" requires-boundary-crossing=\"" << (t.requires_boundary_crossing ? "true" : "false") << "\">\n";
        for (auto k : t.applies_to) out << "    <applies kind=\"" << to_string(k) << "\"/>\n";
        for (const auto& ref : t.attack_pattern_refs) {
            out << "    <attack ref=\"" << xml::escape_attribute(ref) << "\"/>\n";
        }
        if (!t.description.empty()) {
            out << "    <description>" << xml::escape_text(t.description) << "</description>\n";
        }
        out << "  </template>\n";
    }
    out << "</templates>\n";
    return out.str();
}

}  // namespace threat

std::string export_threats(std::span<const risk::ScoredThreat> threats,
                           const std::map<std::string, std::string>& provenance) {
    for (std::size_t i = 1; i < threats.size(); ++i) {
        if (!(threats[i - 1].threat.threat_id < threats[i].threat.threat_id)) {
            throw std::invalid_argument("export_threats: threats must be sorted by unique threat_id");
        }
    }
    std::ostringstream out;
    out << kXmlDecl << "<threats version=\"1\"";
    for (const auto& [key, value] : provenance) {
        if (!is_digest_key(key)) throw std::invalid_argument("export_threats: bad provenance key '" + key + "'");
        out << " " << key << "=\"" << xml::escape_attribute(value) << "\"";
    }
    if (threats.empty()) {
        out << "/>\n";
        return out.str();
    }
    out << ">\n";
    for (const auto& s : threats) {
        const auto& t = s.threat;
        out << "  <threat id=\"" << xml::escape_attribute(t.threat_id) << "\" template=\""
            << xml::escape_attribute(t.template_id) << "\" element=\"" << xml::escape_attribute(t.element_id)
            << "\" category=\"" << threat::to_string(t.category) << "\" likelihood=\"" << s.likelihood
            << "\" impact=\"" << s.impact << "\" score=\"" << s.score << "\" selected=\""
            << (s.selected ? "true" : "false") << "\" title=\"" << xml::escape_attribute(t.title) << "\"/>\n";
    }
    out << "</threats>\n";
    return out.str();
}

ThreatDocument import_threat_document(std::string_view document) {
    const auto root = xml::parse(document);
    require_root(*root, "threats");
    xml::require_no_text(*root);

    ThreatDocument doc;
    for (const auto& [key, value] : root->attributes) {
        if (key == "version") continue;
        if (!is_digest_key(key)) throw XmlSchemaError(root->describe() + ": unexpected attribute '" + key + "'");
        doc.provenance.emplace(key, value);
    }

    for (const auto& child : root->children) {
        const auto& n = *child;
        if (n.name != "threat") throw XmlSchemaError(n.describe() + ": unexpected element in <threats>");
        if (!n.children.empty()) throw XmlSchemaError(n.describe() + ": <threat> takes no children");
        xml::require_no_text(n);
        xml::allow_only_attributes(
            n, {"id", "template", "element", "category", "likelihood", "impact", "score", "selected", "title"});

        risk::ScoredThreat s;
        s.threat.threat_id = xml::require_attribute(n, "id");
        s.threat.template_id = xml::require_attribute(n, "template");
        s.threat.element_id = xml::require_attribute(n, "element");
        s.threat.category = require_category(n);
        if (const auto* title = n.attribute("title")) s.threat.title = *title;
        s.likelihood = require_int(n, "likelihood");
        s.impact = require_int(n, "impact");
        s.score = require_int(n, "score");
        s.selected = require_bool(n, "selected");

        if (s.threat.threat_id != threat::Threat::make_id(s.threat.template_id, s.threat.element_id)) {
            throw XmlSchemaError(n.describe() + ": id \"" + s.threat.threat_id + "\" does not match template@element");
        }
        if (s.likelihood < risk::kMinLevel || s.likelihood > risk::kMaxLevel || s.impact < risk::kMinLevel ||
            s.impact > risk::kMaxLevel) {
            throw XmlSchemaError(n.describe() + ": likelihood and impact must be in 1..5");
        }
        if (s.score != s.likelihood * s.impact) {
            throw XmlSchemaError(n.describe() + ": score " + std::to_string(s.score) + " != likelihood x impact");
        }
        if (!doc.threats.empty() && !(doc.threats.back().threat.threat_id < s.threat.threat_id)) {
            throw XmlSchemaError(n.describe() + ": threats must be sorted by unique id");
        }
        doc.threats.push_back(std::move(s));
    }
    return doc;
}

std::vector<risk::ScoredThreat> import_threats(std::string_view document) {
    return import_threat_document(document).threats;
}

}  // namespace tmtcg
