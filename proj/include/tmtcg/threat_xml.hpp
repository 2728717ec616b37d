#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tmtcg/risk.hpp"
#include "tmtcg/threat_model.hpp"

namespace tmtcg {

/// Malformed XML; carries the position reported by the parser.
class XmlParseError : public std::runtime_error {
public:
    XmlParseError(const std::string& reason, int line, int column)
        : std::runtime_error("XML parse error at line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ": " + reason),
          line_(line),
          column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// Well-formed XML that does not match the expected schema.
class XmlSchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace threat {

/// `<dfd version="1">` with `<element>`, `<flow>`, `<boundary>` and
/// `<membership>` children. Structural checks beyond the schema are left to
/// validate_dfd.
DfdModel parse_dfd_xml(std::string_view document);
std::string write_dfd_xml(const DfdModel& model);

std::vector<ThreatTemplate> parse_templates_xml(std::string_view document);
std::string write_templates_xml(std::span<const ThreatTemplate> templates);

}  // namespace threat

/// Threat list with optional provenance attributes on the root
/// (keys end in "-digest").
struct ThreatDocument {
    std::vector<risk::ScoredThreat> threats;
    std::map<std::string, std::string> provenance;

    bool operator==(const ThreatDocument&) const = default;
};

/// `<threats version="1">` document. Attribute order is fixed; output is
/// byte-identical for identical input. Throws std::invalid_argument when the
/// threats are not sorted by threat_id or a provenance key is not of the
/// form "<name>-digest".
std::string export_threats(std::span<const risk::ScoredThreat> threats,
                           const std::map<std::string, std::string>& provenance = {});

/// Inverse of export_threats. Throws XmlParseError (with line/column) or
/// XmlSchemaError (naming the offending node).
ThreatDocument import_threat_document(std::string_view document);
std::vector<risk::ScoredThreat> import_threats(std::string_view document);

}  // namespace tmtcg
