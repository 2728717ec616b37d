#pragma once

// Minimal element tree over expat, used by the DFD, template and threat
// list readers.

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tmtcg/threat_xml.hpp"

namespace tmtcg::xml {

struct Node {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;  // document order
    std::vector<std::unique_ptr<Node>> children;
    std::string text;
    int line = 0;
    int column = 0;

    const std::string* attribute(std::string_view key) const;
    std::string describe() const;  // "<name> at line L, column C"
};

/// Throws XmlParseError with the expat line/column on malformed input.
std::unique_ptr<Node> parse(std::string_view document);

/// Escapes &, <, >, " and control whitespace for attribute values.
std::string escape_attribute(std::string_view value);
std::string escape_text(std::string_view value);

/// Schema helpers: throw XmlSchemaError naming the node.
const std::string& require_attribute(const Node& node, std::string_view key);
void allow_only_attributes(const Node& node, std::initializer_list<std::string_view> keys);
void require_no_text(const Node& node);

}  // namespace tmtcg::xml
