#include "xml_dom.hpp"

#include <expat.h>

#include <algorithm>

namespace tmtcg::xml {

const std::string* Node::attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
        if (k == key) return &v;
    }
    return nullptr;
}

std::string Node::describe() const {
    return "<" + name + "> at line " + std::to_string(line) + ", column " + std::to_string(column);
}

namespace {

struct ParseState {
    XML_Parser parser = nullptr;
    std::unique_ptr<Node> root;
    std::vector<Node*> stack;
    std::string error;
};

void on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
    auto* st = static_cast<ParseState*>(user);
    auto node = std::make_unique<Node>();
    node->name = name;
    node->line = static_cast<int>(XML_GetCurrentLineNumber(st->parser));
    node->column = static_cast<int>(XML_GetCurrentColumnNumber(st->parser)) + 1;
    for (int i = 0; attrs[i] != nullptr; i += 2) node->attributes.emplace_back(attrs[i], attrs[i + 1]);
    Node* raw = node.get();
    if (st->stack.empty()) {
        st->root = std::move(node);
    } else {
        st->stack.back()->children.push_back(std::move(node));
    }
    st->stack.push_back(raw);
}

void on_end(void* user, const XML_Char*) {
    static_cast<ParseState*>(user)->stack.pop_back();
}

void on_text(void* user, const XML_Char* s, int len) {
    auto* st = static_cast<ParseState*>(user);
    if (!st->stack.empty()) st->stack.back()->text.append(s, static_cast<std::size_t>(len));
}

}  // namespace

std::unique_ptr<Node> parse(std::string_view document) {
    ParseState st;
    st.parser = XML_ParserCreate("UTF-8");
    if (st.parser == nullptr) throw std::bad_alloc();
    struct Free {
        XML_Parser p;
        ~Free() { XML_ParserFree(p); }
    } guard{st.parser};

    XML_SetUserData(st.parser, &st);
    XML_SetElementHandler(st.parser, on_start, on_end);
    XML_SetCharacterDataHandler(st.parser, on_text);

    if (XML_Parse(st.parser, document.data(), static_cast<int>(document.size()), XML_TRUE) == XML_STATUS_ERROR) {
        const int line = static_cast<int>(XML_GetCurrentLineNumber(st.parser));
        const int column = static_cast<int>(XML_GetCurrentColumnNumber(st.parser)) + 1;
        throw XmlParseError(XML_ErrorString(XML_GetErrorCode(st.parser)), line, column);
    }
    if (!st.root) throw XmlParseError("no root element", 1, 1);
    return std::move(st.root);
}

std::string escape_text(std::string_view value) {
    std::string out;
    out.reserve(value.size());
    for (char c : value) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string escape_attribute(std::string_view value) {
    std::string out;
    out.reserve(value.size());
    for (char c : value) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\n': out += "&#10;"; break;
            case '\r': out += "&#13;"; break;
            case '\t': out += "&#9;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

const std::string& require_attribute(const Node& node, std::string_view key) {
    if (const auto* v = node.attribute(key)) return *v;
    throw XmlSchemaError(node.describe() + ": missing attribute '" + std::string(key) + "'");
}

void allow_only_attributes(const Node& node, std::initializer_list<std::string_view> keys) {
    for (const auto& [k, v] : node.attributes) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
            throw XmlSchemaError(node.describe() + ": unexpected attribute '" + k + "'");
        }
    }
}

void require_no_text(const Node& node) {
    if (node.text.find_first_not_of(" \t\r\n") != std::string::npos) {
        throw XmlSchemaError(node.describe() + ": unexpected text content");
    }
}

}  // namespace tmtcg::xml
