#include "tmtcg/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace tmtcg {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::int64_t parse_int(std::string_view text) {
    std::int64_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty()) {
        throw ConfigError("not an integer: '" + std::string(text) + "'");
    }
    return value;
}

double parse_double(std::string_view text) {
    // std::from_chars for double needs GCC 11; keep istringstream for portability.
    std::istringstream in{std::string(text)};
    in.imbue(std::locale::classic());
    double value = 0.0;
    in >> value;
    if (text.empty() || in.fail() || !in.eof()) {
        throw ConfigError("not a number: '" + std::string(text) + "'");
    }
    return value;
}

bool parse_bool(std::string_view text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("not a boolean: '" + std::string(text) + "'");
}

KvConfig KvConfig::parse(std::string_view text, std::string_view source_name) {
    KvConfig cfg;
    cfg.source_ = std::string(source_name);
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        auto line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(cfg.source_ + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) {
            throw ConfigError(cfg.source_ + ":" + std::to_string(line_no) + ": empty key");
        }
        if (!cfg.entries_.emplace(key, KvEntry{value, line_no}).second) {
            throw ConfigError(cfg.source_ + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }
    return cfg;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

KvConfig KvConfig::load(const std::string& path) {
    return parse(read_text_file(path), path);
}

std::string KvConfig::where(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return source_;
    return source_ + ":" + std::to_string(it->second.line);
}

std::string KvConfig::get_string(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(source_ + ": missing key '" + key + "'");
    return it->second.value;
}

std::int64_t KvConfig::get_int(const std::string& key) const {
    try {
        return parse_int(get_string(key));
    } catch (const ConfigError& e) {
        throw ConfigError(where(key) + ": " + key + ": " + e.what());
    }
}

double KvConfig::get_double(const std::string& key) const {
    try {
        return parse_double(get_string(key));
    } catch (const ConfigError& e) {
        throw ConfigError(where(key) + ": " + key + ": " + e.what());
    }
}

bool KvConfig::get_bool(const std::string& key) const {
    try {
        return parse_bool(get_string(key));
    } catch (const ConfigError& e) {
        throw ConfigError(where(key) + ": " + key + ": " + e.what());
    }
}

}  // namespace tmtcg
