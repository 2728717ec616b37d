#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tmtcg {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One `key = value` entry with the line it came from.
struct KvEntry {
    std::string value;
    int line = 0;
};

/// Parsed line-oriented config: `key = value` per line, `#` starts a
/// comment, blank lines ignored. Duplicate keys are an error.
class KvConfig {
public:
    static KvConfig parse(std::string_view text, std::string_view source_name = "<config>");
    static KvConfig load(const std::string& path);

    const std::map<std::string, KvEntry>& entries() const { return entries_; }
    bool contains(const std::string& key) const { return entries_.count(key) != 0; }
    const std::string& source() const { return source_; }

    std::string get_string(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    /// "source:line: message" for diagnostics about `key`.
    std::string where(const std::string& key) const;

private:
    std::string source_;
    std::map<std::string, KvEntry> entries_;
};

/// Whole file as a string; throws ConfigError when it cannot be opened.
std::string read_text_file(const std::string& path);

std::int64_t parse_int(std::string_view text);  // throws ConfigError
double parse_double(std::string_view text);     // throws ConfigError
bool parse_bool(std::string_view text);         // throws ConfigError

}  // namespace tmtcg
