#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "tmtcg/generator.hpp"

namespace tmtcg {

/// Malformed, incomplete, or tampered suite or report file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace gen {

/// Pretty-printed JSON with sorted keys, ending in a newline. The top-level
/// "digest" is SHA-256 over the compact form of everything else.
std::string write_suite(const TestSuite& suite);
/// Throws FormatError, including on a digest mismatch.
TestSuite read_suite(std::string_view text);

void save_suite(const TestSuite& suite, const std::string& path);
TestSuite load_suite(const std::string& path);

}  // namespace gen

/// Writes `text` to `path`, creating parent directories. Throws std::runtime_error.
void write_text_file(const std::string& path, std::string_view text);

}  // namespace tmtcg
