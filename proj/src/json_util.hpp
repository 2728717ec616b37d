#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

#include "tmtcg/harness/session.hpp"
#include "tmtcg/suite_io.hpp"

namespace tmtcg::jsonio {

using Json = nlohmann::json;

/// Pretty form with the self-digest added.
std::string seal(Json doc);
/// Parses and checks the self-digest; throws FormatError.
Json unseal(std::string_view text, std::string_view what);

Json feedback_to_json(const harness::Feedback& fb);
harness::Feedback feedback_from_json(const Json& j);

/// Typed member access that throws FormatError naming the path.
const Json& member(const Json& j, const char* key, std::string_view path);
std::string get_string(const Json& j, const char* key, std::string_view path);
std::uint64_t get_uint(const Json& j, const char* key, std::string_view path);
std::int64_t get_int(const Json& j, const char* key, std::string_view path);
double get_double(const Json& j, const char* key, std::string_view path);
bool get_bool(const Json& j, const char* key, std::string_view path);
harness::Verdict get_verdict(const Json& j, const char* key, std::string_view path);

}  // namespace tmtcg::jsonio
