#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace tmtcg::mqtt {

/// Well-formed UTF-8 without U+0000 and within the 65535-byte string limit.
bool valid_mqtt_string(std::string_view s);

/// Publish topic: non-empty, no wildcard characters.
bool valid_topic_name(std::string_view topic);

/// Subscription filter: non-empty; '+' occupies a whole level; '#' occupies
/// the whole last level.
bool valid_topic_filter(std::string_view filter);

/// Level-by-level match of `topic` against `filter`. "a/#" also matches
/// "a"; wildcards in the first level do not match topics starting with '$'.
bool topic_matches(std::string_view filter, std::string_view topic);

}  // namespace tmtcg::mqtt
