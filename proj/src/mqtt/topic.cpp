#include "tmtcg/mqtt/topic.hpp"

#include <cstdint>
#include <vector>

namespace tmtcg::mqtt {

namespace {

std::vector<std::string_view> split_levels(std::string_view s) {
    std::vector<std::string_view> levels;
    std::size_t start = 0;
    while (true) {
        const auto slash = s.find('/', start);
        if (slash == std::string_view::npos) {
            levels.push_back(s.substr(start));
            return levels;
        }
        levels.push_back(s.substr(start, slash - start));
        start = slash + 1;
    }
}

}  // namespace

bool valid_mqtt_string(std::string_view s) {
    if (s.size() > 0xFFFF) return false;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<std::uint8_t>(s[i]);
        if (c == 0x00) return false;
        std::size_t extra = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            extra = 1;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= s.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            const auto cc = static_cast<std::uint8_t>(s[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // Overlong forms, surrogates and out-of-range code points.
        if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000)) return false;
        if (cp >= 0xD800 && cp <= 0xDFFF) return false;
        if (cp > 0x10FFFF) return false;
        i += extra + 1;
    }
    return true;
}

bool valid_topic_name(std::string_view topic) {
    if (topic.empty() || !valid_mqtt_string(topic)) return false;
    return topic.find_first_of("+#") == std::string_view::npos;
}

bool valid_topic_filter(std::string_view filter) {
    if (filter.empty() || !valid_mqtt_string(filter)) return false;
    const auto levels = split_levels(filter);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto level = levels[i];
        if (level.find('#') != std::string_view::npos && (level != "#" || i + 1 != levels.size())) return false;
        if (level.find('+') != std::string_view::npos && level != "+") return false;
    }
    return true;
}

bool topic_matches(std::string_view filter, std::string_view topic) {
    if (!topic.empty() && topic.front() == '$' && !filter.empty() && (filter.front() == '+' || filter.front() == '#')) {
        return false;
    }
    const auto f = split_levels(filter);
    const auto t = split_levels(topic);
    std::size_t i = 0;
    for (; i < f.size(); ++i) {
        if (f[i] == "#") return true;  // also matches the parent level
        if (i >= t.size()) return false;
        if (f[i] != "+" && f[i] != t[i]) return false;
    }
    return i == t.size();
}

}  // namespace tmtcg::mqtt
