#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tmtcg/bytes.hpp"
#include "tmtcg/harness/session.hpp"
#include "tmtcg/mqtt/packet.hpp"
#include "tmtcg/rng.hpp"

namespace tmtcg::catalog {

enum class ActionKind { Regular, Attack };

std::string_view to_string(ActionKind kind);
std::optional<ActionKind> parse_action_kind(std::string_view name);

/// Parameter name -> value, rendered as text (payloads in hex).
using Params = std::map<std::string, std::string>;

struct BoundAction {
    ActionKind kind = ActionKind::Regular;
    std::string name;
    Params params;
    std::vector<Bytes> frames;  // exactly one for regular actions

    bool operator==(const BoundAction&) const = default;
};

struct ParamSpec {
    std::string name;
    std::string domain;  // human-readable value domain
};

struct Command {
    std::string name;
    std::vector<ParamSpec> params;
    /// Declared response rule; the packet id is filled in per binding.
    harness::Expectation expectation;
    /// Phase in which the command is legal.
    harness::Phase requires_phase = harness::Phase::MqttConnected;
    /// Ends the connection; only ever placed last in a sequence.
    bool terminal = false;
    std::function<Params(Rng&)> draw;
    std::function<mqtt::Packet(const Params&)> build;
};

inline const std::vector<std::string> kTopicPool{"sensors/temp", "sensors/hum", "actuators/valve"};
inline const std::vector<std::string> kFilterPool{"sensors/temp", "sensors/hum", "actuators/valve", "sensors/#",
                                                  "sensors/+"};
inline constexpr std::size_t kMaxPayload = 64;

/// connect, disconnect, publish_qos0, publish_qos1, subscribe, unsubscribe, ping.
const std::vector<Command>& default_commands();
const Command* find_command(std::string_view name);

/// Draws parameters and encodes the single frame.
BoundAction bind(const Command& command, Rng& rng);
/// Frame for explicit parameters; throws std::invalid_argument on bad values.
BoundAction bind_with(const Command& command, const Params& params);

/// "tcg-" followed by 8 lowercase hex digits.
std::string draw_client_id(Rng& rng);

/// A known way to break the protocol from a given phase. Some frames are
/// hand-built because the codec refuses to encode them.
struct ProtocolViolation {
    std::string name;
    harness::Phase phase = harness::Phase::Fresh;
    std::string description;
    std::function<BoundAction(Rng&)> bind;
};

const std::vector<ProtocolViolation>& protocol_violations();
std::vector<const ProtocolViolation*> violations_for(harness::Phase phase);

}  // namespace tmtcg::catalog
