/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "gridcep/error.hpp"
#include "gridcep/value.hpp"

namespace gridcep {

enum class ActionKind { GTR, DutyCycle, Notify, ActivatePattern, DeactivatePattern };

inline std::string_view to_string(ActionKind k) {
    switch (k) {
        case ActionKind::GTR: return "GTR";
        case ActionKind::DutyCycle: return "DutyCycle";
        case ActionKind::Notify: return "Notify";
        case ActionKind::ActivatePattern: return "ActivatePattern";
        case ActionKind::DeactivatePattern: return "DeactivatePattern";
    }
    return "?";
}

inline ActionKind parse_action_kind(const std::string& s) {
    for (auto k : {ActionKind::GTR, ActionKind::DutyCycle, ActionKind::Notify, ActionKind::ActivatePattern,
                   ActionKind::DeactivatePattern}) {
        if (to_string(k) == s) return k;
    }
    throw Error(ErrorCode::ConfigError, s, "unknown action kind");
}

/// A resolved response. `target` is a building or room IRI (GTR, DutyCycle),
/// an audience IRI (Notify) or a pattern id (Activate/DeactivatePattern).
struct ActionCommand {
    ActionKind kind = ActionKind::Notify;
    std::string target;
    double amount = 0;         // GTR offset in °F or duty-cycle cap
    std::int64_t duration = 0;  // seconds
    std::string message;

    friend bool operator==(const ActionCommand&, const ActionCommand&) = default;
};

inline bool is_physical(ActionKind k) { return k == ActionKind::GTR || k == ActionKind::DutyCycle; }

/// `target` is written as given; callers compact IRIs before serializing.
inline nlohmann::ordered_json command_to_json(const ActionCommand& c) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(c.kind);
    j["target"] = c.target;
    switch (c.kind) {
        case ActionKind::GTR: j["delta"] = c.amount; j["duration"] = c.duration; break;
        case ActionKind::DutyCycle: j["cap"] = c.amount; j["duration"] = c.duration; break;
        case ActionKind::Notify: j["message"] = c.message; break;
        default: break;
    }
    return j;
}

/// Accepts `{"kind":"GTR","target":"bd:MHP","delta":4,"duration":3600}`;
/// durations may be written as "1h". An empty target means "from bindings".
inline ActionCommand command_from_json(const nlohmann::json& j, const std::string& path = "$") {
    try {
        ActionCommand c;
        c.kind = parse_action_kind(j.at("kind").get<std::string>());
        c.target = j.value("target", std::string{});
        if (j.contains("pattern")) c.target = j.at("pattern").get<std::string>();
        if (j.contains("audience")) c.target = j.at("audience").get<std::string>();
        if (j.contains("delta")) c.amount = j.at("delta").get<double>();
        if (j.contains("cap")) c.amount = j.at("cap").get<double>();
        if (j.contains("duration")) {
            const auto& d = j.at("duration");
            c.duration = d.is_string() ? parse_duration_seconds(d.get<std::string>()) : d.get<std::int64_t>();
        }
        c.message = j.value("message", j.value("template", std::string{}));
        if (c.kind == ActionKind::DutyCycle && c.amount < 0) {
            throw Error(ErrorCode::ConfigError, path + ".cap", "cap must be >= 0");
        }
        if (is_physical(c.kind) && c.duration <= 0) {
            throw Error(ErrorCode::ConfigError, path + ".duration", "duration must be > 0");
        }
        if ((c.kind == ActionKind::ActivatePattern || c.kind == ActionKind::DeactivatePattern) && c.target.empty()) {
            throw Error(ErrorCode::ConfigError, path + ".pattern", "pattern id required");
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, path, e.what());
    }
}

}  // namespace gridcep
