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

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridcep/command.hpp"
#include "gridcep/detection.hpp"
#include "gridcep/error.hpp"
#include "gridcep/ontology.hpp"

namespace gridcep::actions {

inline constexpr std::int64_t kDefaultCooldown = 900;

struct ActionRule {
    std::string rule_id;
    std::string trigger;  // pattern id
    ActionCommand action;  // empty target on GTR/DutyCycle: building from bindings
    std::int64_t cooldown = kDefaultCooldown;
    bool enabled = true;
};

enum class Outcome { Applied, SuppressedByCooldown, TargetError };

inline std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::Applied: return "applied";
        case Outcome::SuppressedByCooldown: return "suppressed-by-cooldown";
        case Outcome::TargetError: return "target-error";
    }
    return "?";
}

struct LogEntry {
    std::uint64_t id = 0;
    Timestamp time = 0;
    std::string rule_id;  // "manual" for operator commands
    std::optional<std::uint64_t> detection;
    std::string pattern_id;
    ActionCommand command;
    Outcome outcome = Outcome::Applied;
    std::string error;
};

inline ActionRule rule_from_json(const nlohmann::json& j, const std::string& path = "$") {
    try {
        ActionRule r;
        r.rule_id = j.at("rule_id").get<std::string>();
        r.trigger = j.at("trigger").get<std::string>();
        r.action = command_from_json(j.at("action"), path + ".action");
        if (j.contains("cooldown")) {
            const auto& c = j.at("cooldown");
            r.cooldown = c.is_string() ? parse_duration_seconds(c.get<std::string>()) : c.get<std::int64_t>();
        }
        if (r.cooldown < 0) throw Error(ErrorCode::ConfigError, path + ".cooldown", "must be >= 0");
        r.enabled = j.value("enabled", true);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, path, e.what());
    }
}

inline std::vector<ActionRule> rules_from_json(const nlohmann::json& doc) {
    if (!doc.is_array()) throw Error(ErrorCode::ConfigError, "$", "expected a list of rules");
    std::vector<ActionRule> out;
    for (std::size_t i = 0; i < doc.size(); ++i) out.push_back(rule_from_json(doc[i], "$[" + std::to_string(i) + "]"));
    return out;
}

namespace detail {

// Spaces and audiences print as QNames when the namespaces know them.
inline ActionCommand compact_target(ActionCommand cmd, const Namespaces& ns) {
    if (is_physical(cmd.kind) || cmd.kind == ActionKind::Notify) {
        if (cmd.target.find(':') != std::string::npos && ns.compact(cmd.target).front() != '<') cmd.target = ns.compact(cmd.target);
    }
    return cmd;
}

}  // namespace detail

inline nlohmann::ordered_json rule_to_json(const ActionRule& r, const Namespaces& ns = Namespaces::defaults()) {
    nlohmann::ordered_json j;
    j["rule_id"] = r.rule_id;
    j["trigger"] = r.trigger;
    j["action"] = command_to_json(detail::compact_target(r.action, ns));
    j["cooldown"] = r.cooldown;
    j["enabled"] = r.enabled;
    return j;
}

inline nlohmann::ordered_json log_entry_to_json(const LogEntry& e, const Namespaces& ns) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["time"] = e.time;
    j["rule_id"] = e.rule_id;
    if (e.detection) {
        j["detection"] = {{"id", *e.detection}, {"pattern_id", e.pattern_id}};
    } else {
        j["detection"] = nullptr;
    }
    j["command"] = command_to_json(detail::compact_target(e.command, ns));
    j["outcome"] = to_string(e.outcome);
    if (!e.error.empty()) j["error"] = e.error;
    return j;
}

/// Maps detections to commands. Rules fire in registration order; one
/// detection may fire several rules. `apply` performs a resolved command
/// and throws on a bad target, which is logged, never propagated.
class RuleEngine {
  public:
    using Apply = std::function<void(const ActionCommand&, Timestamp)>;
    using KnownPattern = std::function<bool(const std::string&)>;

    explicit RuleEngine(std::shared_ptr<const Ontology> ontology) : ontology_(std::move(ontology)) {}

    std::string register_rule(ActionRule rule, const KnownPattern& known) {
        if (!known(rule.trigger)) throw Error(ErrorCode::UnknownPattern, rule.trigger);
        if (rule.action.kind == ActionKind::ActivatePattern || rule.action.kind == ActionKind::DeactivatePattern) {
            if (!known(rule.action.target)) throw Error(ErrorCode::UnknownPattern, rule.action.target);
        }
        if (is_physical(rule.action.kind) && !rule.action.target.empty()) {
            rule.action.target = check_space(rule.action.target);
        }
        if (rule.action.kind == ActionKind::Notify && !rule.action.target.empty()) {
            rule.action.target = ontology_->namespaces().expand(rule.action.target);
        }
        for (const auto& r : rules_) {
            if (r.rule_id == rule.rule_id) throw Error(ErrorCode::DuplicateRule, rule.rule_id, "rule id in use");
            if (r.trigger == rule.trigger && r.action == rule.action) {
                throw Error(ErrorCode::DuplicateRule, rule.rule_id, "same trigger and action as " + r.rule_id);
            }
        }
        rules_.push_back(std::move(rule));
        return rules_.back().rule_id;
    }

    const std::vector<ActionRule>& rules() const { return rules_; }
    const std::vector<LogEntry>& log() const { return log_; }

    /// Returns the new log entries produced for `d`, handled at loop time
    /// `now`; cooldowns are measured on `now`.
    std::vector<LogEntry> on_detection(const cep::Detection& d, Timestamp now, const Apply& apply) {
        std::vector<LogEntry> out;
        for (const auto& rule : rules_) {
            if (!rule.enabled || rule.trigger != d.pattern_id) continue;
            LogEntry e;
            e.time = now;
            e.rule_id = rule.rule_id;
            e.detection = d.id;
            e.pattern_id = d.pattern_id;
            e.command = rule.action;
            if (auto last = last_applied_.find(rule.rule_id);
                last != last_applied_.end() && now - last->second < rule.cooldown) {
                e.outcome = Outcome::SuppressedByCooldown;
                try {
                    e.command = resolve(rule.action, d);
                } catch (const Error&) {
                }
            } else {
                try {
                    e.command = resolve(rule.action, d);
                    apply(e.command, e.time);
                    e.outcome = Outcome::Applied;
                    last_applied_[rule.rule_id] = e.time;
                } catch (const Error& err) {
                    e.outcome = Outcome::TargetError;
                    e.error = err.what();
                }
            }
            out.push_back(record(std::move(e)));
        }
        return out;
    }

    /// Operator-issued command; bypasses rules and cooldowns.
    LogEntry manual(ActionCommand cmd, Timestamp time, const Apply& apply) {
        LogEntry e;
        e.time = time;
        e.rule_id = "manual";
        e.command = std::move(cmd);
        try {
            if (is_physical(e.command.kind)) e.command.target = check_space(e.command.target);
            apply(e.command, time);
        } catch (const Error& err) {
            e.outcome = Outcome::TargetError;
            e.error = err.what();
        }
        return record(std::move(e));
    }

    /// Building of the first bound event whose source is located in a
    /// building or in a room of one.
    std::optional<std::string> building_from_bindings(const cep::Detection& d) const {
        for (const auto& b : d.bindings) {
            for (const auto& loc : ontology_->objects(b.source_id, iri::bd("hasLocation"))) {
                if (ontology_->has_type(loc, iri::bd("Building"))) return loc;
                for (const auto& parent : ontology_->objects(loc, iri::bd("partOf"))) {
                    if (ontology_->has_type(parent, iri::bd("Building"))) return parent;
                }
            }
        }
        return std::nullopt;
    }

  private:
    LogEntry record(LogEntry e) {
        e.id = log_.size();
        log_.push_back(e);
        return e;
    }

    std::string check_space(const std::string& target) const {
        auto full = ontology_->namespaces().expand(target.find(':') == std::string::npos ? "bd:" + target : target);
        if (!ontology_->has_type(full, iri::bd("Building")) && !ontology_->has_type(full, iri::bd("Room"))) {
            throw Error(ErrorCode::UnknownTarget, target);
        }
        return full;
    }

    ActionCommand resolve(ActionCommand cmd, const cep::Detection& d) const {
        if (!is_physical(cmd.kind)) return cmd;
        if (cmd.target.empty()) {
            auto b = building_from_bindings(d);
            if (!b) throw Error(ErrorCode::UnknownTarget, d.pattern_id, "no building in detection bindings");
            cmd.target = *b;
        } else {
            cmd.target = check_space(cmd.target);
        }
        return cmd;
    }

    std::shared_ptr<const Ontology> ontology_;
    std::vector<ActionRule> rules_;
    std::map<std::string, Timestamp> last_applied_;
    std::vector<LogEntry> log_;
};

}  // namespace gridcep::actions
