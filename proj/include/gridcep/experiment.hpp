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

#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridcep/actions.hpp"
#include "gridcep/detection.hpp"
#include "gridcep/engine.hpp"
#include "gridcep/event.hpp"
#include "gridcep/sim.hpp"
#include "gridcep/validate.hpp"

namespace gridcep::harness {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, path.string(), "cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ConfigError, path.string(), e.what());
    }
}

struct LoopOptions {
    bool rules_enabled = true;
    bool inject_actions = true;  // publish applied commands on actionstream
};

/// The serialized event loop: simulator ticks, pattern runtime and rule
/// engine. Every event goes through `process`, which ticks the runtime,
/// ingests it and hands its detections to the rules before the next event.
/// Without a simulator (replay), physical commands are only logged.
class Loop {
  public:
    std::function<void(const Event&)> on_event;
    std::function<void(const cep::Detection&)> on_detection;
    std::function<void(const actions::LogEntry&)> on_action;
    std::function<void(const cep::StatusChange&)> on_status;

    Loop(sim::Scenario scenario, bool with_simulator, LoopOptions options = {})
        : scenario_(std::move(scenario)),
          options_(options),
          engine_(scenario_.ontology, scenario_.schemas),
          rules_(scenario_.ontology) {
        if (with_simulator) sim_.emplace(scenario_);
    }

    void add_pattern(lang::CheckedPattern p) { engine_.register_pattern(std::move(p)); }

    void add_rule(actions::ActionRule r) {
        rules_.register_rule(std::move(r), [this](const std::string& id) { return engine_.has_pattern(id); });
    }

    const sim::Scenario& scenario() const { return scenario_; }
    const Namespaces& namespaces() const { return scenario_.namespaces(); }
    cep::Engine& engine() { return engine_; }
    const cep::Engine& engine() const { return engine_; }
    const actions::RuleEngine& rules() const { return rules_; }
    sim::Simulator* simulator() { return sim_ ? &*sim_ : nullptr; }
    const sim::Simulator* simulator() const { return sim_ ? &*sim_ : nullptr; }

    /// Current loop time: the simulator clock, or the last processed event.
    Timestamp now() const { return sim_ ? sim_->clock() : last_time_.value_or(scenario_.config.start); }

    /// One simulator tick.
    void advance() {
        auto events = sim_->step(sim_->clock() + scenario_.config.tick);
        for (const auto& e : events) process(e);
    }

    void run_until(Timestamp end) {
        while (sim_->clock() < end) advance();
    }

    void process(const Event& event) {
        std::deque<Event> pending{event};
        while (!pending.empty()) {
            Event e = std::move(pending.front());
            pending.pop_front();
            last_time_ = e.timestamp;
            if (on_event) on_event(e);
            auto ticked = engine_.tick(e.timestamp);
            for (const auto& c : ticked.changes) {
                if (on_status) on_status(c);
            }
            handle(ticked.detections, e.timestamp, pending);
            handle(engine_.ingest(e), e.timestamp, pending);
        }
    }

    /// Operator command at the current loop time; pattern commands act on
    /// the runtime, the rest go to the simulator.
    actions::LogEntry manual(const ActionCommand& cmd) {
        std::deque<Event> pending;
        auto entry = rules_.manual(cmd, now(), [this](const ActionCommand& c, Timestamp t) { apply(c, t); });
        if (on_action) on_action(entry);
        if (entry.outcome == actions::Outcome::Applied && options_.inject_actions) pending.push_back(action_event(entry));
        for (const auto& e : pending) process(e);
        return entry;
    }

    cep::PatternStatus set_active(const std::string& id, bool active) {
        auto before = engine_.status(id);
        auto after = active ? engine_.activate(id) : engine_.deactivate(id);
        if (before != after && on_status) on_status({id, after, now()});
        return after;
    }

  private:
    void apply(const ActionCommand& c, Timestamp t) {
        switch (c.kind) {
            case ActionKind::ActivatePattern: set_active(c.target, true); break;
            case ActionKind::DeactivatePattern: set_active(c.target, false); break;
            default:
                if (sim_) sim_->apply_action(c, t);
                break;
        }
    }

    void handle(const std::vector<cep::Detection>& ds, Timestamp now, std::deque<Event>& pending) {
        for (const auto& d : ds) {
            if (on_detection) on_detection(d);
            if (!options_.rules_enabled) continue;
            auto entries = rules_.on_detection(d, now, [this](const ActionCommand& c, Timestamp t) { apply(c, t); });
            for (const auto& entry : entries) {
                if (on_action) on_action(entry);
                if (entry.outcome == actions::Outcome::Applied && options_.inject_actions) {
                    pending.push_back(action_event(entry));
                }
            }
        }
    }

    Event action_event(const actions::LogEntry& entry) {
        const auto& cmd = entry.command;
        Event e;
        e.stream_id = sim::kActionStream;
        e.seq = ++action_seq_;
        e.timestamp = entry.time;
        e.source_id = sim::action_engine_id();
        std::string target = cmd.target;
        if (is_physical(cmd.kind)) {
            auto building = sim_ ? sim_->building_of(cmd.target) : namespaces().compact(cmd.target);
            if (!sim_ && building.starts_with("bd:")) building = building.substr(3);
            e.source_id = sim::controller_id(building, cmd.kind);
            target = namespaces().compact(cmd.target);
        }
        e.attributes["action"] = std::string(to_string(cmd.kind));
        e.attributes["target"] = target;
        e.attributes["amount"] = cmd.amount;
        e.attributes["duration"] = static_cast<double>(cmd.duration);
        return e;
    }

    sim::Scenario scenario_;
    LoopOptions options_;
    cep::Engine engine_;
    actions::RuleEngine rules_;
    std::optional<sim::Simulator> sim_;
    std::optional<Timestamp> last_time_;
    std::uint64_t action_seq_ = 0;
};

struct ExperimentSpec {
    std::filesystem::path scenario;
    std::vector<std::filesystem::path> patterns;
    std::optional<std::filesystem::path> rules;
    std::int64_t duration = 86400;
    std::filesystem::path out = "out";
    std::int64_t gap = 120;
    bool ab = false;
};

/// Parsed inputs of an experiment.
struct Inputs {
    sim::Scenario scenario;
    std::vector<lang::CheckedPattern> patterns;
    std::vector<actions::ActionRule> rules;
};

inline Inputs load_inputs(const std::filesystem::path& scenario, const std::vector<std::filesystem::path>& patterns,
                          const std::optional<std::filesystem::path>& rules) {
    Inputs in{sim::load_scenario(read_json(scenario)), {}, {}};
    for (const auto& p : patterns) {
        for (auto& c : lang::load_pattern_file(read_file(p), *in.scenario.ontology, *in.scenario.schemas)) {
            in.patterns.push_back(std::move(c));
        }
    }
    if (rules) in.rules = actions::rules_from_json(read_json(*rules));
    return in;
}

struct BuildingEnergy {
    double peak_kw = 0;
    Timestamp peak_time = 0;
    double energy_kwh = 0;
    double hvac_at_peak = 0;  // fan-coil term of the peak reading
};

struct RunReport {
    std::int64_t duration = 0;
    std::uint64_t seed = 0;
    std::map<std::string, std::size_t> stream_counts;
    std::map<std::string, std::size_t> detection_counts;  // by pattern id
    std::vector<cep::DetectionInterval> intervals;
    std::map<std::string, BuildingEnergy> buildings;       // compact meter IRI
    std::map<std::string, std::size_t> action_outcomes;
    std::optional<std::map<std::string, BuildingEnergy>> baseline;  // A/B mode

    nlohmann::ordered_json to_json(const std::vector<lang::CheckedPattern>& patterns) const {
        auto energy = [](const std::map<std::string, BuildingEnergy>& m) {
            nlohmann::ordered_json j = nlohmann::ordered_json::object();
            for (const auto& [id, b] : m) {
                j[id] = {{"peak_kw", b.peak_kw}, {"peak_time", b.peak_time}, {"energy_kwh", b.energy_kwh},
                         {"hvac_at_peak_kw", b.hvac_at_peak}};
            }
            return j;
        };
        nlohmann::ordered_json j;
        j["duration"] = duration;
        j["seed"] = seed;
        j["streams"] = stream_counts;
        auto& ps = j["patterns"] = nlohmann::ordered_json::object();
        for (const auto& p : patterns) {
            nlohmann::ordered_json pj;
            pj["end_use"] = lang::to_string(p.tags.end_use);
            pj["lifecycle"] = lang::to_string(p.tags.lifecycle.kind);
            auto it = detection_counts.find(p.id);
            pj["detections"] = it == detection_counts.end() ? 0 : it->second;
            auto& iv = pj["intervals"] = nlohmann::ordered_json::array();
            for (const auto& i : intervals) {
                if (i.pattern_id == p.id) iv.push_back({i.start, i.end, i.count});
            }
            ps[p.id] = pj;
        }
        j["buildings"] = energy(buildings);
        j["actions"] = action_outcomes;
        if (baseline) {
            auto& ab = j["ab"];
            ab["baseline"] = energy(*baseline);
            auto& red = ab["peak_reduction_pct"] = nlohmann::ordered_json::object();
            for (const auto& [id, b] : *baseline) {
                auto it = buildings.find(id);
                if (it == buildings.end() || b.peak_kw <= 0) continue;
                red[id] = (b.peak_kw - it->second.peak_kw) / b.peak_kw * 100.0;
            }
        }
        return j;
    }
};

/// Writes one run's artifacts while the loop executes.
class RunRecorder {
  public:
    RunRecorder(Loop& loop, const std::filesystem::path& dir) : loop_(loop), dir_(dir) {
        std::filesystem::create_directories(dir);
        events_.open(dir / "events.jsonl", std::ios::binary);
        detections_.open(dir / "detections.jsonl", std::ios::binary);
        actions_.open(dir / "actions.jsonl", std::ios::binary);
        if (!events_ || !detections_ || !actions_) throw Error(ErrorCode::IoError, dir.string(), "cannot write artifacts");
        const auto& ns = loop.namespaces();
        auto meter_cadence = loop.scenario().config.cadence.meter;
        loop.on_event = [this, &ns, meter_cadence](const Event& e) {
            events_ << event_to_json(e, ns).dump() << '\n';
            sim::summarize(summary_, e, meter_cadence);
        };
        loop.on_detection = [this, &ns](const cep::Detection& d) {
            detections_ << cep::detection_to_json(d, ns).dump() << '\n';
            ++report_.detection_counts[d.pattern_id];
        };
        loop.on_action = [this, &ns](const actions::LogEntry& a) {
            actions_ << actions::log_entry_to_json(a, ns).dump() << '\n';
            ++report_.action_outcomes[std::string(actions::to_string(a.outcome))];
        };
    }

    ~RunRecorder() {
        loop_.on_event = nullptr;
        loop_.on_detection = nullptr;
        loop_.on_action = nullptr;
    }

    /// Flushes the logs and writes intervals.csv and report.json.
    RunReport finish(std::int64_t duration, std::int64_t gap, const std::vector<lang::CheckedPattern>& patterns,
                     const std::optional<std::map<std::string, BuildingEnergy>>& baseline = std::nullopt) {
        events_.flush();
        detections_.flush();
        actions_.flush();
        const auto& ns = loop_.namespaces();
        report_.duration = duration;
        report_.seed = loop_.scenario().config.seed;
        report_.stream_counts = summary_.counts;
        report_.intervals = cep::coalesce(loop_.engine().detections(), gap);
        report_.buildings = building_energy(loop_, summary_, ns);
        report_.baseline = baseline;
        std::ofstream(dir_ / "intervals.csv", std::ios::binary) << cep::intervals_to_csv(report_.intervals);
        std::ofstream(dir_ / "report.json", std::ios::binary) << report_.to_json(patterns).dump(2) << '\n';
        return report_;
    }

    static std::map<std::string, BuildingEnergy> building_energy(const Loop& loop, const sim::TraceSummary& summary,
                                                                 const Namespaces& ns) {
        std::map<std::string, BuildingEnergy> out;
        for (const auto& b : loop.scenario().config.buildings) {
            auto meter = sim::meter_id(b.id);
            auto& be = out[ns.compact(meter)];
            if (auto it = summary.energy_kwh.find(meter); it != summary.energy_kwh.end()) be.energy_kwh = it->second;
            if (const auto* s = loop.simulator()) {
                bool first = true;
                for (const auto& m : s->meter_trace()) {
                    if (m.meter != meter || (!first && m.reading <= be.peak_kw)) continue;
                    first = false;
                    be.peak_kw = m.reading;
                    be.peak_time = m.time;
                    be.hvac_at_peak = m.hvac;
                }
            }
        }
        return out;
    }

  private:
    Loop& loop_;
    std::filesystem::path dir_;
    std::ofstream events_, detections_, actions_;
    sim::TraceSummary summary_;
    RunReport report_;
};

inline Loop make_loop(const Inputs& in, bool with_simulator, LoopOptions options) {
    Loop loop(in.scenario, with_simulator, options);
    for (const auto& p : in.patterns) loop.add_pattern(p);
    for (const auto& r : in.rules) loop.add_rule(r);
    return loop;
}

inline RunReport run_once(const Inputs& in, std::int64_t duration, std::int64_t gap, const std::filesystem::path& dir,
                          LoopOptions options,
                          const std::optional<std::map<std::string, BuildingEnergy>>& baseline = std::nullopt) {
    auto loop = make_loop(in, true, options);
    RunRecorder rec(loop, dir);
    loop.run_until(in.scenario.config.start + duration);
    return rec.finish(duration, gap, in.patterns, baseline);
}

/// Headless experiment. In A/B mode the same seed runs first with rules
/// disabled (artifacts under `out/baseline`), then with rules enabled.
inline RunReport run_experiment(const ExperimentSpec& spec) {
    if (spec.duration <= 0) throw Error(ErrorCode::ConfigError, "duration", "must be positive");
    auto in = load_inputs(spec.scenario, spec.patterns, spec.rules);
    if (!spec.ab) return run_once(in, spec.duration, spec.gap, spec.out, {});
    auto base = run_once(in, spec.duration, spec.gap, spec.out / "baseline", LoopOptions{false, false});
    return run_once(in, spec.duration, spec.gap, spec.out, {}, base.buildings);
}

/// Reads an events.jsonl trace.
inline std::vector<Event> read_events(const std::filesystem::path& path, const Namespaces& ns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, path.string(), "cannot open");
    std::vector<Event> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(event_from_json(nlohmann::json::parse(line), ns));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ConfigError, path.string() + ":" + std::to_string(n), e.what());
        }
    }
    return out;
}

/// Feeds a recorded trace through a fresh runtime. Rules run so pattern
/// activations recur, but nothing is injected: recorded action events are
/// already in the trace. Returns the detection log as JSON lines.
inline std::string replay(const Inputs& in, const std::vector<Event>& events) {
    auto loop = make_loop(in, false, LoopOptions{!in.rules.empty(), false});
    std::ostringstream out;
    const auto& ns = loop.namespaces();
    loop.on_detection = [&](const cep::Detection& d) { out << cep::detection_to_json(d, ns).dump() << '\n'; };
    for (const auto& e : events) loop.process(e);
    return out.str();
}

}  // namespace gridcep::harness
