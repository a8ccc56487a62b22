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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridcep/command.hpp"
#include "gridcep/error.hpp"
#include "gridcep/event.hpp"
#include "gridcep/ontology.hpp"
#include "gridcep/value.hpp"

namespace gridcep::sim {

inline constexpr const char* kMeterStream = "meterstream";
inline constexpr const char* kFancoilStream = "fancoilstream";
inline constexpr const char* kScheduleStream = "schstream";
inline constexpr const char* kTempStream = "rtempstream";
inline constexpr const char* kOccupancyStream = "occstream";
inline constexpr const char* kActionStream = "actionstream";

/// Seconds before class start at which the schedule event is published.
inline constexpr Timestamp kScheduleLead = 3600;

struct BuildingConfig {
    std::string id;  // local name, e.g. "MHP"
    double base_kw = 0;
    std::string department;  // org local name, optional
};

struct SubmeterConfig {
    double base_kw = 0;
    double kw_per_occupant = 0;
};

struct RoomConfig {
    std::string id;
    std::string building;
    std::string type;  // QName, e.g. "bd:Classroom"
    std::string department;
    double setpoint = 72;
    int fancoils = 0;
    std::optional<double> initial_temp;
    std::optional<SubmeterConfig> submeter;
};

/// A class meeting. `daily` entries repeat at the same second of day.
struct ClassEntry {
    std::string room;
    Timestamp start = 0;
    Timestamp end = 0;
    int occupancy = 0;
    bool daily = false;
};

struct LoadModel {
    double kw_per_occupant = 0.1;
    double kw_per_fancoil = 1.5;
    double noise_sd = 0;
};

/// First-order room model in °F per hour.
struct ThermalModel {
    double outdoor_mean = 80;
    double outdoor_amplitude = 8;
    double peak_hour = 15;
    double k_outdoor = 0.3;     // 1/h toward outdoor
    double k_cooling = 2.0;     // 1/h toward setpoint with all coils ON
    double occupant_heat = 0.05;  // °F/h per occupant
    double initial_temp = 74;
};

struct Cadence {
    std::int64_t meter = 60;
    std::int64_t temp = 60;
    std::int64_t fancoil = 60;
    std::int64_t occupancy = 60;
};

struct ScenarioConfig {
    std::vector<BuildingConfig> buildings;
    std::vector<RoomConfig> rooms;
    std::vector<std::string> departments;
    std::vector<ClassEntry> schedule;
    LoadModel load;
    ThermalModel thermal;
    Cadence cadence;
    std::uint64_t seed = 1;
    Timestamp start = 0;
    std::int64_t tick = 60;
    double walk_in_probability = 0;
    int walk_in_max = 3;
};

namespace detail {

template <typename T>
T field(const nlohmann::json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) throw Error(ErrorCode::ConfigError, path + "." + key, "missing");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::ConfigError, path + "." + key, "wrong type");
    }
}

template <typename T>
T field_or(const nlohmann::json& obj, const std::string& key, const std::string& path, T fallback) {
    return obj.contains(key) ? field<T>(obj, key, path) : fallback;
}

// "HH:MM" is a daily time of day; a number is an absolute epoch.
inline Timestamp time_field(const nlohmann::json& obj, const std::string& key, const std::string& path, bool& daily) {
    if (!obj.contains(key)) throw Error(ErrorCode::ConfigError, path + "." + key, "missing");
    const auto& v = obj.at(key);
    if (v.is_number_integer()) return v.get<Timestamp>();
    if (v.is_string()) {
        auto s = v.get<std::string>();
        int h = 0, m = 0;
        char colon = 0;
        std::istringstream in(s);
        if (in >> h >> colon >> m && colon == ':' && h >= 0 && h <= 24 && m >= 0 && m < 60) {
            daily = true;
            return h * 3600 + m * 60;
        }
    }
    throw Error(ErrorCode::ConfigError, path + "." + key, "expected epoch seconds or \"HH:MM\"");
}

inline std::int64_t cadence_field(const nlohmann::json& obj, const std::string& key, const std::string& path,
                                  std::int64_t fallback, std::int64_t tick) {
    auto v = field_or<std::int64_t>(obj, key, path, fallback);
    if (v <= 0 || v % tick != 0) throw Error(ErrorCode::ConfigError, path + "." + key, "must be a positive multiple of tick");
    return v;
}

}  // namespace detail

/// Reads a scenario document; errors name the JSON path.
inline ScenarioConfig config_from_json(const nlohmann::json& doc) {
    using detail::field;
    using detail::field_or;
    if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "$", "expected an object");
    ScenarioConfig c;
    c.seed = field_or<std::uint64_t>(doc, "seed", "$", 1);
    c.start = field_or<Timestamp>(doc, "start", "$", 0);
    c.tick = field_or<std::int64_t>(doc, "tick", "$", 60);
    if (c.tick <= 0) throw Error(ErrorCode::ConfigError, "$.tick", "must be positive");
    c.walk_in_probability = field_or<double>(doc, "walk_in_probability", "$", 0.0);
    c.walk_in_max = field_or<int>(doc, "walk_in_max", "$", 3);

    if (!doc.contains("buildings") || !doc.at("buildings").is_array() || doc.at("buildings").empty()) {
        throw Error(ErrorCode::ConfigError, "$.buildings", "at least one building required");
    }
    std::set<std::string> building_ids, room_ids, dept_ids;
    if (doc.contains("departments")) {
        const auto& ds = doc.at("departments");
        for (std::size_t i = 0; i < ds.size(); ++i) {
            auto path = "$.departments[" + std::to_string(i) + "]";
            auto id = ds[i].is_string() ? ds[i].get<std::string>() : field<std::string>(ds[i], "id", path);
            if (!dept_ids.insert(id).second) throw Error(ErrorCode::ConfigError, path, "duplicate department " + id);
            c.departments.push_back(id);
        }
    }
    auto check_dept = [&](const std::string& d, const std::string& path) {
        if (!d.empty() && !dept_ids.count(d)) throw Error(ErrorCode::ConfigError, path, "unknown department " + d);
    };
    const auto& bs = doc.at("buildings");
    for (std::size_t i = 0; i < bs.size(); ++i) {
        auto path = "$.buildings[" + std::to_string(i) + "]";
        BuildingConfig b;
        b.id = field<std::string>(bs[i], "id", path);
        b.base_kw = field_or<double>(bs[i], "base_kw", path, 0.0);
        b.department = field_or<std::string>(bs[i], "department", path, "");
        check_dept(b.department, path + ".department");
        if (!building_ids.insert(b.id).second) throw Error(ErrorCode::ConfigError, path + ".id", "duplicate building " + b.id);
        c.buildings.push_back(b);
    }
    if (doc.contains("rooms")) {
        const auto& rs = doc.at("rooms");
        for (std::size_t i = 0; i < rs.size(); ++i) {
            auto path = "$.rooms[" + std::to_string(i) + "]";
            RoomConfig r;
            r.id = field<std::string>(rs[i], "id", path);
            r.building = field<std::string>(rs[i], "building", path);
            r.type = field_or<std::string>(rs[i], "type", path, "bd:Room");
            r.department = field_or<std::string>(rs[i], "department", path, "");
            r.setpoint = field_or<double>(rs[i], "setpoint", path, 72.0);
            r.fancoils = field_or<int>(rs[i], "fancoils", path, 0);
            if (r.fancoils < 0) throw Error(ErrorCode::ConfigError, path + ".fancoils", "must be >= 0");
            if (rs[i].contains("initial_temp")) r.initial_temp = field<double>(rs[i], "initial_temp", path);
            if (rs[i].contains("submeter")) {
                const auto& sm = rs[i].at("submeter");
                r.submeter = SubmeterConfig{field_or<double>(sm, "base_kw", path + ".submeter", 0.0),
                                            field_or<double>(sm, "kw_per_occupant", path + ".submeter", 0.0)};
            }
            check_dept(r.department, path + ".department");
            if (!building_ids.count(r.building)) {
                throw Error(ErrorCode::ConfigError, path + ".building", "unknown building " + r.building);
            }
            if (building_ids.count(r.id) || !room_ids.insert(r.id).second) {
                throw Error(ErrorCode::ConfigError, path + ".id", "duplicate space " + r.id);
            }
            c.rooms.push_back(r);
        }
    }
    if (doc.contains("schedule")) {
        const auto& ss = doc.at("schedule");
        for (std::size_t i = 0; i < ss.size(); ++i) {
            auto path = "$.schedule[" + std::to_string(i) + "]";
            ClassEntry e;
            e.room = field<std::string>(ss[i], "room", path);
            bool daily_start = false, daily_end = false;
            e.start = detail::time_field(ss[i], "start", path, daily_start);
            e.end = detail::time_field(ss[i], "end", path, daily_end);
            if (daily_start != daily_end) throw Error(ErrorCode::ConfigError, path, "mixed daily and absolute times");
            e.daily = daily_start;
            e.occupancy = field_or<int>(ss[i], "occupancy", path, 0);
            if (!room_ids.count(e.room)) throw Error(ErrorCode::ConfigError, path + ".room", "unknown room " + e.room);
            if (e.end <= e.start) throw Error(ErrorCode::ConfigError, path + ".end", "must be after start");
            c.schedule.push_back(e);
        }
    }
    if (doc.contains("load_model")) {
        const auto& lm = doc.at("load_model");
        c.load.kw_per_occupant = field_or<double>(lm, "kw_per_occupant", "$.load_model", c.load.kw_per_occupant);
        c.load.kw_per_fancoil = field_or<double>(lm, "kw_per_fancoil", "$.load_model", c.load.kw_per_fancoil);
        c.load.noise_sd = field_or<double>(lm, "noise_sd", "$.load_model", c.load.noise_sd);
        if (c.load.noise_sd < 0) throw Error(ErrorCode::ConfigError, "$.load_model.noise_sd", "must be >= 0");
    }
    if (doc.contains("thermal")) {
        const auto& th = doc.at("thermal");
        auto& t = c.thermal;
        t.outdoor_mean = field_or<double>(th, "outdoor_mean", "$.thermal", t.outdoor_mean);
        t.outdoor_amplitude = field_or<double>(th, "outdoor_amplitude", "$.thermal", t.outdoor_amplitude);
        t.peak_hour = field_or<double>(th, "peak_hour", "$.thermal", t.peak_hour);
        t.k_outdoor = field_or<double>(th, "k_outdoor", "$.thermal", t.k_outdoor);
        t.k_cooling = field_or<double>(th, "k_cooling", "$.thermal", t.k_cooling);
        t.occupant_heat = field_or<double>(th, "occupant_heat", "$.thermal", t.occupant_heat);
        t.initial_temp = field_or<double>(th, "initial_temp", "$.thermal", t.initial_temp);
    }
    nlohmann::json cad = doc.contains("cadence") ? doc.at("cadence") : nlohmann::json::object();
    c.cadence.meter = detail::cadence_field(cad, "meter", "$.cadence", c.tick, c.tick);
    c.cadence.temp = detail::cadence_field(cad, "temp", "$.cadence", c.tick, c.tick);
    c.cadence.fancoil = detail::cadence_field(cad, "fancoil", "$.cadence", c.tick, c.tick);
    c.cadence.occupancy = detail::cadence_field(cad, "occupancy", "$.cadence", c.tick, c.tick);
    return c;
}

/// Class hierarchy shared by every generated campus.
inline std::vector<Triple> space_hierarchy() {
    std::vector<Triple> t;
    auto sub = [&](const char* a, const char* b) { t.push_back(iri_triple(iri::bd(a), iri::sub_class_of(), iri::bd(b))); };
    sub("Room", "Space");
    sub("Building", "Space");
    sub("Office", "Room");
    sub("MeetingRoom", "Office");
    sub("Classroom", "Room");
    sub("LectureHall", "Classroom");
    sub("Lab", "Room");
    sub("ComputerLab", "Lab");
    sub("ResidenceHall", "Building");
    return t;
}

inline std::string meter_id(const std::string& space) { return iri::ee(space + "METER"); }
inline std::string temp_id(const std::string& room) { return iri::ee(room + "TEMP"); }
inline std::string occupancy_id(const std::string& room) { return iri::ee(room + "OCC"); }
inline std::string calendar_id(const std::string& room) { return iri::ee(room + "CAL"); }
inline std::string fancoil_id(const std::string& room, int n) { return iri::ee(room + "FC" + std::to_string(n)); }
inline std::string controller_id(const std::string& building, ActionKind k) {
    return iri::ee(building + "_" + std::string(to_string(k)));
}
inline std::string action_engine_id() { return iri::ee("ActionEngine"); }

/// Generated world: configuration, ontology and the six stream schemas.
struct Scenario {
    ScenarioConfig config;
    std::shared_ptr<const Ontology> ontology;
    std::shared_ptr<const SchemaRegistry> schemas;

    const Namespaces& namespaces() const { return ontology->namespaces(); }
};

namespace detail {

inline StreamSchema reading_schema(const std::string& id, const std::string& unit) {
    StreamSchema s;
    s.stream_id = id;
    s.attributes["reading"] = AttributeSpec{AttributeKind::Number, unit, false};
    s.value_attribute = "reading";
    s.lift["source_id"] = iri::evt("hasSource");
    s.lift["timestamp"] = iri::evt("hasTimestamp");
    s.lift["reading"] = iri::evt("hasReading");
    return s;
}

}  // namespace detail

inline Scenario load_scenario(const ScenarioConfig& config) {
    const auto& t = iri::type();
    std::vector<Triple> triples = space_hierarchy();
    std::map<std::string, StreamSchema> schemas;
    schemas[kMeterStream] = detail::reading_schema(kMeterStream, "kW");
    schemas[kFancoilStream] = detail::reading_schema(kFancoilStream, "status");
    schemas[kTempStream] = detail::reading_schema(kTempStream, "F");
    schemas[kOccupancyStream] = detail::reading_schema(kOccupancyStream, "bool");
    {
        StreamSchema s;
        s.stream_id = kScheduleStream;
        s.attributes["schedule"] = AttributeSpec{AttributeKind::Epoch, "s", true};
        s.value_attribute = "schedule";
        s.lift["source_id"] = iri::evt("hasSource");
        s.lift["timestamp"] = iri::evt("hasTimestamp");
        s.lift["schedule"] = iri::evt("hasSchedule");
        schemas[kScheduleStream] = s;
    }
    {
        StreamSchema s;
        s.stream_id = kActionStream;
        s.attributes["action"] = AttributeSpec{AttributeKind::String, "", false};
        s.attributes["target"] = AttributeSpec{AttributeKind::String, "", false};
        s.attributes["amount"] = AttributeSpec{AttributeKind::Number, "", false};
        s.attributes["duration"] = AttributeSpec{AttributeKind::Number, "s", false};
        s.value_attribute = "amount";
        s.lift["source_id"] = iri::evt("hasSource");
        s.lift["timestamp"] = iri::evt("hasTimestamp");
        s.lift["action"] = iri::evt("hasAction");
        schemas[kActionStream] = s;
    }

    // Sensor neighborhoods go both into the ontology and the per-source
    // static triples of their stream.
    auto sensor = [&](const std::string& stream, const std::string& id, const std::string& cls, const std::string& space) {
        std::vector<Triple> st{iri_triple(id, t, cls)};
        if (!space.empty()) st.push_back(iri_triple(id, iri::bd("hasLocation"), space));
        triples.insert(triples.end(), st.begin(), st.end());
        schemas[stream].sources[id] = st;
    };

    for (const auto& d : config.departments) triples.push_back(iri_triple(iri::org(d), t, iri::org("Department")));
    for (const auto& b : config.buildings) {
        auto bid = iri::bd(b.id);
        triples.push_back(iri_triple(bid, t, iri::bd("Building")));
        if (!b.department.empty()) triples.push_back(iri_triple(bid, iri::bd("belongsTo"), iri::org(b.department)));
        sensor(kMeterStream, meter_id(b.id), iri::ee("PowerMeter"), bid);
        sensor(kActionStream, controller_id(b.id, ActionKind::GTR), iri::ee("GTRController"), bid);
        sensor(kActionStream, controller_id(b.id, ActionKind::DutyCycle), iri::ee("DutyCycleController"), bid);
    }
    sensor(kActionStream, action_engine_id(), iri::ee("ActionEngine"), "");
    const auto& ns = Namespaces::defaults();
    for (const auto& r : config.rooms) {
        auto rid = iri::bd(r.id);
        std::string type;
        try {
            type = ns.expand(r.type);
        } catch (const Error&) {
            throw Error(ErrorCode::ConfigError, "$.rooms." + r.id + ".type", "unresolved " + r.type);
        }
        triples.push_back(iri_triple(rid, t, type));
        triples.push_back(iri_triple(rid, iri::bd("partOf"), iri::bd(r.building)));
        if (!r.department.empty()) triples.push_back(iri_triple(rid, iri::bd("belongsTo"), iri::org(r.department)));
        sensor(kTempStream, temp_id(r.id), iri::ee("TempSensor"), rid);
        sensor(kOccupancyStream, occupancy_id(r.id), iri::ee("OccupancySensor"), rid);
        sensor(kScheduleStream, calendar_id(r.id), iri::ee("ClassCalendar"), rid);
        for (int n = 1; n <= r.fancoils; ++n) sensor(kFancoilStream, fancoil_id(r.id, n), iri::ee("FanCoil"), rid);
        if (r.submeter) sensor(kMeterStream, meter_id(r.id), iri::ee("PowerMeter"), rid);
    }

    Scenario s;
    s.config = config;
    s.ontology = std::make_shared<const Ontology>(load_ontology(std::move(triples), ns));
    auto registry = std::make_shared<SchemaRegistry>();
    for (auto& [_, schema] : schemas) registry->add(std::move(schema));
    s.schemas = registry;
    return s;
}

inline Scenario load_scenario(const nlohmann::json& doc) { return load_scenario(config_from_json(doc)); }

/// Components of one meter reading; `reading` is their sum in this order.
struct MeterComponents {
    Timestamp time = 0;
    std::string meter;  // expanded IRI
    double base = 0;
    double occupant = 0;
    double hvac = 0;
    double noise = 0;
    double reading = 0;
};

struct Actuation {
    double value = 0;
    Timestamp expires = 0;
};

struct Notification {
    Timestamp time = 0;
    std::string audience;
    std::string message;
};

/// Single-stepped campus model. Each tick, in order: expire actuations,
/// compute occupancy, set fan-coil states, publish due readings, then let
/// room temperatures drift for one tick.
class Simulator {
  public:
    explicit Simulator(Scenario scenario) : scenario_(std::move(scenario)), rng_(scenario_.config.seed) {
        const auto& c = scenario_.config;
        clock_ = c.start;
        for (std::size_t i = 0; i < c.buildings.size(); ++i) building_index_[c.buildings[i].id] = i;
        buildings_.resize(c.buildings.size());
        for (std::size_t i = 0; i < c.rooms.size(); ++i) {
            const auto& r = c.rooms[i];
            room_index_[r.id] = i;
            RoomState rs;
            rs.temp = r.initial_temp.value_or(c.thermal.initial_temp);
            rooms_.push_back(rs);
            auto& b = buildings_[building_index_.at(r.building)];
            for (int n = 1; n <= r.fancoils; ++n) {
                b.coils.push_back(coils_.size());
                coils_.push_back(CoilState{fancoil_id(r.id, n), i, false});
            }
        }
    }

    const Scenario& scenario() const { return scenario_; }
    Timestamp clock() const { return clock_; }

    /// Produces every event with timestamp in [clock, until), in merged order.
    std::vector<Event> step(Timestamp until) {
        if (until < clock_) throw Error(ErrorCode::InvalidArgument, std::to_string(until), "step before clock");
        std::vector<Event> out;
        while (clock_ < until) {
            tick(clock_, out);
            clock_ += scenario_.config.tick;
        }
        std::stable_sort(out.begin(), out.end(), merge_before);
        return out;
    }

    /// Applies a physical or notification command at `time`; effects start
    /// with the next tick. Throws UnknownTarget for unknown spaces.
    void apply_action(const ActionCommand& cmd, Timestamp time) {
        switch (cmd.kind) {
            case ActionKind::GTR: {
                auto& b = building_for(cmd.target);
                b.gtr = Actuation{cmd.amount, time + cmd.duration};
                break;
            }
            case ActionKind::DutyCycle: {
                auto& b = building_for(cmd.target);
                b.cap = Actuation{std::max(0.0, cmd.amount), time + cmd.duration};
                break;
            }
            case ActionKind::Notify: notifications_.push_back({time, cmd.target, cmd.message}); break;
            default: throw Error(ErrorCode::UnknownTarget, cmd.target, "not a simulator action");
        }
    }

    /// Building local name for a building or room IRI (or local name).
    std::string building_of(const std::string& target) const {
        auto local = local_name(target);
        if (building_index_.count(local)) return local;
        if (auto it = room_index_.find(local); it != room_index_.end()) return scenario_.config.rooms[it->second].building;
        throw Error(ErrorCode::UnknownTarget, target);
    }

    std::optional<Actuation> gtr(const std::string& building) const { return buildings_.at(building_index_.at(building)).gtr; }
    std::optional<Actuation> duty_cap(const std::string& building) const {
        return buildings_.at(building_index_.at(building)).cap;
    }

    const std::vector<MeterComponents>& meter_trace() const { return trace_; }
    const std::vector<Notification>& notifications() const { return notifications_; }

    double room_temp(const std::string& room) const { return rooms_.at(room_index_.at(room)).temp; }

    /// Fan coils currently ON in a building.
    int coils_on(const std::string& building) const {
        int n = 0;
        for (auto ci : buildings_.at(building_index_.at(building)).coils) n += coils_[ci].on ? 1 : 0;
        return n;
    }

    double outdoor_temp(Timestamp t) const {
        const auto& th = scenario_.config.thermal;
        double hour = static_cast<double>(((t % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay) / 3600.0;
        return th.outdoor_mean + th.outdoor_amplitude * std::cos(2 * std::numbers::pi * (hour - th.peak_hour) / 24.0);
    }

    /// Scheduled occupants of a room at `t`.
    int scheduled_occupants(std::size_t room, Timestamp t) const {
        int n = 0;
        for (const auto& e : scenario_.config.schedule) {
            if (room_index_.at(e.room) != room) continue;
            if (e.daily) {
                Timestamp sod = ((t % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay;
                if (sod >= e.start && sod < e.end) n += e.occupancy;
            } else if (t >= e.start && t < e.end) {
                n += e.occupancy;
            }
        }
        return n;
    }

  private:
    struct RoomState {
        double temp = 0;
        int occupants = 0;
    };
    struct CoilState {
        std::string id;
        std::size_t room = 0;
        bool on = false;
    };
    struct BuildingState {
        std::vector<std::size_t> coils;
        std::size_t rotation = 0;
        std::optional<Actuation> gtr;
        std::optional<Actuation> cap;
    };

    static std::string local_name(const std::string& target) {
        for (auto base : {iri::kBd, std::string_view("bd:")}) {
            if (target.starts_with(base)) return target.substr(base.size());
        }
        return target;
    }

    BuildingState& building_for(const std::string& target) { return buildings_[building_index_.at(building_of(target))]; }

    Event make_event(const char* stream, const std::string& source, Timestamp ts, std::string attr, Value v) {
        Event e;
        e.stream_id = stream;
        e.source_id = source;
        e.seq = ++seq_[stream];
        e.timestamp = ts;
        e.attributes[std::move(attr)] = std::move(v);
        return e;
    }

    bool due(std::int64_t cadence, Timestamp t) const { return (t - scenario_.config.start) % cadence == 0; }

    void tick(Timestamp t, std::vector<Event>& out) {
        const auto& c = scenario_.config;
        for (auto& b : buildings_) {
            if (b.gtr && b.gtr->expires <= t) b.gtr.reset();
            if (b.cap && b.cap->expires <= t) b.cap.reset();
        }

        for (std::size_t i = 0; i < rooms_.size(); ++i) {
            int n = scheduled_occupants(i, t);
            if (c.walk_in_probability > 0) {
                std::bernoulli_distribution walk(c.walk_in_probability);
                if (walk(rng_)) n += std::uniform_int_distribution<int>(1, std::max(1, c.walk_in_max))(rng_);
            }
            rooms_[i].occupants = n;
        }

        for (auto& b : buildings_) {
            double offset = b.gtr ? b.gtr->value : 0.0;
            std::vector<bool> demand(b.coils.size());
            for (std::size_t k = 0; k < b.coils.size(); ++k) {
                const auto& coil = coils_[b.coils[k]];
                demand[k] = rooms_[coil.room].temp > c.rooms[coil.room].setpoint + offset;
            }
            std::vector<bool> on = demand;
            if (b.cap && !b.coils.empty()) {
                auto cap = static_cast<std::size_t>(b.cap->value);
                std::fill(on.begin(), on.end(), false);
                std::size_t chosen = 0, n = b.coils.size(), next = b.rotation;
                for (std::size_t step = 0; step < n && chosen < cap; ++step) {
                    std::size_t k = (b.rotation + step) % n;
                    if (!demand[k]) continue;
                    on[k] = true;
                    ++chosen;
                    next = (k + 1) % n;
                }
                b.rotation = next;
            }
            for (std::size_t k = 0; k < b.coils.size(); ++k) coils_[b.coils[k]].on = on[k];
        }

        emit(t, out);

        double dt = static_cast<double>(c.tick) / 3600.0;
        double outdoor = outdoor_temp(t);
        std::vector<int> room_coils(rooms_.size(), 0), room_on(rooms_.size(), 0);
        for (const auto& coil : coils_) {
            ++room_coils[coil.room];
            room_on[coil.room] += coil.on ? 1 : 0;
        }
        for (std::size_t i = 0; i < rooms_.size(); ++i) {
            auto& r = rooms_[i];
            double frac = room_coils[i] ? static_cast<double>(room_on[i]) / room_coils[i] : 0.0;
            double rate = c.thermal.k_outdoor * (outdoor - r.temp) + c.thermal.occupant_heat * r.occupants +
                          c.thermal.k_cooling * frac * (c.rooms[i].setpoint - r.temp);
            r.temp += dt * rate;
        }
    }

    void emit(Timestamp t, std::vector<Event>& out) {
        const auto& c = scenario_.config;
        if (due(c.cadence.meter, t)) {
            std::vector<int> occ(buildings_.size(), 0), on(buildings_.size(), 0);
            for (std::size_t i = 0; i < rooms_.size(); ++i) occ[building_index_.at(c.rooms[i].building)] += rooms_[i].occupants;
            for (std::size_t bi = 0; bi < buildings_.size(); ++bi) {
                for (auto ci : buildings_[bi].coils) on[bi] += coils_[ci].on ? 1 : 0;
            }
            for (std::size_t bi = 0; bi < buildings_.size(); ++bi) {
                MeterComponents m{t, meter_id(c.buildings[bi].id), c.buildings[bi].base_kw,
                                  c.load.kw_per_occupant * occ[bi], c.load.kw_per_fancoil * on[bi], noise(), 0};
                out.push_back(meter_event(m));
            }
            for (std::size_t i = 0; i < rooms_.size(); ++i) {
                const auto& sm = c.rooms[i].submeter;
                if (!sm) continue;
                MeterComponents m{t, meter_id(c.rooms[i].id), sm->base_kw, sm->kw_per_occupant * rooms_[i].occupants, 0,
                                  noise(), 0};
                out.push_back(meter_event(m));
            }
        }
        if (due(c.cadence.temp, t)) {
            for (std::size_t i = 0; i < rooms_.size(); ++i) {
                double reading = std::round(rooms_[i].temp * 100.0) / 100.0;
                out.push_back(make_event(kTempStream, temp_id(c.rooms[i].id), t, "reading", reading));
            }
        }
        if (due(c.cadence.fancoil, t)) {
            for (const auto& coil : coils_) out.push_back(make_event(kFancoilStream, coil.id, t, "reading", coil.on ? 1.0 : 0.0));
        }
        if (due(c.cadence.occupancy, t)) {
            for (std::size_t i = 0; i < rooms_.size(); ++i) {
                out.push_back(make_event(kOccupancyStream, occupancy_id(c.rooms[i].id), t, "reading",
                                         rooms_[i].occupants > 0 ? 1.0 : 0.0));
            }
        }
        // Announcements whose publication time falls in [t, t + tick).
        for (const auto& e : c.schedule) {
            for (Timestamp start : class_starts(e, t + kScheduleLead, t + kScheduleLead + c.tick)) {
                out.push_back(make_event(kScheduleStream, calendar_id(e.room), start - kScheduleLead, "schedule",
                                         static_cast<double>(start)));
            }
        }
    }

    static std::vector<Timestamp> class_starts(const ClassEntry& e, Timestamp from, Timestamp to) {
        std::vector<Timestamp> out;
        if (!e.daily) {
            if (e.start >= from && e.start < to) out.push_back(e.start);
            return out;
        }
        Timestamp day = (from - ((from % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay);
        for (Timestamp d = day; d < to; d += kSecondsPerDay) {
            Timestamp s = d + e.start;
            if (s >= from && s < to) out.push_back(s);
        }
        return out;
    }

    double noise() {
        double sd = scenario_.config.load.noise_sd;
        if (sd <= 0) return 0;
        std::normal_distribution<double> dist(0.0, sd);
        return std::round(dist(rng_) * 1000.0) / 1000.0;
    }

    Event meter_event(MeterComponents m) {
        m.reading = m.base + m.occupant + m.hvac + m.noise;
        trace_.push_back(m);
        return make_event(kMeterStream, m.meter, m.time, "reading", m.reading);
    }

    Scenario scenario_;
    std::mt19937_64 rng_;
    Timestamp clock_ = 0;
    std::map<std::string, std::size_t> building_index_;
    std::map<std::string, std::size_t> room_index_;
    std::vector<BuildingState> buildings_;
    std::vector<RoomState> rooms_;
    std::vector<CoilState> coils_;
    std::map<std::string, std::uint64_t> seq_;
    std::vector<MeterComponents> trace_;
    std::vector<Notification> notifications_;
};

/// Per-stream counts, per-meter peak and energy over a trace.
struct TraceSummary {
    std::map<std::string, std::size_t> counts;
    std::map<std::string, double> peak_kw;
    std::map<std::string, double> energy_kwh;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& [_, c] : counts) n += c;
        return n;
    }
};

inline void summarize(TraceSummary& s, const Event& e, std::int64_t meter_cadence) {
    ++s.counts[e.stream_id];
    if (e.stream_id != kMeterStream) return;
    double kw = e.number("reading").value_or(0);
    auto [it, fresh] = s.peak_kw.try_emplace(e.source_id, kw);
    if (!fresh) it->second = std::max(it->second, kw);
    s.energy_kwh[e.source_id] += kw * static_cast<double>(meter_cadence) / 3600.0;
}

/// Runs the simulator for `duration` seconds without actions, streaming
/// events to `sink` in merged order.
inline TraceSummary run(Simulator& sim, std::int64_t duration, const std::function<void(const Event&)>& sink) {
    TraceSummary s;
    for (const auto& e : sim.step(sim.clock() + duration)) {
        summarize(s, e, sim.scenario().config.cadence.meter);
        if (sink) sink(e);
    }
    return s;
}

}  // namespace gridcep::sim
