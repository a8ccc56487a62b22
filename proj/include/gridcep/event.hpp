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
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridcep/error.hpp"
#include "gridcep/ontology.hpp"
#include "gridcep/value.hpp"

namespace gridcep {

struct Event {
    std::string stream_id;
    std::string source_id;  // expanded IRI
    std::uint64_t seq = 0;
    Timestamp timestamp = 0;
    std::map<std::string, Value> attributes;

    /// Numeric attribute lookup; `timestamp` is available on every event.
    std::optional<double> number(const std::string& name) const {
        if (name == "timestamp") return static_cast<double>(timestamp);
        auto it = attributes.find(name);
        if (it == attributes.end()) return std::nullopt;
        if (const auto* d = std::get_if<double>(&it->second)) return *d;
        return std::nullopt;
    }

    friend bool operator==(const Event&, const Event&) = default;
};

/// `evt:<stream_id>/<seq>` in expanded form.
inline std::string event_iri(const std::string& stream_id, std::uint64_t seq) {
    return iri::evt(stream_id + "/" + std::to_string(seq));
}

inline std::string event_iri(const Event& e) { return event_iri(e.stream_id, e.seq); }

enum class AttributeKind { Number, String, Iri, Epoch };

inline std::string_view to_string(AttributeKind k) {
    switch (k) {
        case AttributeKind::Number: return "number";
        case AttributeKind::String: return "string";
        case AttributeKind::Iri: return "iri";
        case AttributeKind::Epoch: return "epoch";
    }
    return "number";
}

struct AttributeSpec {
    AttributeKind kind = AttributeKind::Number;
    std::string unit;
    // Epoch attribute whose value is never earlier than the carrying event's
    // own timestamp (e.g. a class start announced ahead of time).
    bool future = false;

    bool numeric() const { return kind == AttributeKind::Number || kind == AttributeKind::Epoch; }
};

struct StreamSchema {
    std::string stream_id;
    std::map<std::string, AttributeSpec> attributes;
    /// Attribute that AVG/SUM/COUNT fold over.
    std::string value_attribute;
    /// attribute name -> predicate IRI; `source_id` and `timestamp` are mandatory.
    std::map<std::string, std::string> lift;
    /// source IRI -> static neighbourhood triples (location, type, owner).
    std::map<std::string, std::vector<Triple>> sources;

    bool has_attribute(const std::string& name) const { return name == "timestamp" || attributes.count(name) > 0; }

    const AttributeSpec* attribute(const std::string& name) const {
        static const AttributeSpec ts{AttributeKind::Epoch, "s", false};
        if (name == "timestamp") return &ts;
        auto it = attributes.find(name);
        return it == attributes.end() ? nullptr : &it->second;
    }
};

inline void check_event(const Event& event, const StreamSchema& schema) {
    if (event.stream_id != schema.stream_id) {
        throw Error(ErrorCode::SchemaViolation, event.stream_id, "event does not belong to stream " + schema.stream_id);
    }
    for (const auto& [name, value] : event.attributes) {
        const auto* spec = schema.attribute(name);
        if (!spec || name == "timestamp") {
            throw Error(ErrorCode::SchemaViolation, name, "attribute not declared by " + schema.stream_id);
        }
        if (spec->numeric() != is_number(value)) {
            throw Error(ErrorCode::SchemaViolation, name, "value kind does not match schema");
        }
    }
}

/// The event node's graph: one triple per mapped attribute plus the static
/// triples of its source.
inline std::vector<Triple> lift_event(const Event& event, const StreamSchema& schema, const Ontology& ontology) {
    check_event(event, schema);
    auto src = schema.sources.find(event.source_id);
    if (src == schema.sources.end()) {
        throw Error(ErrorCode::UnknownSource, ontology.namespaces().compact(event.source_id));
    }
    auto node = Term::make_iri(event_iri(event));
    std::vector<Triple> out;
    out.push_back(Triple{node, Term::make_iri(schema.lift.at("source_id")), Term::make_iri(event.source_id)});
    out.push_back(Triple{node, Term::make_iri(schema.lift.at("timestamp")),
                         Term::make_number(static_cast<double>(event.timestamp))});
    for (const auto& [name, value] : event.attributes) {
        auto pred = schema.lift.find(name);
        if (pred == schema.lift.end()) continue;
        Term object = schema.attributes.at(name).kind == AttributeKind::Iri
                          ? Term::make_iri(ontology.namespaces().expand(std::get<std::string>(value)))
                          : Term::from_value(value);
        out.push_back(Triple{node, Term::make_iri(pred->second), std::move(object)});
    }
    out.insert(out.end(), src->second.begin(), src->second.end());
    return out;
}

/// Stream schemas by id.
class SchemaRegistry {
  public:
    void add(StreamSchema schema) {
        for (const char* required : {"source_id", "timestamp"}) {
            if (!schema.lift.count(required)) {
                throw Error(ErrorCode::ConfigError, schema.stream_id + ".lift." + required, "lift mapping is mandatory");
            }
        }
        if (!schema.value_attribute.empty() && !schema.attributes.count(schema.value_attribute)) {
            throw Error(ErrorCode::ConfigError, schema.stream_id + ".value", "value attribute is not declared");
        }
        auto id = schema.stream_id;
        schemas_[id] = std::move(schema);
    }

    bool contains(const std::string& stream_id) const { return schemas_.count(stream_id) > 0; }

    const StreamSchema& get(const std::string& stream_id) const {
        auto it = schemas_.find(stream_id);
        if (it == schemas_.end()) throw Error(ErrorCode::UnknownStream, stream_id);
        return it->second;
    }

    const std::map<std::string, StreamSchema>& all() const { return schemas_; }

  private:
    std::map<std::string, StreamSchema> schemas_;
};

// ---------------------------------------------------------------------------
// JSON documents

namespace detail {

inline AttributeKind parse_kind(const std::string& s, const std::string& path) {
    if (s == "number") return AttributeKind::Number;
    if (s == "string") return AttributeKind::String;
    if (s == "iri") return AttributeKind::Iri;
    if (s == "epoch") return AttributeKind::Epoch;
    throw Error(ErrorCode::ConfigError, path, "unknown attribute kind '" + s + "'");
}

inline Term json_term(const nlohmann::json& j, const Namespaces& ns) {
    if (j.is_number()) return Term::make_number(j.get<double>());
    auto s = j.get<std::string>();
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return Term::make_literal(s.substr(1, s.size() - 2));
    return Term::make_iri(ns.expand(s));
}

}  // namespace detail

/// Parses the stream-schema document: a list with one object per stream
/// (`stream_id`, `attributes`, `lift`, `sources`, optional `value`).
inline SchemaRegistry schemas_from_json(const nlohmann::json& doc, const Namespaces& ns) {
    if (!doc.is_array()) throw Error(ErrorCode::ConfigError, "$", "expected a list of stream schemas");
    SchemaRegistry registry;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& obj = doc[i];
        std::string path = "$[" + std::to_string(i) + "]";
        try {
            StreamSchema schema;
            schema.stream_id = obj.at("stream_id").get<std::string>();
            for (const auto& [name, spec] : obj.at("attributes").items()) {
                AttributeSpec a;
                a.kind = detail::parse_kind(spec.at("kind").get<std::string>(), path + ".attributes." + name);
                a.unit = spec.value("unit", "");
                a.future = spec.value("future", false);
                schema.attributes[name] = a;
            }
            schema.value_attribute = obj.value("value", "");
            for (const auto& [name, pred] : obj.at("lift").items()) {
                schema.lift[name] = ns.expand(pred.get<std::string>());
            }
            if (obj.contains("sources")) {
                for (const auto& [source, triples] : obj.at("sources").items()) {
                    auto& list = schema.sources[ns.expand(source)];
                    for (const auto& t : triples) {
                        if (!t.is_array() || t.size() != 3) {
                            throw Error(ErrorCode::ConfigError, path + ".sources." + source, "expected [s, p, o]");
                        }
                        list.push_back(Triple{Term::make_iri(ns.expand(t[0].get<std::string>())),
                                              Term::make_iri(ns.expand(t[1].get<std::string>())),
                                              detail::json_term(t[2], ns)});
                    }
                }
            }
            registry.add(std::move(schema));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ConfigError, path, e.what());
        }
    }
    return registry;
}

inline nlohmann::ordered_json schemas_to_json(const SchemaRegistry& registry, const Namespaces& ns) {
    auto doc = nlohmann::ordered_json::array();
    for (const auto& [id, schema] : registry.all()) {
        nlohmann::ordered_json obj;
        obj["stream_id"] = id;
        if (!schema.value_attribute.empty()) obj["value"] = schema.value_attribute;
        auto& attrs = obj["attributes"] = nlohmann::ordered_json::object();
        for (const auto& [name, spec] : schema.attributes) {
            nlohmann::ordered_json a;
            a["kind"] = to_string(spec.kind);
            if (!spec.unit.empty()) a["unit"] = spec.unit;
            if (spec.future) a["future"] = true;
            attrs[name] = a;
        }
        auto& lift = obj["lift"] = nlohmann::ordered_json::object();
        for (const auto& [name, pred] : schema.lift) lift[name] = ns.compact(pred);
        auto& sources = obj["sources"] = nlohmann::ordered_json::object();
        for (const auto& [source, triples] : schema.sources) {
            auto& list = sources[ns.compact(source)] = nlohmann::ordered_json::array();
            for (const auto& t : triples) {
                nlohmann::ordered_json o;
                if (t.object.kind == TermKind::Iri) {
                    o = ns.compact(t.object.value);
                } else if (t.object.numeric) {
                    o = parse_number(t.object.value);
                } else {
                    o = "\"" + t.object.value + "\"";
                }
                list.push_back({ns.compact(t.subject.value), ns.compact(t.predicate.value), o});
            }
        }
        doc.push_back(std::move(obj));
    }
    return doc;
}

/// One JSON-lines record of the event trace format.
inline nlohmann::ordered_json event_to_json(const Event& e, const Namespaces& ns) {
    nlohmann::ordered_json j;
    j["stream"] = e.stream_id;
    j["seq"] = e.seq;
    j["timestamp"] = e.timestamp;
    j["source"] = ns.compact(e.source_id);
    auto& attrs = j["attributes"] = nlohmann::ordered_json::object();
    for (const auto& [name, value] : e.attributes) {
        if (const auto* d = std::get_if<double>(&value)) {
            attrs[name] = *d;
        } else {
            attrs[name] = std::get<std::string>(value);
        }
    }
    return j;
}

inline Event event_from_json(const nlohmann::json& j, const Namespaces& ns) {
    try {
        Event e;
        e.stream_id = j.at("stream").get<std::string>();
        e.seq = j.at("seq").get<std::uint64_t>();
        e.timestamp = j.at("timestamp").get<Timestamp>();
        e.source_id = ns.expand(j.at("source").get<std::string>());
        if (j.contains("attributes")) {
            for (const auto& [name, v] : j.at("attributes").items()) {
                if (v.is_number()) {
                    e.attributes[name] = v.get<double>();
                } else {
                    e.attributes[name] = v.get<std::string>();
                }
            }
        }
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::SchemaViolation, "event", ex.what());
    }
}

// ---------------------------------------------------------------------------
// Global event-time ordering

/// Total order used for deterministic evaluation: timestamp, then stream id,
/// then sequence number.
inline bool merge_before(const Event& a, const Event& b) {
    return std::tie(a.timestamp, a.stream_id, a.seq) < std::tie(b.timestamp, b.stream_id, b.seq);
}

/// Lazily merges several time-ordered event sources into one stream ordered
/// by `merge_before`. Each source is a pull function returning nullopt when
/// exhausted. Throws OutOfOrderInput when a source goes backwards in time or
/// repeats a sequence number.
class EventMerger {
  public:
    using Source = std::function<std::optional<Event>()>;

    explicit EventMerger(std::vector<Source> sources) : sources_(std::move(sources)), last_(sources_.size()) {
        for (std::size_t i = 0; i < sources_.size(); ++i) pull(i);
    }

    std::optional<Event> next() {
        if (heap_.empty()) return std::nullopt;
        std::pop_heap(heap_.begin(), heap_.end(), Later{});
        auto entry = std::move(heap_.back());
        heap_.pop_back();
        pull(entry.source);
        return std::move(entry.event);
    }

  private:
    struct Entry {
        Event event;
        std::size_t source;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const { return merge_before(b.event, a.event); }
    };

    void pull(std::size_t i) {
        auto e = sources_[i]();
        if (!e) return;
        if (auto& prev = last_[i]) {
            if (e->timestamp < prev->timestamp || (e->stream_id == prev->stream_id && e->seq <= prev->seq)) {
                throw Error(ErrorCode::OutOfOrderInput, e->stream_id + "/" + std::to_string(e->seq),
                            "timestamp " + std::to_string(e->timestamp) + " after " + std::to_string(prev->timestamp));
            }
        }
        last_[i] = *e;
        heap_.push_back(Entry{std::move(*e), i});
        std::push_heap(heap_.begin(), heap_.end(), Later{});
    }

    std::vector<Source> sources_;
    std::vector<std::optional<Event>> last_;
    std::vector<Entry> heap_;
};

inline std::vector<Event> merge_ordered(std::vector<std::vector<Event>> streams) {
    std::vector<EventMerger::Source> sources;
    for (auto& s : streams) {
        sources.push_back([events = std::move(s), pos = std::size_t{0}]() mutable -> std::optional<Event> {
            if (pos >= events.size()) return std::nullopt;
            return std::move(events[pos++]);
        });
    }
    EventMerger merger(std::move(sources));
    std::vector<Event> out;
    while (auto e = merger.next()) out.push_back(std::move(*e));
    return out;
}

}  // namespace gridcep
