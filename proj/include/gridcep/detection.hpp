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
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridcep/ontology.hpp"
#include "gridcep/value.hpp"

namespace gridcep::cep {

struct BoundEvent {
    std::string var;
    std::string stream_id;
    std::uint64_t seq = 0;
    std::string source_id;
    Timestamp timestamp = 0;

    friend bool operator==(const BoundEvent&, const BoundEvent&) = default;
};

struct Output {
    std::string name;                // "?e1" or the aggregate alias
    std::optional<double> number;    // aggregate value
    std::string event_iri;           // bound event node for variable projections

    friend bool operator==(const Output&, const Output&) = default;
};

struct Detection {
    std::uint64_t id = 0;  // position in the detection log
    std::string pattern_id;
    Timestamp detection_time = 0;
    Timestamp consequence_time = 0;
    std::vector<Output> outputs;
    std::vector<BoundEvent> bindings;

    Timestamp latency() const { return consequence_time - detection_time; }

    friend bool operator==(const Detection&, const Detection&) = default;
};

inline nlohmann::ordered_json detection_to_json(const Detection& d, const Namespaces& ns) {
    nlohmann::ordered_json j;
    j["pattern_id"] = d.pattern_id;
    j["detection_time"] = d.detection_time;
    j["consequence_time"] = d.consequence_time;
    auto& outputs = j["outputs"] = nlohmann::ordered_json::object();
    for (const auto& o : d.outputs) {
        if (o.number) {
            outputs[o.name] = *o.number;
        } else {
            outputs[o.name] = ns.compact(o.event_iri);
        }
    }
    auto& bindings = j["bindings"] = nlohmann::ordered_json::object();
    for (const auto& b : d.bindings) {
        bindings["?" + b.var] = ns.compact(iri::evt(b.stream_id + "/" + std::to_string(b.seq)));
    }
    return j;
}

/// Detections closer than `gap` seconds (inclusive) merge into one interval.
struct DetectionInterval {
    std::string pattern_id;
    Timestamp start = 0;
    Timestamp end = 0;
    std::size_t count = 0;

    friend bool operator==(const DetectionInterval&, const DetectionInterval&) = default;
};

/// Per pattern, consecutive detections at most `gap` seconds apart merge.
/// Detections must be time-ordered per pattern. Output is ordered by pattern id, then start time.
inline std::vector<DetectionInterval> coalesce(const std::vector<Detection>& detections, std::int64_t gap) {
    std::map<std::string, std::vector<DetectionInterval>> lanes;
    for (const auto& d : detections) {
        auto& lane = lanes[d.pattern_id];
        if (!lane.empty() && d.detection_time >= lane.back().start && d.detection_time - lane.back().end <= gap) {
            lane.back().end = std::max(lane.back().end, d.detection_time);
            ++lane.back().count;
        } else {
            lane.push_back({d.pattern_id, d.detection_time, d.detection_time, 1});
        }
    }
    std::vector<DetectionInterval> out;
    for (auto& [_, lane] : lanes) out.insert(out.end(), lane.begin(), lane.end());
    return out;
}

inline std::string intervals_to_csv(const std::vector<DetectionInterval>& intervals) {
    std::ostringstream out;
    out << "pattern_id,start,end,count\n";
    for (const auto& i : intervals) out << i.pattern_id << ',' << i.start << ',' << i.end << ',' << i.count << '\n';
    return out.str();
}

}  // namespace gridcep::cep
