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

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>

#include "gridcep/error.hpp"

namespace gridcep {

/// Event time in integer seconds since the UTC epoch.
using Timestamp = std::int64_t;

constexpr Timestamp kSecondsPerDay = 86400;

enum class TimeUnit { Seconds, Minutes, Hours };

struct Duration {
    std::int64_t magnitude = 0;
    TimeUnit unit = TimeUnit::Seconds;

    constexpr std::int64_t seconds() const {
        switch (unit) {
            case TimeUnit::Seconds: return magnitude;
            case TimeUnit::Minutes: return magnitude * 60;
            case TimeUnit::Hours: return magnitude * 3600;
        }
        return magnitude;
    }

    friend bool operator==(const Duration&, const Duration&) = default;
};

constexpr std::string_view unit_suffix(TimeUnit unit) {
    switch (unit) {
        case TimeUnit::Seconds: return "s";
        case TimeUnit::Minutes: return "min";
        case TimeUnit::Hours: return "h";
    }
    return "s";
}

inline std::string to_string(const Duration& d) {
    return std::to_string(d.magnitude) + std::string(unit_suffix(d.unit));
}

/// Parses `300`, `300s`, `5min` or `2h` into seconds.
inline std::int64_t parse_duration_seconds(std::string_view text) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr == text.data()) {
        throw Error(ErrorCode::InvalidArgument, std::string(text), "not a duration");
    }
    std::string_view rest(ptr, static_cast<std::size_t>(text.data() + text.size() - ptr));
    if (rest.empty() || rest == "s") return value;
    if (rest == "min") return value * 60;
    if (rest == "h") return value * 3600;
    throw Error(ErrorCode::InvalidArgument, std::string(text), "unknown duration unit");
}

/// Shortest fixed-notation text that reads back to the same double.
inline std::string format_number(double v) {
    if (v == 0.0) return "0";
    char buf[512];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
    if (ec != std::errc{}) return std::to_string(v);
    return std::string(buf, ptr);
}

inline double parse_number(std::string_view text) {
    double value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw Error(ErrorCode::InvalidArgument, std::string(text), "not a number");
    }
    return value;
}

/// Attribute payload. Whether a string is an IRI or plain text is decided
/// by the stream schema, not by the value itself.
using Value = std::variant<double, std::string>;

inline bool is_number(const Value& v) { return std::holds_alternative<double>(v); }

inline std::string to_string(const Value& v) {
    if (const auto* d = std::get_if<double>(&v)) return format_number(*d);
    return std::get<std::string>(v);
}

}  // namespace gridcep
