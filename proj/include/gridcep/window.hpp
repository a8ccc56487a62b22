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
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridcep/pattern_ast.hpp"
#include "gridcep/value.hpp"

namespace gridcep::cep {

struct WindowSample {
    Timestamp timestamp = 0;
    double value = 0;
    std::string source;
};

struct WindowSpec {
    lang::AggFn fn = lang::AggFn::Avg;
    lang::WindowMode mode = lang::WindowMode::Sliding;
    bool by_count = false;
    std::int64_t width = 0;  // seconds or events; 0 only for unbounded `latest`
};

/// One aggregate evaluated over a window extent.
struct WindowCandidate {
    Timestamp time = 0;  // newest contributing timestamp
    double value = 0;
    std::size_t count = 0;
    std::size_t trigger = 0;  // index of the sample that produced it
};

/// Folds `fn` over values in the given order.
inline double fold(lang::AggFn fn, const std::vector<double>& values) {
    if (fn == lang::AggFn::Count) return static_cast<double>(values.size());
    double sum = 0;
    for (double v : values) sum += v;
    return fn == lang::AggFn::Avg ? sum / static_cast<double>(values.size()) : sum;
}

/// Incremental window. `push` returns the candidates produced by an arrival
/// (blocks closed by it, then the arrival's own sliding/latest candidate);
/// `advance` closes time blocks that are due without an arrival.
///
/// Extents:
///  - sliding time W: samples with now - t < W; count N: last N samples.
///  - batch time W: blocks [origin + kW, origin + (k+1)W), emitted once closed
///    and only if non-empty; count N: every N samples.
///  - latest time W: newest sample per source with now - t < W; count N:
///    newest per source among the last N samples; width 0: newest per source.
class WindowState {
  public:
    explicit WindowState(WindowSpec spec, std::optional<Timestamp> origin = std::nullopt)
        : spec_(spec), origin_(origin) {}

    std::vector<WindowCandidate> push(const WindowSample& sample) {
        std::vector<WindowCandidate> out;
        auto idx = arrivals_++;
        Timestamp now = sample.timestamp;
        using lang::WindowMode;
        switch (spec_.mode) {
            case WindowMode::Sliding:
                if (spec_.by_count) {
                    trailing_.push_back({sample, idx});
                    while (static_cast<std::int64_t>(trailing_.size()) > spec_.width) trailing_.pop_front();
                } else {
                    while (!trailing_.empty() && now - trailing_.front().sample.timestamp >= spec_.width) trailing_.pop_front();
                    trailing_.push_back({sample, idx});
                }
                out.push_back(over(trailing_, idx));
                break;
            case WindowMode::Batch:
                if (spec_.by_count) {
                    trailing_.push_back({sample, idx});
                    if (static_cast<std::int64_t>(trailing_.size()) == spec_.width) {
                        out.push_back(over(trailing_, idx));
                        trailing_.clear();
                    }
                } else {
                    close_due(now, out);
                    if (!block_start_) block_start_ = origin_.value_or(now);
                    // jump over empty blocks
                    if (now >= *block_start_ + spec_.width) {
                        *block_start_ += ((now - *block_start_) / spec_.width) * spec_.width;
                    }
                    trailing_.push_back({sample, idx});
                }
                break;
            case WindowMode::Latest:
                if (spec_.by_count) {
                    trailing_.push_back({sample, idx});
                    while (static_cast<std::int64_t>(trailing_.size()) > spec_.width) trailing_.pop_front();
                    std::map<std::string, Entry> newest;
                    for (const auto& e : trailing_) newest[e.sample.source] = e;
                    out.push_back(over_sources(newest, idx));
                } else {
                    if (spec_.width > 0) {
                        for (auto it = latest_.begin(); it != latest_.end();) {
                            it = now - it->second.sample.timestamp >= spec_.width ? latest_.erase(it) : std::next(it);
                        }
                    }
                    latest_[sample.source] = Entry{sample, idx};
                    out.push_back(over_sources(latest_, idx));
                }
                break;
        }
        return out;
    }

    std::vector<WindowCandidate> advance(Timestamp now) {
        std::vector<WindowCandidate> out;
        if (spec_.mode == lang::WindowMode::Batch && !spec_.by_count) close_due(now, out);
        return out;
    }

    void reset(std::optional<Timestamp> origin = std::nullopt) {
        trailing_.clear();
        latest_.clear();
        block_start_.reset();
        origin_ = origin;
    }

    std::size_t size() const { return trailing_.size() + latest_.size(); }

  private:
    struct Entry {
        WindowSample sample;
        std::size_t arrival = 0;
    };

    void close_due(Timestamp now, std::vector<WindowCandidate>& out) {
        if (!block_start_) {
            if (!origin_) return;
            block_start_ = origin_;
        }
        if (now < *block_start_ + spec_.width) return;
        if (!trailing_.empty()) {
            out.push_back(over(trailing_, trailing_.back().arrival));
            trailing_.clear();
        }
        *block_start_ += ((now - *block_start_) / spec_.width) * spec_.width;
    }

    WindowCandidate over(const std::deque<Entry>& entries, std::size_t trigger) const {
        std::vector<double> values;
        values.reserve(entries.size());
        Timestamp newest = entries.front().sample.timestamp;
        for (const auto& e : entries) {
            values.push_back(e.sample.value);
            newest = std::max(newest, e.sample.timestamp);
        }
        return WindowCandidate{newest, fold(spec_.fn, values), values.size(), trigger};
    }

    WindowCandidate over_sources(const std::map<std::string, Entry>& by_source, std::size_t trigger) const {
        std::vector<const Entry*> ordered;
        for (const auto& [_, e] : by_source) ordered.push_back(&e);
        std::sort(ordered.begin(), ordered.end(), [](const Entry* a, const Entry* b) { return a->arrival < b->arrival; });
        std::deque<Entry> entries;
        for (const auto* e : ordered) entries.push_back(*e);
        return over(entries, trigger);
    }

    WindowSpec spec_;
    std::optional<Timestamp> origin_;
    std::deque<Entry> trailing_;
    std::map<std::string, Entry> latest_;
    std::optional<Timestamp> block_start_;
    std::size_t arrivals_ = 0;
};

struct WindowEmission {
    Timestamp time = 0;
    double value = 0;
    std::size_t count = 0;
    bool passes = true;  // HAVING verdict
};

/// Pure kernel over a time-ordered sample list: every candidate the window
/// produces, each tagged with the HAVING verdict. Batch time blocks are
/// aligned to `origin`, or to the first sample when absent; a trailing block
/// is closed only if `close_at` reaches its end.
inline std::vector<WindowEmission> window_aggregate(const std::vector<WindowSample>& samples, const WindowSpec& spec,
                                                    const std::function<bool(double)>& having = {},
                                                    std::optional<Timestamp> origin = std::nullopt,
                                                    std::optional<Timestamp> close_at = std::nullopt) {
    if (!origin && !samples.empty()) origin = samples.front().timestamp;
    WindowState state(spec, origin);
    std::vector<WindowEmission> out;
    auto emit = [&](const std::vector<WindowCandidate>& cands) {
        for (const auto& c : cands) out.push_back({c.time, c.value, c.count, !having || having(c.value)});
    };
    for (const auto& s : samples) emit(state.push(s));
    if (close_at) emit(state.advance(*close_at));
    return out;
}

}  // namespace gridcep::cep
