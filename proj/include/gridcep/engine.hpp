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
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gridcep/bgp.hpp"
#include "gridcep/detection.hpp"
#include "gridcep/event.hpp"
#include "gridcep/validate.hpp"
#include "gridcep/window.hpp"

namespace gridcep::cep {

enum class PatternStatus { Active, Inactive };

inline std::string_view to_string(PatternStatus s) { return s == PatternStatus::Active ? "active" : "inactive"; }

struct StatusChange {
    std::string pattern_id;
    PatternStatus status = PatternStatus::Inactive;
    Timestamp time = 0;

    friend bool operator==(const StatusChange&, const StatusChange&) = default;
};

struct TickResult {
    std::vector<StatusChange> changes;
    std::vector<Detection> detections;
};

/// Executes checked patterns over the globally ordered event stream.
///
/// Each event is lifted once and, for every active pattern that binds its
/// stream, checked against the variable's semantic slice; events that match
/// are fed to the pattern's operator. Detections are appended to the log in
/// registration order, then binding order.
///
/// Single-threaded: callers serialize ingest, tick and lifecycle commands.
class Engine {
  public:
    Engine(std::shared_ptr<const Ontology> ontology, std::shared_ptr<const SchemaRegistry> schemas)
        : ontology_(std::move(ontology)), schemas_(std::move(schemas)) {}

    /// Installs a pattern; persistent patterns start active, on-demand ones
    /// inactive, scheduled ones follow their schedule from the next tick.
    /// Re-registering identical text under the same id is a no-op.
    std::string register_pattern(lang::CheckedPattern checked) {
        if (auto* existing = find(checked.id)) {
            if (existing->pattern.text() == checked.text()) return checked.id;
            throw Error(ErrorCode::DuplicateId, checked.id, "already registered with different text");
        }
        auto rt = std::make_unique<Runtime>();
        rt->pattern = std::move(checked);
        switch (rt->pattern.tags.lifecycle.kind) {
            case lang::LifecycleKind::Persistent: rt->status = PatternStatus::Active; break;
            case lang::LifecycleKind::OnDemand: rt->status = PatternStatus::Inactive; break;
            case lang::LifecycleKind::Scheduled:
                if (now_) {
                    rt->schedule_known = true;
                    rt->in_schedule = rt->pattern.tags.lifecycle.schedule.contains(*now_);
                    rt->status = rt->in_schedule ? PatternStatus::Active : PatternStatus::Inactive;
                }
                break;
        }
        auto id = rt->pattern.id;
        if (rt->status == PatternStatus::Active) reset(*rt);
        order_.push_back(id);
        patterns_[id] = std::move(rt);
        return id;
    }

    /// Swaps the definition behind an id at run time; operator state restarts.
    void replace_pattern(lang::CheckedPattern checked) {
        auto& rt = get(checked.id);
        rt.pattern = std::move(checked);
        rt.pattern.tags.adaptivity = "evolving";
        if (rt.status == PatternStatus::Active) reset(rt);
    }

    PatternStatus activate(const std::string& id) {
        auto& rt = get(id);
        if (rt.status == PatternStatus::Active) return rt.status;
        rt.status = PatternStatus::Active;
        reset(rt);
        return rt.status;
    }

    PatternStatus deactivate(const std::string& id) {
        auto& rt = get(id);
        rt.status = PatternStatus::Inactive;
        clear(rt);
        return rt.status;
    }

    PatternStatus status(const std::string& id) const { return get(id).status; }

    bool has_pattern(const std::string& id) const { return patterns_.count(id) > 0; }

    const lang::CheckedPattern& pattern(const std::string& id) const { return get(id).pattern; }

    /// Pattern ids in registration order.
    const std::vector<std::string>& pattern_ids() const { return order_; }

    std::optional<Timestamp> now() const { return now_; }

    /// Advances the clock: flips scheduled patterns at schedule boundaries and
    /// closes batch blocks that are due. Throws InvalidArgument when time goes
    /// backwards.
    TickResult tick(Timestamp t) {
        if (now_ && t < *now_) {
            throw Error(ErrorCode::InvalidArgument, std::to_string(t), "tick before " + std::to_string(*now_));
        }
        now_ = t;
        TickResult result;
        for (const auto& id : order_) {
            auto& rt = *patterns_.at(id);
            if (rt.pattern.tags.lifecycle.kind == lang::LifecycleKind::Scheduled) {
                bool in = rt.pattern.tags.lifecycle.schedule.contains(t);
                if (!rt.schedule_known || in != rt.in_schedule) {
                    rt.schedule_known = true;
                    rt.in_schedule = in;
                    auto wanted = in ? PatternStatus::Active : PatternStatus::Inactive;
                    if (wanted != rt.status) {
                        in ? activate(id) : deactivate(id);
                        result.changes.push_back({id, wanted, t});
                    }
                }
            }
            if (rt.status != PatternStatus::Active) continue;
            ensure_origin(rt);
            if (rt.window) {
                auto cands = rt.window->advance(t);
                emit_aggregate(rt, cands, std::nullopt, result.detections);
            }
        }
        append(result.detections);
        return result;
    }

    /// Feeds one event in merged order. Throws OutOfOrder when the event is
    /// older than the engine clock or repeats a stream sequence number.
    std::vector<Detection> ingest(const Event& event) {
        if (now_ && event.timestamp < *now_) {
            throw Error(ErrorCode::OutOfOrder, event.stream_id + "/" + std::to_string(event.seq),
                        "timestamp " + std::to_string(event.timestamp) + " before " + std::to_string(*now_));
        }
        if (auto it = last_seq_.find(event.stream_id); it != last_seq_.end() && event.seq <= it->second) {
            throw Error(ErrorCode::OutOfOrder, event.stream_id + "/" + std::to_string(event.seq), "sequence number not increasing");
        }
        const auto& schema = schemas_->get(event.stream_id);
        auto lifted = lift_event(event, schema, *ontology_);
        last_seq_[event.stream_id] = event.seq;
        now_ = event.timestamp;

        auto shared = std::make_shared<const Event>(event);
        std::vector<Detection> out;
        BgpMatcher matcher(*ontology_, lifted);
        for (const auto& id : order_) {
            auto& rt = *patterns_.at(id);
            if (rt.status != PatternStatus::Active) continue;
            ensure_origin(rt);
            const auto& slices = rt.pattern.slices;
            std::vector<std::optional<Qualified>> by_slot(slices.size());
            bool any = false;
            for (std::size_t s = 0; s < slices.size(); ++s) {
                if (slices[s].stream != event.stream_id) continue;
                Solution seed{{slices[s].var, Term::make_iri(event_iri(event))}};
                auto rows = matcher.evaluate(slices[s].patterns, seed, rt.pattern.shared_vars);
                if (rows.empty()) continue;
                by_slot[s] = Qualified{shared, std::move(rows)};
                any = true;
            }
            if (any) feed(rt, by_slot, out);
        }
        append(out);
        return out;
    }

    /// Append-only detection log.
    const std::vector<Detection>& detections() const { return log_; }

  private:
    struct Qualified {
        std::shared_ptr<const Event> event;
        std::set<std::vector<Term>> shared;  // projections onto the shared variables
    };

    struct Runtime {
        lang::CheckedPattern pattern;
        PatternStatus status = PatternStatus::Inactive;
        bool schedule_known = false;
        bool in_schedule = false;
        std::optional<Timestamp> origin;

        std::deque<Qualified> firsts;  // SEQ candidates
        std::deque<Qualified> lefts;   // JOIN buffers
        std::deque<Qualified> rights;
        std::optional<WindowState> window;
        std::shared_ptr<const Event> last_sample;
    };

    Runtime* find(const std::string& id) {
        auto it = patterns_.find(id);
        return it == patterns_.end() ? nullptr : it->second.get();
    }

    Runtime& get(const std::string& id) {
        auto* rt = find(id);
        if (!rt) throw Error(ErrorCode::UnknownPattern, id);
        return *rt;
    }

    const Runtime& get(const std::string& id) const {
        auto it = patterns_.find(id);
        if (it == patterns_.end()) throw Error(ErrorCode::UnknownPattern, id);
        return *it->second;
    }

    void clear(Runtime& rt) {
        rt.firsts.clear();
        rt.lefts.clear();
        rt.rights.clear();
        rt.window.reset();
        rt.last_sample.reset();
        rt.origin.reset();
    }

    // Activation restarts operator state; batch blocks align to this moment.
    void reset(Runtime& rt) {
        clear(rt);
        rt.origin = now_;
        if (const auto* agg = std::get_if<lang::AggregatePlan>(&rt.pattern.plan)) {
            rt.window.emplace(WindowSpec{agg->fn, agg->mode, agg->by_count, agg->width}, rt.origin);
        }
    }

    void ensure_origin(Runtime& rt) {
        if (rt.origin || !now_) return;
        rt.origin = now_;
        if (rt.window) rt.window->reset(rt.origin);
    }

    void append(std::vector<Detection>& ds) {
        for (auto& d : ds) {
            d.id = log_.size();
            log_.push_back(d);
        }
    }

    static bool compatible(const Qualified& a, const Qualified& b) {
        for (const auto& row : a.shared) {
            if (b.shared.count(row)) return true;
        }
        return false;
    }

    static std::optional<double> attr(const Event& e, const std::string& name) { return e.number(name); }

    Detection make_detection(const Runtime& rt, const std::vector<std::pair<int, const Event*>>& bound,
                             std::optional<double> alias_value) const {
        const auto& p = rt.pattern;
        Detection d;
        d.pattern_id = p.id;
        for (const auto& [slot, ev] : bound) {
            d.detection_time = std::max(d.detection_time, ev->timestamp);
            d.bindings.push_back(BoundEvent{p.slices[static_cast<std::size_t>(slot)].var, ev->stream_id, ev->seq,
                                            ev->source_id, ev->timestamp});
        }
        d.consequence_time = d.detection_time;
        if (p.tags.consequence) {
            for (const auto& [slot, ev] : bound) {
                if (slot != p.tags.consequence->slot) continue;
                if (auto v = ev->number(p.tags.consequence->attr)) d.consequence_time = static_cast<Timestamp>(*v);
            }
        }
        for (const auto& proj : p.ast.select) {
            Output o;
            if (proj.is_var) {
                o.name = "?" + proj.name;
                int slot = p.slot_of(proj.name);
                for (const auto& [s, ev] : bound) {
                    if (s == slot) o.event_iri = event_iri(*ev);
                }
            } else {
                o.name = proj.name;
                o.number = alias_value;
            }
            d.outputs.push_back(std::move(o));
        }
        return d;
    }

    void feed(Runtime& rt, std::vector<std::optional<Qualified>>& by_slot, std::vector<Detection>& out) {
        std::visit([&](const auto& plan) { feed_plan(rt, plan, by_slot, out); }, rt.pattern.plan);
    }

    void feed_plan(Runtime& rt, const lang::FilterPlan&, std::vector<std::optional<Qualified>>& by_slot,
                   std::vector<Detection>& out) {
        for (std::size_t s = 0; s < by_slot.size(); ++s) {
            if (by_slot[s]) keep(rt, make_detection(rt, {{static_cast<int>(s), by_slot[s]->event.get()}}, std::nullopt), out);
        }
    }

    void feed_plan(Runtime& rt, const lang::SeqPlan& plan, std::vector<std::optional<Qualified>>& by_slot,
                   std::vector<Detection>& out) {
        Timestamp now = *now_;
        while (!rt.firsts.empty() && now - rt.firsts.front().event->timestamp > plan.within) rt.firsts.pop_front();

        if (auto& second = by_slot[static_cast<std::size_t>(plan.second)]) {
            const Event& e2 = *second->event;
            for (const auto& first : rt.firsts) {
                const Event& e1 = *first.event;
                if (!(e1.timestamp < e2.timestamp)) continue;
                if (!compatible(first, *second)) continue;
                auto lookup = [&](int slot, const std::string& a) { return attr(slot == plan.first ? e1 : e2, a); };
                bool ok = true;
                for (const auto& c : plan.second_guard) ok = ok && c.eval(lookup);
                if (ok) keep(rt, make_detection(rt, {{plan.first, &e1}, {plan.second, &e2}}, std::nullopt), out);
            }
        }
        if (auto& first = by_slot[static_cast<std::size_t>(plan.first)]) {
            const Event& e1 = *first->event;
            auto lookup = [&](int, const std::string& a) { return attr(e1, a); };
            bool ok = true;
            for (const auto& c : plan.first_guard) ok = ok && c.eval(lookup);
            if (ok) rt.firsts.push_back(*first);
        }
    }

    void feed_plan(Runtime& rt, const lang::JoinPlan& plan, std::vector<std::optional<Qualified>>& by_slot,
                   std::vector<Detection>& out) {
        Timestamp now = *now_;
        auto evict = [now](std::deque<Qualified>& buf, std::int64_t retention) {
            while (!buf.empty() && now - buf.front().event->timestamp > retention) buf.pop_front();
        };
        evict(rt.lefts, plan.left_retention);
        evict(rt.rights, plan.right_retention);

        auto try_pair = [&](const Qualified& l, const Qualified& r) {
            if (!compatible(l, r)) return;
            const Event& el = *l.event;
            const Event& er = *r.event;
            auto lookup = [&](int slot, const std::string& a) { return attr(slot == plan.left ? el : er, a); };
            for (const auto& c : plan.on) {
                if (!c.eval(lookup)) return;
            }
            keep(rt, make_detection(rt, {{plan.left, &el}, {plan.right, &er}}, std::nullopt), out);
        };

        auto& as_left = by_slot[static_cast<std::size_t>(plan.left)];
        auto& as_right = by_slot[static_cast<std::size_t>(plan.right)];
        if (as_left) {
            for (const auto& r : rt.rights) try_pair(*as_left, r);
        }
        if (as_right) {
            for (const auto& l : rt.lefts) try_pair(l, *as_right);
        }
        if (as_left) rt.lefts.push_back(*as_left);
        if (as_right) rt.rights.push_back(*as_right);
    }

    void feed_plan(Runtime& rt, const lang::AggregatePlan& plan, std::vector<std::optional<Qualified>>& by_slot,
                   std::vector<Detection>& out) {
        auto& q = by_slot[static_cast<std::size_t>(plan.over)];
        if (!q || !rt.window) return;
        double value = 1.0;
        if (plan.fn != lang::AggFn::Count) {
            auto v = q->event->number(plan.value_attribute);
            if (!v) return;
            value = *v;
        }
        auto previous = rt.last_sample;
        rt.last_sample = q->event;
        auto cands = rt.window->push(WindowSample{q->event->timestamp, value, q->event->source_id});
        // candidates closed by this arrival belong to the previous sample
        std::vector<std::pair<WindowCandidate, std::shared_ptr<const Event>>> tagged;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            bool own = i + 1 == cands.size() && plan.mode != lang::WindowMode::Batch;
            bool count_block = plan.mode == lang::WindowMode::Batch && plan.by_count;
            tagged.emplace_back(cands[i], own || count_block ? q->event : previous);
        }
        for (const auto& [cand, ev] : tagged) emit_one(rt, plan, cand, ev.get(), out);
    }

    void emit_aggregate(Runtime& rt, const std::vector<WindowCandidate>& cands, std::optional<int>,
                        std::vector<Detection>& out) {
        const auto& plan = std::get<lang::AggregatePlan>(rt.pattern.plan);
        for (const auto& c : cands) emit_one(rt, plan, c, rt.last_sample.get(), out);
    }

    void emit_one(Runtime& rt, const lang::AggregatePlan& plan, const WindowCandidate& cand, const Event* trigger,
                  std::vector<Detection>& out) {
        if (plan.having) {
            auto no_attrs = [](int, const std::string&) -> std::optional<double> { return std::nullopt; };
            if (!plan.having->eval(no_attrs, cand.value)) return;
        }
        std::vector<std::pair<int, const Event*>> bound;
        if (trigger) bound.emplace_back(plan.over, trigger);
        auto d = make_detection(rt, bound, cand.value);
        d.detection_time = cand.time;
        if (!rt.pattern.tags.consequence) d.consequence_time = d.detection_time;
        keep(rt, std::move(d), out);
    }

    // A prediction whose consequence is not ahead of its detection has
    // already come true and is dropped.
    static void keep(const Runtime& rt, Detection d, std::vector<Detection>& out) {
        if (rt.pattern.tags.positive_latency && d.consequence_time <= d.detection_time) return;
        out.push_back(std::move(d));
    }

    std::shared_ptr<const Ontology> ontology_;
    std::shared_ptr<const SchemaRegistry> schemas_;
    std::map<std::string, std::unique_ptr<Runtime>> patterns_;
    std::vector<std::string> order_;
    std::map<std::string, std::uint64_t> last_seq_;
    std::optional<Timestamp> now_;
    std::vector<Detection> log_;
};

}  // namespace gridcep::cep
