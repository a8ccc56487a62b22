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
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "gridcep/bgp.hpp"
#include "gridcep/event.hpp"
#include "gridcep/format.hpp"
#include "gridcep/ontology.hpp"
#include "gridcep/parser.hpp"
#include "gridcep/pattern_ast.hpp"

namespace gridcep::lang {

// ---------------------------------------------------------------------------
// Taxonomy and life cycle

enum class EndUse { Monitoring, Prediction, Curtailment };

inline std::string_view to_string(EndUse e) {
    switch (e) {
        case EndUse::Monitoring: return "monitoring";
        case EndUse::Prediction: return "prediction";
        case EndUse::Curtailment: return "curtailment";
    }
    return "monitoring";
}

enum class LifecycleKind { Persistent, Scheduled, OnDemand };

inline std::string_view to_string(LifecycleKind k) {
    switch (k) {
        case LifecycleKind::Persistent: return "persistent";
        case LifecycleKind::Scheduled: return "scheduled";
        case LifecycleKind::OnDemand: return "on_demand";
    }
    return "persistent";
}

/// Daily windows are seconds-of-day in UTC, half-open; a window whose end
/// precedes its start wraps midnight. Absolute windows are half-open epoch
/// ranges.
struct Schedule {
    struct Daily {
        std::int64_t start = 0;
        std::int64_t end = 0;
        friend bool operator==(const Daily&, const Daily&) = default;
    };
    struct Absolute {
        Timestamp start = 0;
        Timestamp end = 0;
        friend bool operator==(const Absolute&, const Absolute&) = default;
    };
    std::vector<Daily> daily;
    std::vector<Absolute> absolute;

    bool empty() const { return daily.empty() && absolute.empty(); }

    bool contains(Timestamp t) const {
        auto tod = ((t % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay;
        for (const auto& d : daily) {
            if (d.start <= d.end ? (tod >= d.start && tod < d.end) : (tod >= d.start || tod < d.end)) return true;
        }
        for (const auto& a : absolute) {
            if (t >= a.start && t < a.end) return true;
        }
        return false;
    }

    std::string to_text() const {
        auto hhmm = [](std::int64_t s) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "%02d:%02d", static_cast<int>(s / 3600), static_cast<int>(s / 60 % 60));
            return std::string(buf);
        };
        std::string out;
        for (const auto& d : daily) {
            if (!out.empty()) out += ", ";
            out += "daily " + hhmm(d.start) + "-" + hhmm(d.end);
        }
        for (const auto& a : absolute) {
            if (!out.empty()) out += ", ";
            out += std::to_string(a.start) + "-" + std::to_string(a.end);
        }
        return out;
    }

    friend bool operator==(const Schedule&, const Schedule&) = default;
};

/// `daily HH:MM-HH:MM` and `<epoch>-<epoch>` items, comma separated.
inline Schedule parse_schedule(std::string_view text) {
    Schedule sched;
    auto clock = [&](const std::string& s) -> std::int64_t {
        int h = 0, m = 0;
        char colon = 0;
        std::istringstream in(s);
        if (!(in >> h >> colon >> m) || colon != ':' || h < 0 || h > 24 || m < 0 || m > 59) {
            throw Error(ErrorCode::InvalidArgument, s, "expected HH:MM");
        }
        return h * 3600 + m * 60;
    };
    std::string item;
    std::istringstream items{std::string(text)};
    while (std::getline(items, item, ',')) {
        auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
        auto dash = item.rfind('-');
        if (dash == std::string::npos) throw Error(ErrorCode::InvalidArgument, item, "expected a range");
        if (item.rfind("daily", 0) == 0) {
            auto range = item.substr(5);
            auto d = range.find('-');
            auto start = range.substr(0, d);
            auto end = range.substr(d + 1);
            sched.daily.push_back({clock(start.substr(start.find_first_not_of(' '))), clock(end)});
        } else {
            sched.absolute.push_back(
                {static_cast<Timestamp>(parse_number(item.substr(0, dash))), static_cast<Timestamp>(parse_number(item.substr(dash + 1)))});
        }
    }
    return sched;
}

struct Lifecycle {
    LifecycleKind kind = LifecycleKind::Persistent;
    Schedule schedule;
    friend bool operator==(const Lifecycle&, const Lifecycle&) = default;
};

/// A reference to a numeric attribute of an event variable, by slot index.
struct SlotAttr {
    int slot = -1;
    std::string attr;
    friend bool operator==(const SlotAttr&, const SlotAttr&) = default;
};

/// One feature from each of the six top-level taxonomy dimensions.
struct Taxonomy {
    EndUse end_use = EndUse::Monitoring;
    std::string end_use_detail;                // e.g. "demand", "shave"
    std::string spatial = "physical";          // physical | virtual | none
    std::string frequency;                     // e.g. "sliding/300s"
    bool positive_latency = false;
    std::optional<SlotAttr> consequence;       // attribute holding the consequence time
    std::string latency_text = "zero";         // "zero" or "positive(?c.schedule)"
    std::string representation = "semantic";   // semantic | syntactic
    Lifecycle lifecycle;
    std::string adaptivity = "static";         // static | evolving
};

// ---------------------------------------------------------------------------
// Compiled plans

struct Operand {
    enum class Kind { Constant, Attribute, Alias } kind = Kind::Constant;
    double constant = 0;
    SlotAttr ref;
};

struct CompiledExpr {
    std::vector<std::pair<double, Operand>> terms;  // coefficient (+1/-1) and operand
};

/// Numeric condition over bound events. Any missing attribute makes the
/// condition false.
struct CompiledCondition {
    CompiledExpr lhs;
    RelOp op = RelOp::Lt;
    CompiledExpr rhs;

    /// `lookup(slot, attr)` returns the attribute value of the event bound
    /// to `slot`; `alias` is the aggregate value for HAVING.
    template <typename Lookup>
    bool eval(Lookup&& lookup, std::optional<double> alias = std::nullopt) const {
        auto side = [&](const CompiledExpr& e) -> std::optional<double> {
            double acc = 0;
            for (const auto& [coef, op] : e.terms) {
                double v = 0;
                switch (op.kind) {
                    case Operand::Kind::Constant: v = op.constant; break;
                    case Operand::Kind::Alias:
                        if (!alias) return std::nullopt;
                        v = *alias;
                        break;
                    case Operand::Kind::Attribute: {
                        std::optional<double> got = lookup(op.ref.slot, op.ref.attr);
                        if (!got) return std::nullopt;
                        v = *got;
                        break;
                    }
                }
                acc += coef * v;
            }
            return acc;
        };
        auto l = side(lhs);
        auto r = side(rhs);
        return l && r && compare(*l, op, *r);
    }
};

struct VariableSlice {
    std::string var;
    std::string stream;
    std::vector<TriplePattern> patterns;  // expanded, with the event variable still a variable
};

struct FilterPlan {};

struct SeqPlan {
    int first = 0;
    int second = 1;
    std::vector<CompiledCondition> first_guard;
    std::vector<CompiledCondition> second_guard;
    std::int64_t within = 0;
};

struct JoinPlan {
    int left = 0;
    int right = 1;
    std::vector<CompiledCondition> on;
    std::int64_t left_retention = 0;
    std::int64_t right_retention = 0;
};

struct AggregatePlan {
    AggFn fn = AggFn::Avg;
    int over = 0;
    std::string value_attribute;
    WindowMode mode = WindowMode::Latest;
    bool by_count = false;
    std::int64_t width = 0;  // seconds or events; 0 = unbounded
    std::string alias;
    std::optional<CompiledCondition> having;
};

using Plan = std::variant<FilterPlan, SeqPlan, JoinPlan, AggregatePlan>;

struct PatternMeta {
    std::string id;
    std::optional<EndUse> end_use;
    std::string end_use_detail;
    Lifecycle lifecycle;
    std::string adaptivity = "static";
};

struct ValidateOptions {
    /// Per-side JOIN retention when the ON conditions do not bound it.
    std::int64_t default_join_retention = 3600;
};

/// A validated pattern: AST, taxonomy tags, per-variable semantic slices and
/// the operator plan. Immutable and shareable.
struct CheckedPattern {
    std::string id;
    PatternAst ast;
    Taxonomy tags;
    std::vector<VariableSlice> slices;     // index = slot
    std::vector<std::string> shared_vars;  // non-event variables appearing in more than one slice
    Plan plan;

    int slot_of(const std::string& var) const {
        for (std::size_t i = 0; i < slices.size(); ++i) {
            if (slices[i].var == var) return static_cast<int>(i);
        }
        return -1;
    }

    std::string text() const { return ast.raw_text.empty() ? format_pattern(ast) : ast.raw_text; }
};

inline EndUse parse_end_use(const std::string& text, std::string* detail = nullptr) {
    auto slash = text.find('/');
    auto head = text.substr(0, slash);
    if (detail) *detail = slash == std::string::npos ? "" : text.substr(slash + 1);
    if (head == "monitoring") return EndUse::Monitoring;
    if (head == "prediction") return EndUse::Prediction;
    if (head == "curtailment") return EndUse::Curtailment;
    throw Error(ErrorCode::InvalidArgument, text, "end_use must be monitoring, prediction or curtailment");
}

inline Lifecycle parse_lifecycle(const std::string& kind, const std::string& schedule) {
    Lifecycle lc;
    if (kind.empty() || kind == "persistent") {
        lc.kind = LifecycleKind::Persistent;
    } else if (kind == "scheduled") {
        lc.kind = LifecycleKind::Scheduled;
    } else if (kind == "on_demand" || kind == "on-demand") {
        lc.kind = LifecycleKind::OnDemand;
    } else {
        throw Error(ErrorCode::InvalidArgument, kind, "lifecycle must be persistent, scheduled or on_demand");
    }
    if (!schedule.empty()) lc.schedule = parse_schedule(schedule);
    if (lc.kind == LifecycleKind::Scheduled && lc.schedule.empty()) {
        throw Error(ErrorCode::InvalidArgument, kind, "scheduled lifecycle needs @schedule");
    }
    return lc;
}

inline PatternMeta meta_from_entry(const PatternFileEntry& entry) {
    PatternMeta meta;
    meta.id = entry.get("id");
    if (meta.id.empty()) throw Error(ErrorCode::InvalidArgument, "@id", "pattern block without @id");
    auto eu = entry.get("end_use");
    if (!eu.empty()) meta.end_use = parse_end_use(eu, &meta.end_use_detail);
    meta.lifecycle = parse_lifecycle(entry.get("lifecycle"), entry.get("schedule"));
    meta.adaptivity = entry.get("adaptivity", "static");
    return meta;
}

namespace detail {

class Validator {
  public:
    Validator(const PatternAst& ast, const Ontology& onto, const SchemaRegistry& schemas, const ValidateOptions& opts)
        : ast_(ast), onto_(onto), schemas_(schemas), opts_(opts) {}

    CheckedPattern run(const PatternMeta& meta) {
        if (!meta.end_use) throw Error(ErrorCode::InvalidArgument, meta.id, "end_use must be supplied");
        CheckedPattern out;
        out.id = meta.id;
        out.ast = ast_;
        declare_variables(out);
        build_slices(out);
        out.plan = compile_plan(out);
        check_select();
        out.tags = taxonomy(meta, out);
        return out;
    }

  private:
    void declare_variables(CheckedPattern& out) {
        for (const auto& clause : ast_.from) {
            const auto& schema = schemas_.get(clause.stream);
            for (const auto& v : clause.vars) {
                if (stream_of_.count(v)) throw Error(ErrorCode::InvalidArgument, "?" + v, "declared more than once");
                stream_of_[v] = &schema;
                slot_[v] = static_cast<int>(out.slices.size());
                out.slices.push_back(VariableSlice{v, clause.stream, {}});
            }
        }
    }

    Term expand(const PatternTerm& t) const {
        if (t.is_var) return Term::make_var(t.text);
        try {
            return Term::make_iri(onto_.namespaces().expand(t.text));
        } catch (const Error&) {
            throw Error(ErrorCode::UnresolvedQName, t.text);
        }
    }

    // Each event variable gets the triple patterns reachable from it through
    // non-event variables, never crossing into another event variable.
    void build_slices(CheckedPattern& out) {
        std::vector<TriplePattern> tps;
        std::vector<std::set<std::string>> evars(ast_.where.size());
        std::vector<std::set<std::string>> others(ast_.where.size());
        for (std::size_t i = 0; i < ast_.where.size(); ++i) {
            const auto& tp = ast_.where[i];
            tps.push_back(Triple{expand(tp.subject), expand(tp.predicate), expand(tp.object)});
            for (const auto* term : {&tp.subject, &tp.predicate, &tp.object}) {
                if (!term->is_var) continue;
                (stream_of_.count(term->text) ? evars[i] : others[i]).insert(term->text);
            }
            if (evars[i].size() > 1) {
                throw Error(ErrorCode::InvalidArgument, "?" + *evars[i].begin() + " ?" + *evars[i].rbegin(),
                            "a triple pattern may mention only one event variable");
            }
        }
        // variables mentioned next to an event variable belong to it; growth
        // from another slice stops there
        std::map<std::string, std::set<std::string>> owners;
        for (std::size_t i = 0; i < tps.size(); ++i) {
            for (const auto& v : others[i]) owners[v].insert(evars[i].begin(), evars[i].end());
        }
        auto foreign = [&](std::size_t i, const std::string& self) {
            return std::any_of(others[i].begin(), others[i].end(), [&](const std::string& v) {
                const auto& o = owners[v];
                return !o.empty() && !o.count(self);
            });
        };
        std::vector<bool> reached_any(tps.size(), false);
        std::map<std::string, int> var_slices;
        for (auto& slice : out.slices) {
            std::vector<bool> in(tps.size(), false);
            std::set<std::string> frontier;
            bool grew = true;
            for (std::size_t i = 0; i < tps.size(); ++i) {
                if (evars[i].count(slice.var)) {
                    in[i] = true;
                    frontier.insert(others[i].begin(), others[i].end());
                }
            }
            while (grew) {
                grew = false;
                for (std::size_t i = 0; i < tps.size(); ++i) {
                    if (in[i] || !evars[i].empty() || foreign(i, slice.var)) continue;
                    bool touches = std::any_of(others[i].begin(), others[i].end(),
                                               [&](const std::string& v) { return frontier.count(v) > 0; });
                    if (touches) {
                        in[i] = true;
                        frontier.insert(others[i].begin(), others[i].end());
                        grew = true;
                    }
                }
            }
            for (std::size_t i = 0; i < tps.size(); ++i) {
                if (in[i]) {
                    slice.patterns.push_back(tps[i]);
                    reached_any[i] = true;
                }
            }
            for (const auto& v : frontier) var_slices[v]++;
        }
        // constraints not connected to any event variable apply to every slice
        for (std::size_t i = 0; i < tps.size(); ++i) {
            if (reached_any[i]) continue;
            for (auto& slice : out.slices) slice.patterns.push_back(tps[i]);
        }
        for (const auto& [v, n] : var_slices) {
            if (n > 1) out.shared_vars.push_back(v);
        }
    }

    void check_select() const {
        for (const auto& p : ast_.select) {
            if (p.is_var) {
                if (!stream_of_.count(p.name)) throw Error(ErrorCode::UndeclaredVariable, "?" + p.name);
            } else if (!alias_ || *alias_ != p.name) {
                throw Error(ErrorCode::UndeclaredVariable, p.name, "projection is not an aggregate alias");
            }
        }
    }

    int slot(const std::string& var) const {
        auto it = slot_.find(var);
        if (it == slot_.end()) throw Error(ErrorCode::UndeclaredVariable, "?" + var);
        return it->second;
    }

    // Context for resolving atoms: `own` is the slot a bare identifier refers
    // to (-1: none), `allowed` the slots that may be referenced explicitly.
    struct Scope {
        int own = -1;
        std::set<int> allowed;
        bool alias = false;
        std::string where;
    };

    Operand operand(const Atom& atom, const Scope& scope) {
        Operand op;
        if (const auto* d = std::get_if<double>(&atom)) {
            op.kind = Operand::Kind::Constant;
            op.constant = *d;
            return op;
        }
        if (const auto* v = std::get_if<VarRef>(&atom)) {
            slot(v->var);
            throw Error(ErrorCode::UnknownAttribute, "?" + v->var, "a variable needs an attribute in " + scope.where);
        }
        const auto& ref = std::get<AttrRef>(atom);
        if (ref.var.empty()) {
            if (scope.alias && alias_ && ref.attr == *alias_) {
                op.kind = Operand::Kind::Alias;
                return op;
            }
            if (scope.own < 0) throw Error(ErrorCode::UnknownAttribute, ref.attr, "unqualified name in " + scope.where);
            return attribute(scope.own, ref.attr);
        }
        int s = slot(ref.var);
        if (!scope.allowed.count(s)) {
            throw Error(ErrorCode::UndeclaredVariable, "?" + ref.var, "not visible in " + scope.where);
        }
        return attribute(s, ref.attr);
    }

    Operand attribute(int s, const std::string& attr) {
        const auto& var = slot_name(s);
        const auto* schema = stream_of_.at(var);
        const auto* spec = schema->attribute(attr);
        if (!spec) throw Error(ErrorCode::UnknownAttribute, "?" + var + "." + attr, "not in stream " + schema->stream_id);
        if (!spec->numeric()) {
            throw Error(ErrorCode::UnknownAttribute, "?" + var + "." + attr, "attribute is not numeric");
        }
        if (spec->future && !consequence_) consequence_ = SlotAttr{s, attr};
        Operand op;
        op.kind = Operand::Kind::Attribute;
        op.ref = SlotAttr{s, attr};
        return op;
    }

    const std::string& slot_name(int s) const {
        for (const auto& [name, idx] : slot_) {
            if (idx == s) return name;
        }
        throw Error(ErrorCode::UndeclaredVariable, std::to_string(s));
    }

    CompiledExpr expr(const Expr& e, const Scope& scope) {
        CompiledExpr out;
        out.terms.emplace_back(1.0, operand(e.first, scope));
        for (const auto& [op, atom] : e.rest) out.terms.emplace_back(op == ArithOp::Plus ? 1.0 : -1.0, operand(atom, scope));
        return out;
    }

    CompiledCondition condition(const Condition& c, const Scope& scope) {
        return CompiledCondition{expr(c.lhs, scope), c.op, expr(c.rhs, scope)};
    }

    std::vector<CompiledCondition> conditions(const std::vector<Condition>& cs, const Scope& scope) {
        std::vector<CompiledCondition> out;
        for (const auto& c : cs) out.push_back(condition(c, scope));
        return out;
    }

    void require_all_used(const std::set<int>& used, const CheckedPattern& out) const {
        for (const auto& slice : out.slices) {
            if (!used.count(slot(slice.var))) {
                throw Error(ErrorCode::InvalidArgument, "?" + slice.var, "event variable is not used by the operator");
            }
        }
    }

    Plan compile_plan(const CheckedPattern& out) {
        if (!ast_.cep) return FilterPlan{};
        return std::visit([&](const auto& node) { return compile(node, out); }, *ast_.cep);
    }

    Plan compile(const SeqExpr& s, const CheckedPattern& out) {
        SeqPlan plan;
        plan.first = slot(s.first.var);
        plan.second = slot(s.second.var);
        if (plan.first == plan.second) throw Error(ErrorCode::InvalidArgument, "?" + s.first.var, "SEQ needs two variables");
        require_all_used({plan.first, plan.second}, out);
        plan.first_guard = conditions(s.first.guard, Scope{plan.first, {plan.first}, false, "the first SEQ term"});
        plan.second_guard =
            conditions(s.second.guard, Scope{plan.second, {plan.first, plan.second}, false, "the second SEQ term"});
        plan.within = s.within.seconds();
        if (plan.within <= 0) throw Error(ErrorCode::InvalidArgument, to_string(s.within), "within must be positive");
        return plan;
    }

    Plan compile(const JoinExpr& j, const CheckedPattern& out) {
        JoinPlan plan;
        plan.left = slot(j.left);
        plan.right = slot(j.right);
        if (plan.left == plan.right) throw Error(ErrorCode::InvalidArgument, "?" + j.left, "JOIN needs two variables");
        require_all_used({plan.left, plan.right}, out);
        plan.on = conditions(j.on, Scope{-1, {plan.left, plan.right}, false, "ON"});
        plan.left_retention = opts_.default_join_retention;
        plan.right_retention = opts_.default_join_retention;
        for (const auto& c : plan.on) derive_retention(c, plan);
        return plan;
    }

    // A condition equivalent to `A.x - B.timestamp < K`, where A.x is A's own
    // timestamp or an attribute never earlier than it, means a later A can
    // only match a B younger than K; B's retention shrinks to K.
    void derive_retention(const CompiledCondition& c, JoinPlan& plan) const {
        if (c.op == RelOp::Ne) return;
        std::vector<double> signs;
        if (c.op == RelOp::Lt || c.op == RelOp::Le || c.op == RelOp::Eq) signs.push_back(1.0);
        if (c.op == RelOp::Gt || c.op == RelOp::Ge || c.op == RelOp::Eq) signs.push_back(-1.0);
        for (double sign : signs) {
            std::map<std::pair<int, std::string>, double> coef;
            double constant = 0;
            auto add = [&](const CompiledExpr& e, double s) {
                for (const auto& [k, op] : e.terms) {
                    if (op.kind == Operand::Kind::Constant) {
                        constant += s * k * op.constant;
                    } else if (op.kind == Operand::Kind::Attribute) {
                        coef[{op.ref.slot, op.ref.attr}] += s * k;
                    }
                }
            };
            add(c.lhs, sign);
            add(c.rhs, -sign);
            std::vector<std::pair<std::pair<int, std::string>, double>> terms;
            for (const auto& kv : coef) {
                if (kv.second != 0) terms.push_back(kv);
            }
            if (terms.size() != 2) continue;
            const auto* pos = terms[0].second == 1.0 ? &terms[0] : terms[1].second == 1.0 ? &terms[1] : nullptr;
            const auto* neg = terms[0].second == -1.0 ? &terms[0] : terms[1].second == -1.0 ? &terms[1] : nullptr;
            if (!pos || !neg || pos->first.first == neg->first.first) continue;
            if (neg->first.second != "timestamp") continue;
            const auto* spec = stream_of_.at(slot_name(pos->first.first))->attribute(pos->first.second);
            bool not_before_own_time = pos->first.second == "timestamp" || (spec && spec->future);
            if (!not_before_own_time) continue;
            auto bound = static_cast<std::int64_t>(std::max(0.0, -constant));
            auto& retention = neg->first.first == plan.left ? plan.left_retention : plan.right_retention;
            retention = std::min(retention, bound);
        }
    }

    Plan compile(const AggregateExpr& a, const CheckedPattern& out) {
        AggregatePlan plan;
        plan.fn = a.fn;
        plan.over = slot(a.over);
        plan.alias = a.alias;
        alias_ = a.alias;
        require_all_used({plan.over}, out);
        const auto* schema = stream_of_.at(a.over);
        if (a.fn != AggFn::Count) {
            if (schema->value_attribute.empty()) {
                throw Error(ErrorCode::UnknownAttribute, schema->stream_id, "stream has no value attribute to aggregate");
            }
            plan.value_attribute = schema->value_attribute;
        }
        if (a.window) {
            const auto& w = *a.window;
            if (slot(w.var) != plan.over) {
                throw Error(ErrorCode::InvalidArgument, "?" + w.var, "window must be over the aggregated variable");
            }
            plan.mode = w.mode;
            plan.by_count = w.by_count();
            plan.width = plan.by_count ? std::get<std::int64_t>(w.width) : std::get<Duration>(w.width).seconds();
            if (plan.width <= 0) throw Error(ErrorCode::InvalidArgument, "WINDOW", "width must be positive");
        } else {
            plan.mode = WindowMode::Latest;
            plan.by_count = false;
            plan.width = 0;
        }
        if (a.having) plan.having = condition(*a.having, Scope{-1, {}, true, "HAVING"});
        return plan;
    }

    Taxonomy taxonomy(const PatternMeta& meta, const CheckedPattern& out) const {
        Taxonomy t;
        t.end_use = *meta.end_use;
        t.end_use_detail = meta.end_use_detail;
        t.lifecycle = meta.lifecycle;
        t.adaptivity = meta.adaptivity;
        t.representation = ast_.where.empty() ? "syntactic" : "semantic";

        bool virtual_space = false;
        for (const auto& tp : ast_.where) {
            for (const auto* term : {&tp.subject, &tp.predicate, &tp.object}) {
                if (term->is_var) continue;
                auto full = onto_.namespaces().expand(term->text);
                if (full == iri::bd("belongsTo") || full.rfind(std::string(iri::kOrg), 0) == 0) virtual_space = true;
            }
        }
        t.spatial = ast_.where.empty() ? "none" : virtual_space ? "virtual" : "physical";

        std::visit(
            [&](const auto& plan) {
                using P = std::decay_t<decltype(plan)>;
                if constexpr (std::is_same_v<P, AggregatePlan>) {
                    if (plan.width == 0) {
                        t.frequency = "latest/per-source";
                    } else {
                        t.frequency = std::string(to_string(plan.mode)) + "/" + std::to_string(plan.width) +
                                      (plan.by_count ? "events" : "s");
                    }
                } else if constexpr (std::is_same_v<P, SeqPlan>) {
                    t.frequency = "per-event/within " + std::to_string(plan.within) + "s";
                } else {
                    t.frequency = "per-event";
                }
            },
            out.plan);

        if (consequence_) {
            t.positive_latency = true;
            t.consequence = consequence_;
            t.latency_text = "positive(?" + out.slices[static_cast<std::size_t>(consequence_->slot)].var + "." +
                             consequence_->attr + ")";
        }
        if (t.end_use == EndUse::Prediction && !t.positive_latency) {
            throw Error(ErrorCode::InvalidArgument, meta.id, "prediction pattern must reference a future timestamp");
        }
        if (t.end_use == EndUse::Monitoring && t.positive_latency) {
            throw Error(ErrorCode::InvalidArgument, meta.id, "monitoring pattern cannot have positive latency");
        }
        return t;
    }

    const PatternAst& ast_;
    const Ontology& onto_;
    const SchemaRegistry& schemas_;
    const ValidateOptions& opts_;
    std::map<std::string, const StreamSchema*> stream_of_;
    std::map<std::string, int> slot_;
    std::optional<std::string> alias_;
    std::optional<SlotAttr> consequence_;
};

}  // namespace detail

/// Checks a parsed pattern against the ontology and stream schemas and
/// compiles it. Throws UnknownStream, UndeclaredVariable, UnknownAttribute
/// or UnresolvedQName naming the offending token.
inline CheckedPattern validate(const PatternAst& ast, const Ontology& ontology, const SchemaRegistry& schemas,
                               const PatternMeta& meta, const ValidateOptions& opts = {}) {
    detail::Validator v(ast, ontology, schemas, opts);
    return v.run(meta);
}

/// Parses and validates every block of a pattern file.
inline std::vector<CheckedPattern> load_pattern_file(std::string_view content, const Ontology& ontology,
                                                     const SchemaRegistry& schemas, const ValidateOptions& opts = {}) {
    std::vector<CheckedPattern> out;
    for (const auto& entry : parse_pattern_file(content)) {
        PatternAst ast;
        try {
            ast = parse_pattern(entry.text);
        } catch (const SyntaxError& e) {
            throw SyntaxError(e.line() + entry.first_line - 1, e.column(), e.subject(), e.expected());
        }
        out.push_back(validate(ast, ontology, schemas, meta_from_entry(entry), opts));
    }
    return out;
}

}  // namespace gridcep::lang
