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

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gridcep/value.hpp"

namespace gridcep::lang {

/// `?var.attr`, or bare `attr` when `var` is empty.
struct AttrRef {
    std::string var;
    std::string attr;
    friend bool operator==(const AttrRef&, const AttrRef&) = default;
};

/// `?var` on its own inside a condition.
struct VarRef {
    std::string var;
    friend bool operator==(const VarRef&, const VarRef&) = default;
};

/// NUMBER | IDENT | VAR ["." IDENT]. A bare IDENT is kept as AttrRef with an
/// empty variable; its meaning (own attribute or aggregate alias) is decided
/// by the validator.
using Atom = std::variant<double, AttrRef, VarRef>;

enum class ArithOp { Plus, Minus };

struct Expr {
    Atom first;
    std::vector<std::pair<ArithOp, Atom>> rest;
    friend bool operator==(const Expr&, const Expr&) = default;
};

enum class RelOp { Lt, Le, Gt, Ge, Eq, Ne };

struct Condition {
    Expr lhs;
    RelOp op = RelOp::Lt;
    Expr rhs;
    friend bool operator==(const Condition&, const Condition&) = default;
};

/// WHERE-clause term: `?var` or a QName kept as written.
struct PatternTerm {
    bool is_var = false;
    std::string text;  // variable name without '?', or the QName
    friend bool operator==(const PatternTerm&, const PatternTerm&) = default;
};

struct TriplePatternAst {
    PatternTerm subject;
    PatternTerm predicate;
    PatternTerm object;
    friend bool operator==(const TriplePatternAst&, const TriplePatternAst&) = default;
};

struct EventTerm {
    std::string var;
    std::vector<Condition> guard;
    friend bool operator==(const EventTerm&, const EventTerm&) = default;
};

struct SeqExpr {
    EventTerm first;
    EventTerm second;
    Duration within;
    friend bool operator==(const SeqExpr&, const SeqExpr&) = default;
};

struct JoinExpr {
    std::string left;
    std::string right;
    std::vector<Condition> on;
    friend bool operator==(const JoinExpr&, const JoinExpr&) = default;
};

enum class AggFn { Avg, Sum, Count };
enum class WindowMode { Sliding, Batch, Latest };

struct Window {
    std::string var;
    WindowMode mode = WindowMode::Sliding;
    std::variant<Duration, std::int64_t> width;  // time span or event count

    bool by_count() const { return std::holds_alternative<std::int64_t>(width); }
    friend bool operator==(const Window&, const Window&) = default;
};

struct AggregateExpr {
    AggFn fn = AggFn::Avg;
    std::string over;
    std::string alias;
    std::optional<Window> window;
    std::optional<Condition> having;
    friend bool operator==(const AggregateExpr&, const AggregateExpr&) = default;
};

using CepExpr = std::variant<SeqExpr, JoinExpr, AggregateExpr>;

struct Projection {
    bool is_var = false;
    std::string name;
    friend bool operator==(const Projection&, const Projection&) = default;
};

struct FromClause {
    std::vector<std::string> vars;
    std::string stream;
    friend bool operator==(const FromClause&, const FromClause&) = default;
};

struct PatternAst {
    std::vector<Projection> select;
    std::vector<FromClause> from;
    std::vector<TriplePatternAst> where;
    std::optional<CepExpr> cep;
    std::string raw_text;

    /// Structural equality; the source text is not part of the identity.
    friend bool operator==(const PatternAst& a, const PatternAst& b) {
        return a.select == b.select && a.from == b.from && a.where == b.where && a.cep == b.cep;
    }
};

constexpr std::string_view to_string(AggFn fn) {
    switch (fn) {
        case AggFn::Avg: return "AVG";
        case AggFn::Sum: return "SUM";
        case AggFn::Count: return "COUNT";
    }
    return "AVG";
}

constexpr std::string_view to_string(WindowMode mode) {
    switch (mode) {
        case WindowMode::Sliding: return "sliding";
        case WindowMode::Batch: return "batch";
        case WindowMode::Latest: return "latest";
    }
    return "sliding";
}

constexpr std::string_view to_string(RelOp op) {
    switch (op) {
        case RelOp::Lt: return "<";
        case RelOp::Le: return "<=";
        case RelOp::Gt: return ">";
        case RelOp::Ge: return ">=";
        case RelOp::Eq: return "==";
        case RelOp::Ne: return "!=";
    }
    return "<";
}

inline bool compare(double lhs, RelOp op, double rhs) {
    switch (op) {
        case RelOp::Lt: return lhs < rhs;
        case RelOp::Le: return lhs <= rhs;
        case RelOp::Gt: return lhs > rhs;
        case RelOp::Ge: return lhs >= rhs;
        case RelOp::Eq: return lhs == rhs;
        case RelOp::Ne: return lhs != rhs;
    }
    return false;
}

}  // namespace gridcep::lang
