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

#include <string>

#include "gridcep/pattern_ast.hpp"

namespace gridcep::lang {

inline std::string format_atom(const Atom& atom) {
    if (const auto* d = std::get_if<double>(&atom)) return format_number(*d);
    if (const auto* a = std::get_if<AttrRef>(&atom)) return a->var.empty() ? a->attr : "?" + a->var + "." + a->attr;
    return "?" + std::get<VarRef>(atom).var;
}

inline std::string format_expr(const Expr& e) {
    std::string out = format_atom(e.first);
    for (const auto& [op, atom] : e.rest) {
        out += op == ArithOp::Plus ? "+" : "-";
        out += format_atom(atom);
    }
    return out;
}

inline std::string format_condition(const Condition& c) {
    return format_expr(c.lhs) + std::string(to_string(c.op)) + format_expr(c.rhs);
}

inline std::string format_conditions(const std::vector<Condition>& conds) {
    std::string out;
    for (std::size_t i = 0; i < conds.size(); ++i) {
        if (i) out += ",";
        out += format_condition(conds[i]);
    }
    return out;
}

inline std::string format_cep(const CepExpr& cep) {
    struct Visitor {
        std::string operator()(const SeqExpr& s) const {
            auto eterm = [](const EventTerm& t) {
                std::string out = "?" + t.var;
                if (!t.guard.empty()) out += "(" + format_conditions(t.guard) + ")";
                return out;
            };
            return "SEQ(" + eterm(s.first) + ", " + eterm(s.second) + " within " + to_string(s.within) + ")";
        }
        std::string operator()(const JoinExpr& j) const {
            return "JOIN(?" + j.left + ",?" + j.right + ") ON(" + format_conditions(j.on) + ")";
        }
        std::string operator()(const AggregateExpr& a) const {
            std::string out = std::string(to_string(a.fn)) + "(?" + a.over + ") AS " + a.alias;
            if (a.window) {
                const auto& w = *a.window;
                out += " WINDOW(?" + w.var + "," + std::string(to_string(w.mode)) + ",";
                if (const auto* d = std::get_if<Duration>(&w.width)) {
                    out += to_string(*d);
                } else {
                    out += std::to_string(std::get<std::int64_t>(w.width));
                }
                out += ")";
            }
            if (a.having) out += " HAVING(" + format_condition(*a.having) + ")";
            return out;
        }
    };
    return std::visit(Visitor{}, cep);
}

/// Canonical single-line text; parsing it yields an equal AST.
inline std::string format_pattern(const PatternAst& ast) {
    std::string out = "SELECT(";
    for (std::size_t i = 0; i < ast.select.size(); ++i) {
        if (i) out += ",";
        out += (ast.select[i].is_var ? "?" : "") + ast.select[i].name;
    }
    out += ")";
    for (const auto& f : ast.from) {
        out += " FROM(";
        for (const auto& v : f.vars) out += "?" + v + ",";
        out += f.stream + ")";
    }
    if (!ast.where.empty()) {
        auto term = [](const PatternTerm& t) { return (t.is_var ? "?" : "") + t.text; };
        out += " WHERE {";
        for (std::size_t i = 0; i < ast.where.size(); ++i) {
            if (i) out += " . ";
            const auto& tp = ast.where[i];
            out += term(tp.subject) + " " + term(tp.predicate) + " " + term(tp.object);
        }
        out += "}";
    }
    if (ast.cep) out += " | " + format_cep(*ast.cep);
    return out;
}

}  // namespace gridcep::lang
