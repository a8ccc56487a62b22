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

#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gridcep/error.hpp"
#include "gridcep/pattern_ast.hpp"

namespace gridcep::lang {

class SyntaxError : public Error {
  public:
    SyntaxError(std::size_t line, std::size_t column, std::string found, std::set<std::string> expected)
        : Error(ErrorCode::SyntaxError, found, describe(line, column, expected)),
          line_(line),
          column_(column),
          expected_(std::move(expected)) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::set<std::string>& expected() const noexcept { return expected_; }

  private:
    static std::string describe(std::size_t line, std::size_t column, const std::set<std::string>& expected) {
        std::string msg = "line " + std::to_string(line) + ", column " + std::to_string(column) + ", expected one of:";
        for (const auto& e : expected) msg += " " + e;
        return msg;
    }

    std::size_t line_;
    std::size_t column_;
    std::set<std::string> expected_;
};

enum class Tok { Ident, QName, Var, Number, Int, Dur, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::size_t line = 1;
    std::size_t column = 1;
};

class Lexer {
  public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            Token tok;
            tok.line = line_;
            tok.column = col_;
            if (pos_ >= src_.size()) {
                tok.kind = Tok::End;
                out.push_back(tok);
                return out;
            }
            char c = src_[pos_];
            if (c == '?') {
                advance();
                auto name = ident_chars();
                if (name.empty()) fail(tok, "?", {"variable name"});
                tok.kind = Tok::Var;
                tok.text = name;
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                auto name = ident_chars();
                if (peek() == ':' && is_local_char(peek(1))) {
                    advance();
                    std::string local;
                    while (pos_ < src_.size() && is_local_char(src_[pos_])) local += advance();
                    tok.kind = Tok::QName;
                    tok.text = name + ":" + local;
                } else {
                    tok.kind = Tok::Ident;
                    tok.text = name;
                }
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                lex_number(tok);
            } else {
                lex_punct(tok);
            }
            out.push_back(std::move(tok));
        }
    }

  private:
    static bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
    static bool is_local_char(char c) { return is_ident_char(c) || c == '-'; }

    char peek(std::size_t ahead = 0) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }

    char advance() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
    }

    std::string ident_chars() {
        std::string s;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) s += advance();
        return s;
    }

    void lex_number(Token& tok) {
        std::string digits;
        while (std::isdigit(static_cast<unsigned char>(peek()))) digits += advance();
        if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
            digits += advance();
            while (std::isdigit(static_cast<unsigned char>(peek()))) digits += advance();
            tok.kind = Tok::Number;
            tok.text = digits;
            if (is_ident_char(peek())) fail(tok, digits + ident_chars(), {"number"});
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(peek()))) {
            auto unit = ident_chars();
            if (unit != "s" && unit != "min" && unit != "h") fail(tok, digits + unit, {"s", "min", "h"});
            tok.kind = Tok::Dur;
            tok.text = digits + unit;
            return;
        }
        tok.kind = Tok::Int;
        tok.text = digits;
    }

    void lex_punct(Token& tok) {
        char c = advance();
        tok.kind = Tok::Punct;
        tok.text = std::string(1, c);
        switch (c) {
            case '(': case ')': case '{': case '}': case ',': case '.': case '|': case '+': case '-':
                return;
            case '<': case '>':
                if (peek() == '=') tok.text += advance();
                return;
            case '=': case '!':
                if (peek() == '=') {
                    tok.text += advance();
                    return;
                }
                break;
            default:
                break;
        }
        fail(tok, tok.text, {"token"});
    }

    [[noreturn]] static void fail(const Token& at, const std::string& found, std::set<std::string> expected) {
        throw SyntaxError(at.line, at.column, found, std::move(expected));
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

/// Recursive-descent parser with one token of lookahead over the published
/// grammar. Keywords are contextual identifiers, so `sum` or `avg` remain
/// usable as aliases.
class Parser {
  public:
    explicit Parser(std::string_view text) : text_(text), toks_(Lexer(text).run()) {}

    PatternAst parse_pattern() {
        PatternAst ast;
        ast.raw_text = std::string(text_);
        ast.select = select();
        do {
            ast.from.push_back(from());
        } while (at_word("FROM"));
        if (at_word("WHERE")) ast.where = where();
        if (at_punct("|")) {
            next();
            ast.cep = cep();
        }
        expect_end({"FROM", "WHERE", "|"});
        return ast;
    }

    CepExpr parse_cep() {
        auto c = cep();
        expect_end({});
        return c;
    }

    Condition parse_condition() {
        auto c = cond();
        expect_end({});
        return c;
    }

  private:
    const Token& cur() const { return toks_[pos_]; }
    Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    bool at_word(std::string_view w) const { return cur().kind == Tok::Ident && cur().text == w; }
    bool at_punct(std::string_view p) const { return cur().kind == Tok::Punct && cur().text == p; }

    [[noreturn]] void fail(std::set<std::string> expected) const {
        const auto& t = cur();
        throw SyntaxError(t.line, t.column, t.kind == Tok::End ? "end of input" : t.text, std::move(expected));
    }

    void expect_end(std::set<std::string> also) {
        if (cur().kind != Tok::End) {
            also.insert("end of input");
            fail(std::move(also));
        }
    }

    void word(std::string_view w) {
        if (!at_word(w)) fail({std::string(w)});
        next();
    }

    void punct(std::string_view p) {
        if (!at_punct(p)) fail({std::string(p)});
        next();
    }

    std::string var() {
        if (cur().kind != Tok::Var) fail({"VAR"});
        return next().text;
    }

    std::string ident() {
        if (cur().kind != Tok::Ident) fail({"IDENT"});
        return next().text;
    }

    std::vector<Projection> select() {
        word("SELECT");
        punct("(");
        std::vector<Projection> out;
        while (true) {
            if (cur().kind == Tok::Var) {
                out.push_back({true, next().text});
            } else if (cur().kind == Tok::Ident) {
                out.push_back({false, next().text});
            } else {
                fail({"VAR", "IDENT"});
            }
            if (at_punct(",")) {
                next();
                continue;
            }
            if (at_punct(")")) {
                next();
                return out;
            }
            fail({",", ")"});
        }
    }

    FromClause from() {
        word("FROM");
        punct("(");
        FromClause clause;
        clause.vars.push_back(var());
        while (true) {
            punct(",");
            if (cur().kind == Tok::Var) {
                clause.vars.push_back(next().text);
            } else if (cur().kind == Tok::Ident) {
                clause.stream = next().text;
                punct(")");
                return clause;
            } else {
                fail({"VAR", "IDENT"});
            }
        }
    }

    PatternTerm term() {
        if (cur().kind == Tok::Var) return {true, next().text};
        if (cur().kind == Tok::QName) return {false, next().text};
        fail({"VAR", "QNAME"});
    }

    std::vector<TriplePatternAst> where() {
        word("WHERE");
        punct("{");
        std::vector<TriplePatternAst> out;
        while (true) {
            TriplePatternAst tp;
            tp.subject = term();
            tp.predicate = term();
            tp.object = term();
            out.push_back(std::move(tp));
            if (at_punct(".")) {
                next();
                continue;
            }
            if (at_punct("}")) {
                next();
                return out;
            }
            fail({".", "}"});
        }
    }

    CepExpr cep() {
        if (at_word("SEQ")) return seq();
        if (at_word("JOIN")) return join();
        if (at_word("AVG") || at_word("SUM") || at_word("COUNT")) return aggregate();
        fail({"SEQ", "JOIN", "AVG", "SUM", "COUNT"});
    }

    std::vector<Condition> cond_list() {
        std::vector<Condition> out{cond()};
        while (at_punct(",")) {
            next();
            out.push_back(cond());
        }
        return out;
    }

    EventTerm eterm() {
        EventTerm t;
        t.var = var();
        if (at_punct("(")) {
            next();
            t.guard = cond_list();
            punct(")");
        }
        return t;
    }

    Duration duration() {
        if (cur().kind != Tok::Dur) fail({"DUR"});
        return to_duration(next().text);
    }

    static Duration to_duration(const std::string& text) {
        std::size_t split = 0;
        while (split < text.size() && std::isdigit(static_cast<unsigned char>(text[split]))) ++split;
        Duration d;
        d.magnitude = std::stoll(text.substr(0, split));
        auto unit = text.substr(split);
        d.unit = unit == "s" ? TimeUnit::Seconds : unit == "min" ? TimeUnit::Minutes : TimeUnit::Hours;
        return d;
    }

    SeqExpr seq() {
        word("SEQ");
        punct("(");
        SeqExpr s;
        s.first = eterm();
        punct(",");
        s.second = eterm();
        if (!at_word("within")) fail({"within", "("});
        next();
        s.within = duration();
        punct(")");
        return s;
    }

    JoinExpr join() {
        word("JOIN");
        punct("(");
        JoinExpr j;
        j.left = var();
        punct(",");
        j.right = var();
        punct(")");
        word("ON");
        punct("(");
        j.on = cond_list();
        punct(")");
        return j;
    }

    AggregateExpr aggregate() {
        AggregateExpr a;
        auto fn = next().text;
        a.fn = fn == "AVG" ? AggFn::Avg : fn == "SUM" ? AggFn::Sum : AggFn::Count;
        punct("(");
        a.over = var();
        punct(")");
        word("AS");
        a.alias = ident();
        if (at_word("WINDOW")) {
            next();
            punct("(");
            Window w;
            w.var = var();
            punct(",");
            if (at_word("sliding")) {
                w.mode = WindowMode::Sliding;
            } else if (at_word("batch")) {
                w.mode = WindowMode::Batch;
            } else if (at_word("latest")) {
                w.mode = WindowMode::Latest;
            } else {
                fail({"sliding", "batch", "latest"});
            }
            next();
            punct(",");
            if (cur().kind == Tok::Dur) {
                w.width = duration();
            } else if (cur().kind == Tok::Int) {
                w.width = std::stoll(next().text);
            } else {
                fail({"DUR", "INT"});
            }
            punct(")");
            a.window = std::move(w);
        }
        if (at_word("HAVING")) {
            next();
            punct("(");
            a.having = cond();
            punct(")");
        }
        return a;
    }

    Condition cond() {
        Condition c;
        c.lhs = expr();
        static const std::map<std::string, RelOp> rels{{"<", RelOp::Lt},  {"<=", RelOp::Le}, {">", RelOp::Gt},
                                                       {">=", RelOp::Ge}, {"==", RelOp::Eq}, {"!=", RelOp::Ne}};
        auto it = cur().kind == Tok::Punct ? rels.find(cur().text) : rels.end();
        if (it == rels.end()) fail({"<", "<=", ">", ">=", "==", "!=", "+", "-"});
        next();
        c.op = it->second;
        c.rhs = expr();
        return c;
    }

    Expr expr() {
        Expr e;
        e.first = atom();
        while (at_punct("+") || at_punct("-")) {
            auto op = next().text == "+" ? ArithOp::Plus : ArithOp::Minus;
            e.rest.emplace_back(op, atom());
        }
        return e;
    }

    Atom atom() {
        switch (cur().kind) {
            case Tok::Number:
            case Tok::Int:
                return parse_number(next().text);
            case Tok::Ident:
                return AttrRef{"", next().text};
            case Tok::Var: {
                auto v = next().text;
                if (at_punct(".")) {
                    next();
                    return AttrRef{v, ident()};
                }
                return VarRef{v};
            }
            default:
                fail({"NUMBER", "IDENT", "VAR"});
        }
    }

    std::string_view text_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

/// Parses a complete two-segment pattern. Throws SyntaxError.
inline PatternAst parse_pattern(std::string_view text) {
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        throw SyntaxError(1, 1, "end of input", {"SELECT"});
    }
    return Parser(text).parse_pattern();
}

/// Parses only the operator segment (the part after `|`).
inline CepExpr parse_cep_segment(std::string_view text) { return Parser(text).parse_cep(); }

/// One block of a pattern file: `@key: value` headers plus pattern text.
struct PatternFileEntry {
    std::map<std::string, std::string> metadata;
    std::string text;
    std::size_t first_line = 1;  // line of the first pattern-text line

    std::string get(const std::string& key, const std::string& fallback = {}) const {
        auto it = metadata.find(key);
        return it == metadata.end() ? fallback : it->second;
    }
};

/// Splits a pattern file into blocks. A block starts at an `@id:` line;
/// `#` starts a comment that runs to end of line.
inline std::vector<PatternFileEntry> parse_pattern_file(std::string_view content) {
    std::vector<PatternFileEntry> out;
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '@') {
            auto colon = t.find(':');
            if (colon == std::string::npos) {
                throw Error(ErrorCode::SyntaxError, t, "metadata line needs ':' at line " + std::to_string(lineno));
            }
            auto key = trim(t.substr(1, colon - 1));
            auto value = trim(t.substr(colon + 1));
            if (key == "id" || out.empty()) out.emplace_back();
            if (!out.back().text.empty() && key != "id") {
                throw Error(ErrorCode::SyntaxError, t, "metadata after pattern text at line " + std::to_string(lineno));
            }
            out.back().metadata[key] = value;
            continue;
        }
        if (out.empty()) out.emplace_back();
        if (out.back().text.empty()) {
            out.back().first_line = lineno;
        } else {
            out.back().text += "\n";
        }
        out.back().text += line;
    }
    return out;
}

}  // namespace gridcep::lang
