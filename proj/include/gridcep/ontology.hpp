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
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gridcep/error.hpp"
#include "gridcep/value.hpp"

namespace gridcep {

namespace iri {
inline constexpr std::string_view kRdf = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
inline constexpr std::string_view kRdfs = "http://www.w3.org/2000/01/rdf-schema#";
inline constexpr std::string_view kEvt = "urn:gridcep:event#";
inline constexpr std::string_view kBd = "urn:gridcep:building#";
inline constexpr std::string_view kEe = "urn:gridcep:equipment#";
inline constexpr std::string_view kOrg = "urn:gridcep:org#";

inline std::string rdf(std::string_view local) { return std::string(kRdf) + std::string(local); }
inline std::string rdfs(std::string_view local) { return std::string(kRdfs) + std::string(local); }
inline std::string evt(std::string_view local) { return std::string(kEvt) + std::string(local); }
inline std::string bd(std::string_view local) { return std::string(kBd) + std::string(local); }
inline std::string ee(std::string_view local) { return std::string(kEe) + std::string(local); }
inline std::string org(std::string_view local) { return std::string(kOrg) + std::string(local); }

inline const std::string& type() {
    static const std::string v = rdf("type");
    return v;
}
inline const std::string& sub_class_of() {
    static const std::string v = rdfs("subClassOf");
    return v;
}
}  // namespace iri

/// Prefix -> base IRI map used to expand and compact QNames.
class Namespaces {
  public:
    Namespaces() = default;
    explicit Namespaces(std::map<std::string, std::string> prefixes) : prefixes_(std::move(prefixes)) {}

    /// The six prefixes every document may rely on.
    static Namespaces defaults() {
        return Namespaces({{"rdf", std::string(iri::kRdf)},
                           {"rdfs", std::string(iri::kRdfs)},
                           {"evt", std::string(iri::kEvt)},
                           {"bd", std::string(iri::kBd)},
                           {"ee", std::string(iri::kEe)},
                           {"org", std::string(iri::kOrg)}});
    }

    void add(std::string prefix, std::string base) { prefixes_[std::move(prefix)] = std::move(base); }

    bool has_prefix(std::string_view prefix) const { return prefixes_.count(std::string(prefix)) > 0; }

    const std::map<std::string, std::string>& prefixes() const { return prefixes_; }

    /// Accepts `<full-iri>`, `prefix:local`, or an already absolute IRI
    /// (`scheme://...` or `urn:...`).
    std::string expand(std::string_view text) const {
        if (text.size() >= 2 && text.front() == '<' && text.back() == '>') {
            return std::string(text.substr(1, text.size() - 2));
        }
        auto colon = text.find(':');
        if (colon == std::string_view::npos) {
            throw Error(ErrorCode::UnresolvedPrefix, std::string(text), "not a QName or IRI");
        }
        auto prefix = text.substr(0, colon);
        auto it = prefixes_.find(std::string(prefix));
        if (it != prefixes_.end()) {
            return it->second + std::string(text.substr(colon + 1));
        }
        if (prefix == "urn" || text.substr(colon).starts_with("://")) {
            return std::string(text);
        }
        throw Error(ErrorCode::UnresolvedPrefix, std::string(prefix));
    }

    /// Longest matching base wins; unknown IRIs are bracketed.
    std::string compact(std::string_view full) const {
        const std::pair<const std::string, std::string>* best = nullptr;
        for (const auto& entry : prefixes_) {
            if (full.starts_with(entry.second) && (!best || entry.second.size() > best->second.size())) {
                best = &entry;
            }
        }
        if (!best) return "<" + std::string(full) + ">";
        return best->first + ":" + std::string(full.substr(best->second.size()));
    }

  private:
    std::map<std::string, std::string> prefixes_;
};

enum class TermKind { Iri, Literal, Variable };

/// An RDF term. IRIs hold the expanded form; numeric literals hold the
/// shortest round-trip text so equal numbers compare equal as strings.
struct Term {
    TermKind kind = TermKind::Iri;
    std::string value;
    bool numeric = false;

    static Term make_iri(std::string v) { return Term{TermKind::Iri, std::move(v), false}; }
    static Term make_var(std::string name) { return Term{TermKind::Variable, std::move(name), false}; }
    static Term make_literal(std::string v) { return Term{TermKind::Literal, std::move(v), false}; }
    static Term make_number(double v) { return Term{TermKind::Literal, format_number(v), true}; }
    static Term from_value(const Value& v) {
        if (const auto* d = std::get_if<double>(&v)) return make_number(*d);
        return make_literal(std::get<std::string>(v));
    }

    bool is_var() const { return kind == TermKind::Variable; }

    friend bool operator==(const Term& a, const Term& b) { return a.kind == b.kind && a.value == b.value; }
    friend auto operator<=>(const Term& a, const Term& b) {
        if (auto c = a.kind <=> b.kind; c != 0) return c;
        return a.value <=> b.value;
    }
};

struct Triple {
    Term subject;
    Term predicate;
    Term object;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple& a, const Triple& b) {
        if (auto c = a.subject <=> b.subject; c != 0) return c;
        if (auto c = a.predicate <=> b.predicate; c != 0) return c;
        return a.object <=> b.object;
    }
};

inline Triple iri_triple(std::string s, std::string p, std::string o) {
    return Triple{Term::make_iri(std::move(s)), Term::make_iri(std::move(p)), Term::make_iri(std::move(o))};
}

/// In-memory triple store with precomputed subclass closure. Immutable
/// once built.
class Ontology {
  public:
    Ontology() = default;

    const Namespaces& namespaces() const { return namespaces_; }
    const std::vector<Triple>& triples() const { return triples_; }

    const std::vector<std::size_t>& with_subject(const std::string& s) const { return lookup(by_subject_, s); }
    const std::vector<std::size_t>& with_object(const std::string& o) const { return lookup(by_object_, o); }
    const std::vector<std::size_t>& with_predicate(const std::string& p) const { return lookup(by_predicate_, p); }

    bool contains(const Triple& t) const { return std::binary_search(triples_.begin(), triples_.end(), t); }

    /// Objects of (subject, predicate, ?) that are IRIs.
    std::vector<std::string> objects(const std::string& subject, const std::string& predicate) const {
        std::vector<std::string> out;
        for (auto idx : with_subject(subject)) {
            const auto& t = triples_[idx];
            if (t.predicate.value == predicate && t.object.kind == TermKind::Iri) out.push_back(t.object.value);
        }
        return out;
    }

    /// Reflexive-transitive subclasses of `cls`.
    std::set<std::string> subclasses_of(const std::string& cls) const {
        auto it = subclasses_.find(cls);
        if (it == subclasses_.end()) return {cls};
        return it->second;
    }

    /// Reflexive-transitive superclasses of `cls`.
    std::set<std::string> superclasses_of(const std::string& cls) const {
        auto it = superclasses_.find(cls);
        if (it == superclasses_.end()) return {cls};
        return it->second;
    }

    bool is_subclass(const std::string& sub, const std::string& super) const {
        return sub == super || superclasses_of(sub).count(super) > 0;
    }

    /// True when `subject` has an asserted type that is `cls` or below it.
    bool has_type(const std::string& subject, const std::string& cls) const {
        for (const auto& t : objects(subject, iri::type())) {
            if (is_subclass(t, cls)) return true;
        }
        return false;
    }

    /// Prefix declarations followed by one sorted triple per line.
    std::string to_text() const {
        std::ostringstream out;
        for (const auto& [prefix, base] : namespaces_.prefixes()) {
            out << "@prefix " << prefix << ": <" << base << "> .\n";
        }
        for (const auto& t : triples_) {
            out << render(t.subject) << ' ' << render(t.predicate) << ' ' << render(t.object) << " .\n";
        }
        return out.str();
    }

    std::string render(const Term& term) const {
        switch (term.kind) {
            case TermKind::Iri: return namespaces_.compact(term.value);
            case TermKind::Variable: return "?" + term.value;
            case TermKind::Literal: {
                if (term.numeric) return term.value;
                std::string out = "\"";
                for (char c : term.value) {
                    if (c == '"' || c == '\\') out += '\\';
                    out += c;
                }
                return out + "\"";
            }
        }
        return term.value;
    }

  private:
    friend Ontology load_ontology(std::vector<Triple> triples, Namespaces namespaces);

    using Index = std::unordered_map<std::string, std::vector<std::size_t>>;

    static const std::vector<std::size_t>& lookup(const Index& index, const std::string& key) {
        static const std::vector<std::size_t> empty;
        auto it = index.find(key);
        return it == index.end() ? empty : it->second;
    }

    Namespaces namespaces_;
    std::vector<Triple> triples_;
    Index by_subject_;
    Index by_object_;
    Index by_predicate_;
    std::unordered_map<std::string, std::set<std::string>> subclasses_;
    std::unordered_map<std::string, std::set<std::string>> superclasses_;
};

namespace detail {

inline Term expand_term(const Term& term, const Namespaces& ns) {
    if (term.kind == TermKind::Variable) {
        throw Error(ErrorCode::InvalidArgument, "?" + term.value, "variables are not allowed in stored triples");
    }
    if (term.kind == TermKind::Iri) return Term::make_iri(ns.expand(term.value));
    return term;
}

// Depth-first search over subClassOf edges; returns the first cycle found
// as "A -> B -> A", or an empty string.
inline std::string find_cycle(const std::map<std::string, std::vector<std::string>>& supers, const Namespaces& ns) {
    enum class Mark { None, Active, Done };
    std::map<std::string, Mark> mark;
    std::vector<std::string> path;
    std::string cycle;

    auto visit = [&](auto&& self, const std::string& node) -> bool {
        mark[node] = Mark::Active;
        path.push_back(node);
        auto it = supers.find(node);
        if (it != supers.end()) {
            for (const auto& next : it->second) {
                auto m = mark[next];
                if (m == Mark::Active) {
                    auto start = std::find(path.begin(), path.end(), next);
                    for (auto p = start; p != path.end(); ++p) cycle += ns.compact(*p) + " -> ";
                    cycle += ns.compact(next);
                    return true;
                }
                if (m == Mark::None && self(self, next)) return true;
            }
        }
        path.pop_back();
        mark[node] = Mark::Done;
        return false;
    };

    for (const auto& [node, _] : supers) {
        if (mark[node] == Mark::None && visit(visit, node)) return cycle;
    }
    return {};
}

}  // namespace detail

/// Builds an ontology from triples whose IRIs may still be QNames.
/// Throws CyclicHierarchy naming the cycle, or UnresolvedPrefix.
inline Ontology load_ontology(std::vector<Triple> triples, Namespaces namespaces) {
    Ontology onto;
    onto.namespaces_ = std::move(namespaces);
    for (auto& t : triples) {
        t = Triple{detail::expand_term(t.subject, onto.namespaces_), detail::expand_term(t.predicate, onto.namespaces_),
                   detail::expand_term(t.object, onto.namespaces_)};
    }
    std::sort(triples.begin(), triples.end());
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
    onto.triples_ = std::move(triples);

    std::map<std::string, std::vector<std::string>> direct_supers;
    for (std::size_t i = 0; i < onto.triples_.size(); ++i) {
        const auto& t = onto.triples_[i];
        onto.by_subject_[t.subject.value].push_back(i);
        onto.by_object_[t.object.value].push_back(i);
        onto.by_predicate_[t.predicate.value].push_back(i);
        if (t.predicate.value == iri::sub_class_of() && t.object.kind == TermKind::Iri) {
            direct_supers[t.subject.value].push_back(t.object.value);
            direct_supers.try_emplace(t.object.value);
        }
    }

    if (auto cycle = detail::find_cycle(direct_supers, onto.namespaces_); !cycle.empty()) {
        throw Error(ErrorCode::CyclicHierarchy, cycle);
    }

    for (const auto& [cls, _] : direct_supers) {
        std::set<std::string> seen{cls};
        std::vector<std::string> stack{cls};
        while (!stack.empty()) {
            auto cur = stack.back();
            stack.pop_back();
            for (const auto& sup : direct_supers[cur]) {
                if (seen.insert(sup).second) stack.push_back(sup);
            }
        }
        for (const auto& sup : seen) onto.subclasses_[sup].insert(cls);
        onto.superclasses_[cls] = std::move(seen);
    }

    for (const auto& t : onto.triples_) {
        if (t.predicate.value == iri::bd("hasLocation") && t.object.kind == TermKind::Iri &&
            onto.objects(t.object.value, iri::type()).empty()) {
            throw Error(ErrorCode::SchemaViolation, onto.namespaces_.compact(t.object.value), "location has no rdf:type");
        }
    }
    return onto;
}

inline std::set<std::string> subclasses_of(const Ontology& onto, const std::string& cls) {
    return onto.subclasses_of(cls);
}

namespace detail {

class TurtleReader {
  public:
    explicit TurtleReader(std::string_view text) : text_(text) {}

    void read(std::vector<Triple>& triples, Namespaces& ns) {
        while (true) {
            skip_space();
            if (pos_ >= text_.size()) break;
            if (text_.substr(pos_).starts_with("@prefix")) {
                pos_ += 7;
                auto prefix = token();
                if (prefix.empty() || prefix.back() != ':') fail("expected 'prefix:'");
                auto base = token();
                if (base.size() < 2 || base.front() != '<' || base.back() != '>') fail("expected <iri>");
                ns.add(std::string(prefix.substr(0, prefix.size() - 1)), std::string(base.substr(1, base.size() - 2)));
                expect_dot();
                continue;
            }
            auto s = term(ns);
            auto p = term(ns);
            auto o = term(ns);
            if (s.kind != TermKind::Iri || p.kind != TermKind::Iri) fail("subject and predicate must be IRIs");
            triples.push_back(Triple{std::move(s), std::move(p), std::move(o)});
            expect_dot();
        }
    }

  private:
    [[noreturn]] void fail(const std::string& what) const {
        std::size_t line = 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<long>(pos_), '\n'));
        throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line), what);
    }

    void skip_space() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::string_view token() {
        skip_space();
        auto start = pos_;
        if (pos_ < text_.size() && text_[pos_] == '<') {
            while (pos_ < text_.size() && text_[pos_] != '>') ++pos_;
            if (pos_ >= text_.size()) fail("unterminated IRI");
            ++pos_;
            return text_.substr(start, pos_ - start);
        }
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            // a trailing '.' terminates the statement unless it sits inside a number
            if (text_[pos_] == '.' && (pos_ + 1 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) break;
            ++pos_;
        }
        return text_.substr(start, pos_ - start);
    }

    Term term(const Namespaces& ns) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == '"') {
            std::string out;
            ++pos_;
            while (pos_ < text_.size() && text_[pos_] != '"') {
                if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
                out += text_[pos_++];
            }
            if (pos_ >= text_.size()) fail("unterminated literal");
            ++pos_;
            return Term::make_literal(std::move(out));
        }
        auto tok = token();
        if (tok.empty()) fail("expected a term");
        if (std::isdigit(static_cast<unsigned char>(tok.front())) || tok.front() == '-') {
            return Term::make_number(parse_number(tok));
        }
        if (tok.front() == '?') fail("variables are not allowed in stored triples");
        return Term::make_iri(ns.expand(tok));
    }

    void expect_dot() {
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != '.') fail("expected '.'");
        ++pos_;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Reads the line-oriented `<s> <p> <o> .` format with `@prefix` lines.
/// The default prefixes are always available.
inline Ontology parse_ontology(std::string_view text) {
    std::vector<Triple> triples;
    auto ns = Namespaces::defaults();
    detail::TurtleReader(text).read(triples, ns);
    return load_ontology(std::move(triples), std::move(ns));
}

/// Returns a copy of `base` with extra triples; the closure is rebuilt.
inline Ontology extend_ontology(const Ontology& base, const std::vector<Triple>& extra) {
    const auto& triples = base.triples();
    std::vector<Triple> all;
    all.reserve(triples.size() + extra.size());
    for (const auto& t : triples) {
        all.push_back(Triple{Term{t.subject.kind, "<" + t.subject.value + ">", false},
                             Term{t.predicate.kind, "<" + t.predicate.value + ">", false},
                             t.object.kind == TermKind::Iri ? Term{TermKind::Iri, "<" + t.object.value + ">", false} : t.object});
    }
    all.insert(all.end(), extra.begin(), extra.end());
    return load_ontology(std::move(all), base.namespaces());
}

}  // namespace gridcep
