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

#include <map>
#include <set>
#include <string>
#include <vector>

#include "gridcep/ontology.hpp"

namespace gridcep {

/// Triple pattern over expanded IRIs and variables.
using TriplePattern = Triple;
using Solution = std::map<std::string, Term>;

/// Matches a basic graph pattern against `ontology` ∪ `local`. `rdf:type`
/// patterns are answered under subclass entailment: (x rdf:type C) holds when
/// x has an asserted type that is C or a subclass of C.
class BgpMatcher {
  public:
    BgpMatcher(const Ontology& ontology, const std::vector<Triple>& local) : onto_(ontology), local_(local) {}

    /// Distinct projections of every solution onto `project`, given the
    /// initial bindings in `seed`. An empty `project` yields one empty row
    /// when the pattern matches.
    std::set<std::vector<Term>> evaluate(const std::vector<TriplePattern>& patterns, const Solution& seed,
                                         const std::vector<std::string>& project) const {
        std::set<std::vector<Term>> rows;
        std::vector<bool> used(patterns.size(), false);
        Solution binding = seed;
        solve(patterns, used, patterns.size(), binding, [&](const Solution& s) {
            std::vector<Term> row;
            row.reserve(project.size());
            for (const auto& var : project) {
                auto it = s.find(var);
                row.push_back(it == s.end() ? Term{} : it->second);
            }
            rows.insert(std::move(row));
        });
        return rows;
    }

    bool matches(const std::vector<TriplePattern>& patterns, const Solution& seed) const {
        return !evaluate(patterns, seed, {}).empty();
    }

  private:
    template <typename Emit>
    void solve(const std::vector<TriplePattern>& patterns, std::vector<bool>& used, std::size_t remaining,
               Solution& binding, Emit&& emit) const {
        if (remaining == 0) {
            emit(binding);
            return;
        }
        // most-bound-first keeps the search narrow
        std::size_t best = patterns.size();
        int best_score = -1;
        for (std::size_t i = 0; i < patterns.size(); ++i) {
            if (used[i]) continue;
            int score = bound(patterns[i].subject, binding) * 2 + bound(patterns[i].object, binding) * 2 +
                        bound(patterns[i].predicate, binding);
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        used[best] = true;
        match_one(patterns[best], binding, [&](Solution& extended) { solve(patterns, used, remaining - 1, extended, emit); });
        used[best] = false;
    }

    static int bound(const Term& t, const Solution& b) { return !t.is_var() || b.count(t.value) ? 1 : 0; }

    static const Term* resolve(const Term& t, const Solution& b) {
        if (!t.is_var()) return &t;
        auto it = b.find(t.value);
        return it == b.end() ? nullptr : &it->second;
    }

    // Tries to unify `pattern_term` with `value` under `binding`; records new
    // bindings in `added` so they can be undone.
    static bool unify(const Term& pattern_term, const Term& value, Solution& binding, std::vector<std::string>& added) {
        if (!pattern_term.is_var()) return pattern_term == value;
        auto it = binding.find(pattern_term.value);
        if (it != binding.end()) return it->second == value;
        binding.emplace(pattern_term.value, value);
        added.push_back(pattern_term.value);
        return true;
    }

    template <typename Next>
    void try_triple(const TriplePattern& tp, const Term& s, const Term& p, const Term& o, Solution& binding,
                    Next&& next) const {
        std::vector<std::string> added;
        if (unify(tp.subject, s, binding, added) && unify(tp.predicate, p, binding, added) &&
            unify(tp.object, o, binding, added)) {
            next(binding);
        }
        for (const auto& v : added) binding.erase(v);
    }

    template <typename Fn>
    void for_each_candidate(const Term* s, const Term* p, const Term* o, Fn&& fn) const {
        const std::vector<std::size_t>* index = nullptr;
        if (s && s->kind == TermKind::Iri) {
            index = &onto_.with_subject(s->value);
        } else if (o && o->kind == TermKind::Iri) {
            index = &onto_.with_object(o->value);
        } else if (p) {
            index = &onto_.with_predicate(p->value);
        }
        if (index) {
            for (auto i : *index) fn(onto_.triples()[i]);
        } else {
            for (const auto& t : onto_.triples()) fn(t);
        }
        for (const auto& t : local_) fn(t);
    }

    template <typename Next>
    void match_one(const TriplePattern& tp, Solution& binding, Next&& next) const {
        const Term* s = resolve(tp.subject, binding);
        const Term* p = resolve(tp.predicate, binding);
        const Term* o = resolve(tp.object, binding);

        if (p && p->kind == TermKind::Iri && p->value == iri::type()) {
            match_type(tp, s, o, binding, next);
            return;
        }
        for_each_candidate(s, p, o, [&](const Triple& t) {
            if (s && !(t.subject == *s)) return;
            if (p && !(t.predicate == *p)) return;
            if (o && !(t.object == *o)) return;
            try_triple(tp, t.subject, t.predicate, t.object, binding, next);
        });
    }

    template <typename Next>
    void match_type(const TriplePattern& tp, const Term* s, const Term* o, Solution& binding, Next&& next) const {
        const Term type_pred = Term::make_iri(iri::type());
        // asserted (subject, class) pairs from both graphs
        std::set<std::pair<Term, std::string>> asserted;
        auto collect = [&](const Triple& t) {
            if (t.predicate.value != iri::type() || t.object.kind != TermKind::Iri) return;
            if (s && !(t.subject == *s)) return;
            asserted.emplace(t.subject, t.object.value);
        };
        if (s && s->kind == TermKind::Iri) {
            for (auto i : onto_.with_subject(s->value)) collect(onto_.triples()[i]);
        } else if (o && o->kind == TermKind::Iri) {
            for (const auto& sub : onto_.subclasses_of(o->value)) {
                for (auto i : onto_.with_object(sub)) collect(onto_.triples()[i]);
            }
        } else {
            for (auto i : onto_.with_predicate(iri::type())) collect(onto_.triples()[i]);
        }
        for (const auto& t : local_) collect(t);

        if (o) {
            if (o->kind != TermKind::Iri) return;
            std::set<Term> subjects;
            for (const auto& [subj, cls] : asserted) {
                if (onto_.is_subclass(cls, o->value)) subjects.insert(subj);
            }
            for (const auto& subj : subjects) try_triple(tp, subj, type_pred, *o, binding, next);
            return;
        }
        std::set<std::pair<Term, std::string>> entailed;
        for (const auto& [subj, cls] : asserted) {
            for (const auto& sup : onto_.superclasses_of(cls)) entailed.emplace(subj, sup);
        }
        for (const auto& [subj, cls] : entailed) try_triple(tp, subj, type_pred, Term::make_iri(cls), binding, next);
    }

    const Ontology& onto_;
    const std::vector<Triple>& local_;
};

}  // namespace gridcep
