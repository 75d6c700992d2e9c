#pragma once

// Core model for hierarchical task planning: terms, ground atoms, immutable
// states, action and compound-task schemas, methods, axioms, and the ground
// operations (evaluate, satisfiers, apply_action, applicable_decompositions,
// make_verifier) the planner and validator build on.
//
// All types are immutable values after construction. Constants and variables
// are context-scoped: a symbol is a variable iff it is declared as a schema
// parameter, extra parameter, or quantifier variable; every ground symbol must
// name a declared object.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace verihtn {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A condition was evaluated with a variable left unbound.
class UnboundVariable : public DomainError {
public:
    using DomainError::DomainError;
};

// An atom names a predicate that is neither declared, an axiom head, nor a builtin.
class UnknownPredicate : public DomainError {
public:
    using DomainError::DomainError;
};

// apply_action was given a task that names no declared action or compound task.
class UnknownAction : public DomainError {
public:
    using DomainError::DomainError;
};

// make_verifier was asked for a task whose schema declares no effects.
class MissingSemantics : public DomainError {
public:
    using DomainError::DomainError;
};

// ---------------------------------------------------------------------------
// Terms and atoms
// ---------------------------------------------------------------------------

struct Term {
    bool is_variable = false;
    std::string name;

    static Term variable(std::string n) { return Term{true, std::move(n)}; }
    static Term constant(std::string n) { return Term{false, std::move(n)}; }

    bool operator==(const Term& o) const {
        return is_variable == o.is_variable && name == o.name;
    }
};

// Fully ground atom; the unit a State is made of.
struct GroundAtom {
    std::string predicate;
    std::vector<std::string> args;

    bool operator==(const GroundAtom& o) const {
        return predicate == o.predicate && args == o.args;
    }
    bool operator<(const GroundAtom& o) const {
        if (predicate != o.predicate) return predicate < o.predicate;
        return args < o.args;
    }
};

// Atom template appearing in schemas; args may mix variables and constants.
struct PatternAtom {
    std::string predicate;
    std::vector<Term> args;
};

// A possibly negated pattern atom. The predicate may name a declared state
// predicate, an axiom head, or a builtin comparison (eq/neq). Negation is
// negation-as-failure on the closed-world state.
struct Literal {
    PatternAtom atom;
    bool positive = true;
};

// ---------------------------------------------------------------------------
// Axiom condition grammar: literal | and | or | not | forall | exists
// ---------------------------------------------------------------------------

struct Condition;
using ConditionPtr = std::shared_ptr<const Condition>;

struct Condition {
    enum class Kind { Lit, And, Or, Not, Forall, Exists };
    Kind kind = Kind::Lit;
    Literal literal;                      // Kind::Lit
    std::vector<ConditionPtr> children;   // And / Or / Not (Not has one child)
    std::string quant_var;                // Forall / Exists
    std::string quant_type;               // object type the quantifier ranges over
    ConditionPtr body;                    // Forall / Exists
};

struct Axiom {
    std::string head;                     // head predicate name
    std::vector<std::string> params;      // distinct head variables
    ConditionPtr body;
};

// ---------------------------------------------------------------------------
// Schemas
// ---------------------------------------------------------------------------

struct ActionSchema {
    std::string name;
    std::vector<std::string> params;          // every pre/effect variable appears here
    std::vector<Literal> preconditions;
    std::vector<PatternAtom> add;
    std::vector<PatternAtom> del;
};

// Compound tasks carry checkable preconditions and effects, never procedures.
struct CompoundTaskSchema {
    std::string name;
    std::vector<std::string> params;
    std::vector<Literal> preconditions;
    std::vector<Literal> effects;
};

struct TaskTemplate {
    std::string name;
    std::vector<Term> args;
};

struct Method {
    std::string name;                     // convention: task name + "M" + ordinal
    std::string task;                     // compound task this method decomposes
    std::vector<std::string> task_params; // distinct head variables, bound by the ground task
    std::vector<std::string> extra_params;
    std::vector<Literal> preconditions;
    std::vector<TaskTemplate> subtasks;   // ordered
};

// ---------------------------------------------------------------------------
// Domain
// ---------------------------------------------------------------------------

inline bool is_builtin_predicate(const std::string& p) {
    return p == "eq" || p == "neq";
}

struct Domain {
    std::string name;
    std::map<std::string, std::size_t> predicates;            // name -> arity
    std::map<std::string, std::vector<std::string>> objects;  // type -> sorted constants
    std::vector<std::string> constants;                       // all objects, sorted unique
    std::map<std::string, Axiom> axioms;
    std::map<std::string, ActionSchema> actions;
    std::vector<std::string> action_order;                    // declaration order
    std::map<std::string, CompoundTaskSchema> compound_tasks;
    std::vector<std::string> task_order;                      // declaration order
    std::vector<Method> methods;                              // declaration order
    std::vector<std::string> notes;

    bool has_constant(const std::string& c) const {
        return std::binary_search(constants.begin(), constants.end(), c);
    }
    bool is_action(const std::string& n) const { return actions.count(n) != 0; }
    bool is_compound(const std::string& n) const { return compound_tasks.count(n) != 0; }
};

// ---------------------------------------------------------------------------
// State: set of ground atoms with canonical sorted serialization
// ---------------------------------------------------------------------------

class State {
public:
    State() = default;

    explicit State(std::vector<GroundAtom> atoms) : atoms_(std::move(atoms)) {
        std::sort(atoms_.begin(), atoms_.end());
        atoms_.erase(std::unique(atoms_.begin(), atoms_.end()), atoms_.end());
    }

    const std::vector<GroundAtom>& atoms() const { return atoms_; }

    std::size_t size() const { return atoms_.size(); }

    bool contains(const GroundAtom& a) const {
        return std::binary_search(atoms_.begin(), atoms_.end(), a);
    }

    // Returns a new state; deletes are removed first, then adds inserted.
    State with(const std::vector<GroundAtom>& add, const std::vector<GroundAtom>& del) const {
        std::vector<GroundAtom> next;
        next.reserve(atoms_.size() + add.size());
        for (const GroundAtom& a : atoms_) {
            if (std::find(del.begin(), del.end(), a) == del.end()) next.push_back(a);
        }
        next.insert(next.end(), add.begin(), add.end());
        return State(std::move(next));
    }

    // Canonical serialization: atoms in sorted order, "p(a,b) q(c)" style.
    std::string text() const {
        std::string out;
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            if (i) out += ' ';
            out += atoms_[i].predicate;
            out += '(';
            for (std::size_t j = 0; j < atoms_[i].args.size(); ++j) {
                if (j) out += ',';
                out += atoms_[i].args[j];
            }
            out += ')';
        }
        return out;
    }

    std::uint64_t hash() const {
        // FNV-1a over the canonical serialization.
        std::uint64_t h = 1469598103934665603ull;
        for (char c : text()) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return h;
    }

    bool operator==(const State& o) const { return atoms_ == o.atoms_; }

private:
    std::vector<GroundAtom> atoms_;
};

// ---------------------------------------------------------------------------
// Ground tasks
// ---------------------------------------------------------------------------

enum class TaskKind { Primitive, Compound, Verifier };

// A verifier task carries the verified compound task's name and args; applying
// it checks that task's effects and leaves the state unchanged.
struct GroundTask {
    std::string name;
    std::vector<std::string> args;
    TaskKind kind = TaskKind::Primitive;

    std::string text() const {
        std::string inner = name;
        inner += '(';
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (i) inner += ',';
            inner += args[i];
        }
        inner += ')';
        if (kind == TaskKind::Verifier) return "verify(" + inner + ")";
        return inner;
    }

    bool operator==(const GroundTask& o) const {
        return kind == o.kind && name == o.name && args == o.args;
    }
    bool operator<(const GroundTask& o) const {
        if (kind != o.kind) return kind < o.kind;
        if (name != o.name) return name < o.name;
        return args < o.args;
    }
};

using Binding = std::map<std::string, std::string>;

// ---------------------------------------------------------------------------
// Text helpers (shared by the loader, fixtures, plan files, and prompts)
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool valid_symbol(const std::string& s) {
    if (s.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    }
    return true;
}

// Splits "name(a1,a2)" into name and raw args. Throws DomainError on malformed text.
inline std::pair<std::string, std::vector<std::string>> split_call(const std::string& raw) {
    const std::string s = trim(raw);
    std::size_t open = s.find('(');
    if (open == std::string::npos || s.back() != ')') {
        throw DomainError("malformed atom or task text: '" + raw + "'");
    }
    std::string name = trim(s.substr(0, open));
    if (!valid_symbol(name)) throw DomainError("malformed symbol in: '" + raw + "'");
    std::string inner = s.substr(open + 1, s.size() - open - 2);
    std::vector<std::string> args;
    if (!trim(inner).empty()) {
        std::size_t pos = 0;
        while (pos <= inner.size()) {
            std::size_t comma = inner.find(',', pos);
            std::string tok = comma == std::string::npos ? inner.substr(pos)
                                                         : inner.substr(pos, comma - pos);
            tok = trim(tok);
            if (!valid_symbol(tok)) throw DomainError("malformed argument in: '" + raw + "'");
            args.push_back(tok);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    return {name, args};
}

} // namespace detail

inline std::string atom_text(const GroundAtom& a) {
    std::string out = a.predicate;
    out += '(';
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (i) out += ',';
        out += a.args[i];
    }
    out += ')';
    return out;
}

// Parses "pred(x,y)" into a pattern atom; symbols in `vars` become variables.
inline PatternAtom parse_pattern_atom(const std::string& raw, const std::set<std::string>& vars) {
    auto [name, args] = detail::split_call(raw);
    PatternAtom atom;
    atom.predicate = name;
    for (const std::string& a : args) {
        atom.args.push_back(vars.count(a) ? Term::variable(a) : Term::constant(a));
    }
    return atom;
}

// Parses a literal with an optional "not " prefix.
inline Literal parse_literal(const std::string& raw, const std::set<std::string>& vars) {
    std::string s = detail::trim(raw);
    Literal lit;
    if (s.rfind("not ", 0) == 0) {
        lit.positive = false;
        s = detail::trim(s.substr(4));
    }
    lit.atom = parse_pattern_atom(s, vars);
    return lit;
}

inline GroundAtom parse_ground_atom(const std::string& raw) {
    auto [name, args] = detail::split_call(raw);
    return GroundAtom{name, args};
}

// Parses "name(a,b)" or "verify(name(a,b))"; kind is resolved against the domain.
inline GroundTask parse_ground_task(const std::string& raw, const Domain& d) {
    std::string s = detail::trim(raw);
    bool verifier = false;
    if (s.rfind("verify(", 0) == 0 && s.back() == ')') {
        verifier = true;
        s = s.substr(7, s.size() - 8);
    }
    auto [name, args] = detail::split_call(s);
    GroundTask t{name, args, TaskKind::Primitive};
    if (verifier) {
        if (!d.is_compound(name)) {
            throw UnknownAction("verifier for '" + name + "', which is not a compound task");
        }
        t.kind = TaskKind::Verifier;
    } else if (d.is_compound(name)) {
        t.kind = TaskKind::Compound;
    } else if (!d.is_action(name)) {
        throw UnknownAction("task '" + name + "' names no declared action or compound task");
    }
    const std::vector<std::string>& params = t.kind == TaskKind::Primitive
                                                 ? d.actions.at(name).params
                                                 : d.compound_tasks.at(name).params;
    if (params.size() != t.args.size()) {
        throw DomainError("task '" + t.text() + "' arity mismatch: '" + name + "' takes " +
                          std::to_string(params.size()) + " arguments");
    }
    for (const std::string& c : t.args) {
        if (!d.has_constant(c)) {
            throw DomainError("undeclared constant '" + c + "' in task '" + t.text() + "'");
        }
    }
    return t;
}

inline std::string literal_text(const Literal& lit) {
    std::string out = lit.positive ? "" : "not ";
    out += lit.atom.predicate;
    out += '(';
    for (std::size_t i = 0; i < lit.atom.args.size(); ++i) {
        if (i) out += ',';
        out += lit.atom.args[i].name;
    }
    out += ')';
    return out;
}

// ---------------------------------------------------------------------------
// Grounding and evaluation
// ---------------------------------------------------------------------------

inline GroundAtom ground_atom(const PatternAtom& p, const Binding& b) {
    GroundAtom out;
    out.predicate = p.predicate;
    out.args.reserve(p.args.size());
    for (const Term& t : p.args) {
        if (!t.is_variable) {
            out.args.push_back(t.name);
        } else {
            auto it = b.find(t.name);
            if (it == b.end()) {
                throw UnboundVariable("variable '" + t.name + "' unbound in " + p.predicate);
            }
            out.args.push_back(it->second);
        }
    }
    return out;
}

bool evaluate(const Domain& d, const State& s, const Literal& lit, const Binding& b);

// Evaluates an axiom body condition under a binding. Quantifiers range over the
// declared objects of their type. Axiom recursion terminates because the loader
// rejects cyclic axiom dependencies.
inline bool evaluate_condition(const Domain& d, const State& s, const Condition& c,
                               const Binding& b) {
    switch (c.kind) {
    case Condition::Kind::Lit:
        return evaluate(d, s, c.literal, b);
    case Condition::Kind::And:
        for (const ConditionPtr& ch : c.children) {
            if (!evaluate_condition(d, s, *ch, b)) return false;
        }
        return true;
    case Condition::Kind::Or:
        for (const ConditionPtr& ch : c.children) {
            if (evaluate_condition(d, s, *ch, b)) return true;
        }
        return false;
    case Condition::Kind::Not:
        return !evaluate_condition(d, s, *c.children.front(), b);
    case Condition::Kind::Forall:
    case Condition::Kind::Exists: {
        auto it = d.objects.find(c.quant_type);
        if (it == d.objects.end()) {
            throw UnknownPredicate("unknown object type '" + c.quant_type + "' in quantifier");
        }
        for (const std::string& obj : it->second) {
            Binding ext = b;
            ext[c.quant_var] = obj;
            bool v = evaluate_condition(d, s, *c.body, ext);
            if (c.kind == Condition::Kind::Forall && !v) return false;
            if (c.kind == Condition::Kind::Exists && v) return true;
        }
        return c.kind == Condition::Kind::Forall;
    }
    }
    return false;
}

// Evaluates a fully ground literal: builtin comparison, axiom head, or state
// membership, with negation-as-failure. Throws UnboundVariable if the binding
// leaves a variable free and UnknownPredicate for undeclared predicates.
inline bool evaluate(const Domain& d, const State& s, const Literal& lit, const Binding& b) {
    GroundAtom g = ground_atom(lit.atom, b);
    bool value = false;
    if (is_builtin_predicate(g.predicate)) {
        if (g.args.size() != 2) {
            throw UnknownPredicate("builtin '" + g.predicate + "' takes exactly 2 arguments");
        }
        value = g.predicate == "eq" ? g.args[0] == g.args[1] : g.args[0] != g.args[1];
    } else if (auto ax = d.axioms.find(g.predicate); ax != d.axioms.end()) {
        const Axiom& a = ax->second;
        if (a.params.size() != g.args.size()) {
            throw UnknownPredicate("axiom '" + g.predicate + "' arity mismatch");
        }
        Binding head;
        for (std::size_t i = 0; i < a.params.size(); ++i) head[a.params[i]] = g.args[i];
        value = evaluate_condition(d, s, *a.body, head);
    } else if (auto pr = d.predicates.find(g.predicate); pr != d.predicates.end()) {
        if (pr->second != g.args.size()) {
            throw UnknownPredicate("predicate '" + g.predicate + "' arity mismatch");
        }
        value = s.contains(g);
    } else {
        throw UnknownPredicate("unknown predicate '" + g.predicate + "'");
    }
    return lit.positive ? value : !value;
}

// ---------------------------------------------------------------------------
// Satisfiers: every binding extending the seed under which all conditions hold
// ---------------------------------------------------------------------------

// Deterministic order: conditions are processed left to right; free variables
// of each condition (first-occurrence order) are enumerated over the sorted
// constant list, so bindings come out in lexicographic constant order. An empty
// condition list yields exactly the seed binding.
inline std::vector<Binding> satisfiers(const Domain& d, const State& s,
                                       const std::vector<Literal>& conditions,
                                       const Binding& seed = {}) {
    std::vector<Binding> result{seed};
    for (const Literal& lit : conditions) {
        std::vector<Binding> next;
        for (const Binding& b : result) {
            std::vector<std::string> free;
            for (const Term& t : lit.atom.args) {
                if (t.is_variable && !b.count(t.name) &&
                    std::find(free.begin(), free.end(), t.name) == free.end()) {
                    free.push_back(t.name);
                }
            }
            if (free.empty()) {
                if (evaluate(d, s, lit, b)) next.push_back(b);
                continue;
            }
            const std::vector<std::string>& cs = d.constants;
            if (cs.empty()) continue;
            std::vector<std::size_t> idx(free.size(), 0);
            while (true) {
                Binding ext = b;
                for (std::size_t i = 0; i < free.size(); ++i) ext[free[i]] = cs[idx[i]];
                if (evaluate(d, s, lit, ext)) next.push_back(std::move(ext));
                // odometer: rightmost position advances fastest
                std::size_t pos = free.size();
                while (pos > 0) {
                    --pos;
                    if (++idx[pos] < cs.size()) break;
                    idx[pos] = 0;
                    if (pos == 0) { pos = SIZE_MAX; break; }
                }
                if (pos == SIZE_MAX) break;
            }
        }
        result = std::move(next);
    }
    return result;
}

// ---------------------------------------------------------------------------
// apply_action
// ---------------------------------------------------------------------------

// Applies a primitive or verifier task. Returns the successor state, or nullopt
// when preconditions (or, for verifiers, the verified task's effects) fail.
// The input state is never mutated. Verifier application leaves the state
// unchanged. Throws UnknownAction for undeclared names or arity mismatches.
inline std::optional<State> apply_action(const Domain& d, const State& s, const GroundTask& t) {
    if (t.kind == TaskKind::Compound) {
        throw UnknownAction("apply_action requires a primitive or verifier task, got '" +
                            t.text() + "'");
    }
    if (t.kind == TaskKind::Verifier) {
        auto it = d.compound_tasks.find(t.name);
        if (it == d.compound_tasks.end()) {
            throw UnknownAction("verifier for unknown compound task '" + t.name + "'");
        }
        const CompoundTaskSchema& schema = it->second;
        if (schema.params.size() != t.args.size()) {
            throw UnknownAction("verifier arity mismatch for '" + t.name + "'");
        }
        Binding b;
        for (std::size_t i = 0; i < schema.params.size(); ++i) b[schema.params[i]] = t.args[i];
        for (const Literal& eff : schema.effects) {
            if (!evaluate(d, s, eff, b)) return std::nullopt;
        }
        return s;
    }
    auto it = d.actions.find(t.name);
    if (it == d.actions.end()) {
        throw UnknownAction("unknown action '" + t.name + "'");
    }
    const ActionSchema& schema = it->second;
    if (schema.params.size() != t.args.size()) {
        throw UnknownAction("action '" + t.name + "' arity mismatch");
    }
    Binding b;
    for (std::size_t i = 0; i < schema.params.size(); ++i) b[schema.params[i]] = t.args[i];
    for (const Literal& pre : schema.preconditions) {
        if (!evaluate(d, s, pre, b)) return std::nullopt;
    }
    std::vector<GroundAtom> add, del;
    add.reserve(schema.add.size());
    del.reserve(schema.del.size());
    for (const PatternAtom& p : schema.add) add.push_back(ground_atom(p, b));
    for (const PatternAtom& p : schema.del) del.push_back(ground_atom(p, b));
    return s.with(add, del);
}

// ---------------------------------------------------------------------------
// applicable_decompositions
// ---------------------------------------------------------------------------

struct Decomposition {
    const Method* method = nullptr;
    Binding binding;                  // full binding incl. head params
    std::vector<GroundTask> subtasks;
};

// Every method instance applicable to the ground compound task, in method
// declaration order (outer) and satisfier order (inner). An empty result is the
// planner's signal to fall through to the oracle.
inline std::vector<Decomposition> applicable_decompositions(const Domain& d, const State& s,
                                                            const GroundTask& t,
                                                            const std::vector<Method>& methods) {
    if (t.kind != TaskKind::Compound) {
        throw DomainError("applicable_decompositions requires a compound task");
    }
    std::vector<Decomposition> out;
    for (const Method& m : methods) {
        if (m.task != t.name || m.task_params.size() != t.args.size()) continue;
        Binding seed;
        for (std::size_t i = 0; i < m.task_params.size(); ++i) seed[m.task_params[i]] = t.args[i];
        for (Binding& b : satisfiers(d, s, m.preconditions, seed)) {
            Decomposition dec;
            dec.method = &m;
            dec.subtasks.reserve(m.subtasks.size());
            for (const TaskTemplate& sub : m.subtasks) {
                GroundTask g;
                g.name = sub.name;
                g.kind = d.is_compound(sub.name) ? TaskKind::Compound : TaskKind::Primitive;
                g.args.reserve(sub.args.size());
                for (const Term& a : sub.args) {
                    if (!a.is_variable) {
                        g.args.push_back(a.name);
                    } else {
                        auto it = b.find(a.name);
                        if (it == b.end()) {
                            throw UnboundVariable("subtask variable '" + a.name +
                                                  "' unbound in method " + m.name);
                        }
                        g.args.push_back(it->second);
                    }
                }
                dec.subtasks.push_back(std::move(g));
            }
            dec.binding = std::move(b);
            out.push_back(std::move(dec));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// make_verifier
// ---------------------------------------------------------------------------

// Builds the verifier task for a ground compound task: a synthetic primitive
// whose preconditions are the task's grounded effects and which has no effects.
// Throws MissingSemantics when the schema declares no effects to check.
inline GroundTask make_verifier(const Domain& d, const GroundTask& t) {
    auto it = d.compound_tasks.find(t.name);
    if (it == d.compound_tasks.end()) {
        throw UnknownAction("make_verifier: unknown compound task '" + t.name + "'");
    }
    if (it->second.effects.empty()) {
        throw MissingSemantics("compound task '" + t.name + "' declares no effects to verify");
    }
    return GroundTask{t.name, t.args, TaskKind::Verifier};
}

// Grounded display texts of a compound task's preconditions or effects, used by
// oracle prompts and verifier diagnostics.
inline std::vector<std::string> grounded_condition_texts(const Domain& d, const GroundTask& t,
                                                         const std::vector<Literal>& conds) {
    auto it = d.compound_tasks.find(t.name);
    if (it == d.compound_tasks.end()) {
        throw UnknownAction("unknown compound task '" + t.name + "'");
    }
    Binding b;
    for (std::size_t i = 0; i < it->second.params.size(); ++i) b[it->second.params[i]] = t.args[i];
    std::vector<std::string> out;
    out.reserve(conds.size());
    for (const Literal& lit : conds) {
        Literal g = lit;
        for (Term& a : g.atom.args) {
            if (a.is_variable) {
                auto bi = b.find(a.name);
                if (bi == b.end()) throw UnboundVariable("unbound '" + a.name + "'");
                a = Term::constant(bi->second);
            }
        }
        out.push_back(literal_text(g));
    }
    return out;
}

} // namespace verihtn
