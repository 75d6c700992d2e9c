#pragma once

// Loads domains and problems from their declarative JSON format and validates
// them: fixed predicate arities, declared symbols only, acyclic axioms, bound
// method variables. Rejections throw LoadError with file context.

#include <fstream>
#include <functional>

#include <nlohmann/json.hpp>

#include "verihtn/domain.hpp"

namespace verihtn {

class LoadError : public DomainError {
public:
    using DomainError::DomainError;
};

struct Problem {
    std::string name;
    State initial;
    std::vector<GroundTask> tasks;
    std::vector<std::string> notes;
};

namespace loader_detail {

using nlohmann::json;

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw LoadError(path + ": " + e.what());
    }
    return j;
}

[[noreturn]] inline void fail(const std::string& ctx, const std::string& msg) {
    throw LoadError(ctx + ": " + msg);
}

inline void check_symbol(const std::string& ctx, const std::string& s) {
    if (!detail::valid_symbol(s)) fail(ctx, "invalid symbol '" + s + "'");
}

// Predicate reference check shared by literals in any position.
inline void check_predicate_ref(const std::string& ctx, const Domain& d, const PatternAtom& atom,
                                bool allow_axiom, bool allow_builtin) {
    if (is_builtin_predicate(atom.predicate)) {
        if (!allow_builtin) fail(ctx, "builtin '" + atom.predicate + "' not allowed here");
        if (atom.args.size() != 2) fail(ctx, "builtin '" + atom.predicate + "' takes 2 arguments");
        return;
    }
    if (auto ax = d.axioms.find(atom.predicate); ax != d.axioms.end()) {
        if (!allow_axiom) fail(ctx, "axiom '" + atom.predicate + "' not allowed here");
        if (ax->second.params.size() != atom.args.size()) {
            fail(ctx, "axiom '" + atom.predicate + "' arity mismatch");
        }
        return;
    }
    auto pr = d.predicates.find(atom.predicate);
    if (pr == d.predicates.end()) fail(ctx, "undeclared predicate '" + atom.predicate + "'");
    if (pr->second != atom.args.size()) {
        fail(ctx, "predicate '" + atom.predicate + "' expects " + std::to_string(pr->second) +
                  " arguments, got " + std::to_string(atom.args.size()));
    }
}

inline void check_constants(const std::string& ctx, const Domain& d, const PatternAtom& atom) {
    for (const Term& t : atom.args) {
        if (!t.is_variable && !d.has_constant(t.name)) {
            fail(ctx, "undeclared constant '" + t.name + "'");
        }
    }
}

inline Literal parse_checked_literal(const std::string& ctx, const Domain& d,
                                     const std::string& raw, const std::set<std::string>& vars,
                                     bool allow_axiom, bool allow_builtin) {
    Literal lit;
    try {
        lit = parse_literal(raw, vars);
    } catch (const DomainError& e) {
        fail(ctx, e.what());
    }
    check_predicate_ref(ctx, d, lit.atom, allow_axiom, allow_builtin);
    check_constants(ctx, d, lit.atom);
    return lit;
}

inline ConditionPtr parse_condition(const std::string& ctx, const Domain& d, const json& j,
                                    std::set<std::string> vars) {
    auto node = std::make_shared<Condition>();
    if (j.is_string()) {
        node->kind = Condition::Kind::Lit;
        node->literal = parse_checked_literal(ctx, d, j.get<std::string>(), vars, true, true);
        return node;
    }
    if (!j.is_object() || j.size() != 1) {
        fail(ctx, "condition must be a literal string or a single-key object");
    }
    const std::string key = j.begin().key();
    const json& val = j.begin().value();
    if (key == "and" || key == "or") {
        node->kind = key == "and" ? Condition::Kind::And : Condition::Kind::Or;
        if (!val.is_array() || val.empty()) fail(ctx, "'" + key + "' needs a non-empty array");
        for (const json& ch : val) node->children.push_back(parse_condition(ctx, d, ch, vars));
        return node;
    }
    if (key == "not") {
        node->kind = Condition::Kind::Not;
        node->children.push_back(parse_condition(ctx, d, val, vars));
        return node;
    }
    if (key == "forall" || key == "exists") {
        node->kind = key == "forall" ? Condition::Kind::Forall : Condition::Kind::Exists;
        if (!val.is_object() || !val.contains("var") || !val.contains("type") ||
            !val.contains("body")) {
            fail(ctx, "'" + key + "' needs var, type, and body");
        }
        node->quant_var = val["var"].get<std::string>();
        node->quant_type = val["type"].get<std::string>();
        check_symbol(ctx, node->quant_var);
        if (!d.objects.count(node->quant_type)) {
            fail(ctx, "quantifier over undeclared object type '" + node->quant_type + "'");
        }
        vars.insert(node->quant_var);
        node->body = parse_condition(ctx, d, val["body"], vars);
        return node;
    }
    fail(ctx, "unknown condition form '" + key + "'");
}

// Collects axiom names referenced by a condition tree, for the acyclicity check.
inline void referenced_axioms(const Domain& d, const Condition& c, std::set<std::string>& out) {
    switch (c.kind) {
    case Condition::Kind::Lit:
        if (d.axioms.count(c.literal.atom.predicate)) out.insert(c.literal.atom.predicate);
        break;
    case Condition::Kind::And:
    case Condition::Kind::Or:
    case Condition::Kind::Not:
        for (const ConditionPtr& ch : c.children) referenced_axioms(d, *ch, out);
        break;
    case Condition::Kind::Forall:
    case Condition::Kind::Exists:
        referenced_axioms(d, *c.body, out);
        break;
    }
}

inline std::vector<std::string> string_array(const std::string& ctx, const json& j,
                                             const char* field) {
    std::vector<std::string> out;
    if (!j.contains(field)) return out;
    if (!j.at(field).is_array()) fail(ctx, std::string(field) + " must be an array");
    for (const json& e : j.at(field)) out.push_back(e.get<std::string>());
    return out;
}

} // namespace loader_detail

// ---------------------------------------------------------------------------
// load_domain
// ---------------------------------------------------------------------------

inline Domain load_domain_json(const nlohmann::json& j, const std::string& ctx) {
    using loader_detail::fail;
    using loader_detail::check_symbol;
    Domain d;
    d.name = j.value("name", "unnamed");
    d.notes = loader_detail::string_array(ctx, j, "notes");

    // predicates: name -> list of parameter names (arity is the list length)
    if (!j.contains("predicates") || !j.at("predicates").is_object()) {
        fail(ctx, "missing predicates section");
    }
    for (auto& [name, params] : j.at("predicates").items()) {
        check_symbol(ctx, name);
        if (is_builtin_predicate(name)) fail(ctx, "predicate '" + name + "' shadows a builtin");
        if (!params.is_array()) fail(ctx, "predicate '" + name + "' needs a parameter array");
        d.predicates[name] = params.size();
    }

    // objects: type -> constants
    if (!j.contains("objects") || !j.at("objects").is_object()) {
        fail(ctx, "missing objects section");
    }
    std::set<std::string> all;
    for (auto& [type, members] : j.at("objects").items()) {
        check_symbol(ctx, type);
        if (!members.is_array()) fail(ctx, "object type '" + type + "' needs an array");
        std::vector<std::string> list;
        for (const nlohmann::json& m : members) {
            std::string c = m.get<std::string>();
            check_symbol(ctx, c);
            list.push_back(c);
            all.insert(c);
        }
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        d.objects[type] = std::move(list);
    }
    d.constants.assign(all.begin(), all.end());

    // axioms: heads first so bodies may reference each other, then bodies.
    std::vector<std::pair<std::string, nlohmann::json>> axiom_bodies;
    if (j.contains("axioms")) {
        for (const nlohmann::json& aj : j.at("axioms")) {
            auto [head, params] = detail::split_call(aj.at("head").get<std::string>());
            if (d.predicates.count(head)) fail(ctx, "axiom '" + head + "' shadows a predicate");
            if (is_builtin_predicate(head)) fail(ctx, "axiom '" + head + "' shadows a builtin");
            if (d.axioms.count(head)) fail(ctx, "duplicate axiom '" + head + "'");
            std::set<std::string> uniq(params.begin(), params.end());
            if (uniq.size() != params.size()) fail(ctx, "axiom '" + head + "' repeats a parameter");
            Axiom ax;
            ax.head = head;
            ax.params = params;
            d.axioms[head] = std::move(ax);
            axiom_bodies.emplace_back(head, aj.at("body"));
        }
    }
    for (auto& [head, body] : axiom_bodies) {
        Axiom& ax = d.axioms[head];
        std::set<std::string> vars(ax.params.begin(), ax.params.end());
        ax.body = loader_detail::parse_condition(ctx + " axiom " + head, d, body, vars);
    }

    // axiom dependency graph must be acyclic
    {
        std::map<std::string, int> color; // 0 white, 1 grey, 2 black
        std::function<void(const std::string&)> dfs = [&](const std::string& n) {
            color[n] = 1;
            std::set<std::string> refs;
            loader_detail::referenced_axioms(d, *d.axioms.at(n).body, refs);
            for (const std::string& r : refs) {
                if (color[r] == 1) fail(ctx, "cyclic axiom definition through '" + r + "'");
                if (color[r] == 0) dfs(r);
            }
            color[n] = 2;
        };
        for (auto& [name, ax] : d.axioms) {
            if (color[name] == 0) dfs(name);
        }
    }

    // actions
    if (j.contains("actions")) {
        for (const nlohmann::json& aj : j.at("actions")) {
            ActionSchema a;
            a.name = aj.at("name").get<std::string>();
            const std::string actx = ctx + " action " + a.name;
            check_symbol(actx, a.name);
            if (a.name == "verify") fail(actx, "'verify' is reserved");
            if (d.actions.count(a.name)) fail(actx, "duplicate action");
            a.params = loader_detail::string_array(actx, aj, "params");
            std::set<std::string> vars(a.params.begin(), a.params.end());
            if (vars.size() != a.params.size()) fail(actx, "repeated parameter");
            for (const std::string& raw : loader_detail::string_array(actx, aj, "preconditions")) {
                a.preconditions.push_back(
                    loader_detail::parse_checked_literal(actx, d, raw, vars, true, true));
            }
            auto parse_effects = [&](const char* field, std::vector<PatternAtom>& out) {
                for (const std::string& raw : loader_detail::string_array(actx, aj, field)) {
                    PatternAtom p;
                    try {
                        p = parse_pattern_atom(raw, vars);
                    } catch (const DomainError& e) {
                        fail(actx, e.what());
                    }
                    loader_detail::check_predicate_ref(actx, d, p, false, false);
                    loader_detail::check_constants(actx, d, p);
                    out.push_back(std::move(p));
                }
            };
            parse_effects("add", a.add);
            parse_effects("delete", a.del);
            // identical template in add and delete would make grounded sets overlap
            for (const PatternAtom& pa : a.add) {
                for (const PatternAtom& pd : a.del) {
                    if (pa.predicate == pd.predicate &&
                        std::equal(pa.args.begin(), pa.args.end(), pd.args.begin(),
                                   pd.args.end(),
                                   [](const Term& x, const Term& y) { return x == y; })) {
                        fail(actx, "atom '" + pa.predicate + "' in both add and delete");
                    }
                }
            }
            d.action_order.push_back(a.name);
            d.actions[a.name] = std::move(a);
        }
    }

    // compound tasks
    if (j.contains("compound_tasks")) {
        for (const nlohmann::json& tj : j.at("compound_tasks")) {
            CompoundTaskSchema t;
            t.name = tj.at("name").get<std::string>();
            const std::string tctx = ctx + " compound task " + t.name;
            check_symbol(tctx, t.name);
            if (t.name == "verify") fail(tctx, "'verify' is reserved");
            if (d.compound_tasks.count(t.name)) fail(tctx, "duplicate compound task");
            if (d.actions.count(t.name)) fail(tctx, "name collides with an action");
            t.params = loader_detail::string_array(tctx, tj, "params");
            std::set<std::string> vars(t.params.begin(), t.params.end());
            if (vars.size() != t.params.size()) fail(tctx, "repeated parameter");
            for (const std::string& raw : loader_detail::string_array(tctx, tj, "preconditions")) {
                t.preconditions.push_back(
                    loader_detail::parse_checked_literal(tctx, d, raw, vars, true, true));
            }
            for (const std::string& raw : loader_detail::string_array(tctx, tj, "effects")) {
                t.effects.push_back(
                    loader_detail::parse_checked_literal(tctx, d, raw, vars, true, true));
            }
            // every compound task needs verifiable semantics
            if (t.effects.empty()) fail(tctx, "compound task declares no effects");
            d.task_order.push_back(t.name);
            d.compound_tasks[t.name] = std::move(t);
        }
    }

    // methods
    std::set<std::string> method_names;
    if (j.contains("methods")) {
        for (const nlohmann::json& mj : j.at("methods")) {
            Method m;
            m.name = mj.at("name").get<std::string>();
            const std::string mctx = ctx + " method " + m.name;
            check_symbol(mctx, m.name);
            if (!method_names.insert(m.name).second) fail(mctx, "duplicate method name");
            auto [task, head_args] = detail::split_call(mj.at("task").get<std::string>());
            m.task = task;
            auto ti = d.compound_tasks.find(task);
            if (ti == d.compound_tasks.end()) fail(mctx, "undeclared compound task '" + task + "'");
            if (ti->second.params.size() != head_args.size()) fail(mctx, "task head arity mismatch");
            std::set<std::string> vars;
            for (const std::string& v : head_args) {
                if (d.has_constant(v)) fail(mctx, "task head argument '" + v + "' is a constant");
                if (!vars.insert(v).second) fail(mctx, "repeated head variable '" + v + "'");
            }
            m.task_params = head_args;
            m.extra_params = loader_detail::string_array(mctx, mj, "extra_params");
            for (const std::string& v : m.extra_params) {
                check_symbol(mctx, v);
                if (!vars.insert(v).second) fail(mctx, "extra param '" + v + "' repeats a variable");
            }
            for (const std::string& raw : loader_detail::string_array(mctx, mj, "preconditions")) {
                m.preconditions.push_back(
                    loader_detail::parse_checked_literal(mctx, d, raw, vars, true, true));
            }
            // every extra param must be bound by some positive precondition literal
            for (const std::string& v : m.extra_params) {
                bool bound = false;
                for (const Literal& lit : m.preconditions) {
                    if (!lit.positive) continue;
                    for (const Term& a : lit.atom.args) {
                        if (a.is_variable && a.name == v) bound = true;
                    }
                }
                if (!bound) {
                    fail(mctx, "extra param '" + v + "' not bound by a positive precondition");
                }
            }
            for (const std::string& raw : loader_detail::string_array(mctx, mj, "subtasks")) {
                PatternAtom p;
                try {
                    p = parse_pattern_atom(raw, vars);
                } catch (const DomainError& e) {
                    fail(mctx, e.what());
                }
                if (!d.is_action(p.predicate) && !d.is_compound(p.predicate)) {
                    fail(mctx, "subtask '" + p.predicate + "' names no action or compound task");
                }
                std::size_t arity = d.is_action(p.predicate)
                                        ? d.actions.at(p.predicate).params.size()
                                        : d.compound_tasks.at(p.predicate).params.size();
                if (arity != p.args.size()) fail(mctx, "subtask '" + p.predicate + "' arity mismatch");
                loader_detail::check_constants(mctx, d, p);
                m.subtasks.push_back(TaskTemplate{p.predicate, p.args});
            }
            d.methods.push_back(std::move(m));
        }
    }
    return d;
}

inline Domain load_domain(const std::string& path) {
    return load_domain_json(loader_detail::read_json_file(path), path);
}

// ---------------------------------------------------------------------------
// load_problem
// ---------------------------------------------------------------------------

inline Problem load_problem_json(const nlohmann::json& j, const Domain& d,
                                 const std::string& ctx) {
    using loader_detail::fail;
    Problem p;
    p.name = j.value("name", "unnamed");
    p.notes = loader_detail::string_array(ctx, j, "notes");
    std::vector<GroundAtom> atoms;
    for (const std::string& raw : loader_detail::string_array(ctx, j, "initial_state")) {
        GroundAtom a;
        try {
            a = parse_ground_atom(raw);
        } catch (const DomainError& e) {
            fail(ctx, e.what());
        }
        auto pr = d.predicates.find(a.predicate);
        if (pr == d.predicates.end()) {
            fail(ctx, "initial state uses undeclared predicate '" + a.predicate + "'");
        }
        if (pr->second != a.args.size()) {
            fail(ctx, "initial state atom '" + raw + "' arity mismatch");
        }
        for (const std::string& c : a.args) {
            if (!d.has_constant(c)) fail(ctx, "undeclared constant '" + c + "'");
        }
        atoms.push_back(std::move(a));
    }
    p.initial = State(std::move(atoms));
    if (!j.contains("task_list")) fail(ctx, "missing task_list");
    for (const std::string& raw : loader_detail::string_array(ctx, j, "task_list")) {
        GroundTask t;
        try {
            // arity and constants are enforced by the parser itself
            t = parse_ground_task(raw, d);
        } catch (const DomainError& e) {
            fail(ctx, e.what());
        }
        p.tasks.push_back(std::move(t));
    }
    return p;
}

inline Problem load_problem(const std::string& path, const Domain& d) {
    return load_problem_json(loader_detail::read_json_file(path), d, path);
}

} // namespace verihtn
