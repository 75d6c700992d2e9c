#pragma once

// Plan validation independent of the search. A plan satisfies a task list
// when it splits into consecutive segments, one per task, such that each
// segment executes from the current state and ends with the task's declared
// effects holding. Verifier tasks inside a plan execute as state-preserving
// applicability checks.

#include <optional>
#include <variant>

#include "verihtn/domain.hpp"

namespace verihtn::validation {

struct ExecFailure {
    std::size_t index = 0; // offset of the failing task within the executed span
    std::string task;
};

using ExecOutcome = std::variant<State, ExecFailure>;

inline ExecOutcome execute(const Domain& d, State s,
                           const std::vector<GroundTask>& plan,
                           std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
        std::optional<State> next = apply_action(d, s, plan[i]);
        if (!next) return ExecFailure{i, plan[i].text()};
        s = *next;
    }
    return s;
}

inline ExecOutcome execute(const Domain& d, const State& s, const std::vector<GroundTask>& plan) {
    return execute(d, s, plan, 0, plan.size());
}

enum class RejectKind { InapplicableAction, EffectsUnsatisfied, PrefixMismatch };

inline const char* reject_kind_name(RejectKind k) {
    switch (k) {
    case RejectKind::InapplicableAction: return "inapplicable-action";
    case RejectKind::EffectsUnsatisfied: return "effects-unsatisfied";
    case RejectKind::PrefixMismatch: return "prefix-mismatch";
    }
    return "unknown";
}

struct Rejection {
    RejectKind kind = RejectKind::PrefixMismatch;
    std::size_t task_index = 0; // which top-level task the check failed on
    std::string detail;
};

namespace validator_detail {

inline bool task_effects_hold(const Domain& d, const State& s, const GroundTask& t) {
    const CompoundTaskSchema& schema = d.compound_tasks.at(t.name);
    Binding b;
    for (std::size_t i = 0; i < schema.params.size(); ++i) b[schema.params[i]] = t.args[i];
    for (const Literal& lit : schema.effects) {
        if (!evaluate(d, s, lit, b)) return false;
    }
    return true;
}

} // namespace validator_detail

// Checks the task list against the plan under explicit split points:
// splits[i] is the plan prefix length after task i. Returns the first
// rejection, or nullopt when the plan satisfies the tasks.
inline std::optional<Rejection> check(const Domain& d, const State& s0,
                                      const std::vector<GroundTask>& tasks,
                                      const std::vector<GroundTask>& plan,
                                      const std::vector<std::size_t>& splits) {
    if (splits.size() != tasks.size()) {
        return Rejection{RejectKind::PrefixMismatch, 0, "split count differs from task count"};
    }
    if (tasks.empty()) {
        if (plan.empty()) return std::nullopt;
        return Rejection{RejectKind::PrefixMismatch, 0, "non-empty plan for empty task list"};
    }
    if (splits.back() != plan.size()) {
        return Rejection{RejectKind::PrefixMismatch, tasks.size() - 1,
                         "plan extends past the final segment"};
    }
    State cur = s0;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const std::size_t end = splits[i];
        if (end < begin || end > plan.size()) {
            return Rejection{RejectKind::PrefixMismatch, i, "splits are not monotone"};
        }
        const GroundTask& t = tasks[i];
        if (t.kind == TaskKind::Compound) {
            ExecOutcome out = execute(d, cur, plan, begin, end);
            if (const ExecFailure* f = std::get_if<ExecFailure>(&out)) {
                return Rejection{RejectKind::InapplicableAction, i,
                                 f->task + " at plan position " + std::to_string(f->index)};
            }
            cur = std::get<State>(out);
            if (!validator_detail::task_effects_hold(d, cur, t)) {
                return Rejection{RejectKind::EffectsUnsatisfied, i,
                                 "effects of " + t.text() + " do not hold after its segment"};
            }
        } else {
            // A primitive or verifier top-level task must be its own segment.
            if (end != begin + 1 || !(plan[begin] == t)) {
                return Rejection{RejectKind::PrefixMismatch, i,
                                 "segment for " + t.text() + " is not the task itself"};
            }
            std::optional<State> next = apply_action(d, cur, t);
            if (!next) {
                return Rejection{RejectKind::InapplicableAction, i,
                                 t.text() + " at plan position " + std::to_string(begin)};
            }
            cur = *next;
        }
        begin = end;
    }
    return std::nullopt;
}

// Split-free variant for externally produced plans: searches over all
// monotone segmentations. Exponential in plan length; intended for short
// plans (roughly a dozen steps).
inline bool satisfies_any_split(const Domain& d, const State& s0,
                                const std::vector<GroundTask>& tasks,
                                const std::vector<GroundTask>& plan,
                                std::size_t task_index = 0, std::size_t begin = 0) {
    if (task_index == tasks.size()) return begin == plan.size();
    const GroundTask& t = tasks[task_index];
    if (t.kind != TaskKind::Compound) {
        if (begin >= plan.size() || !(plan[begin] == t)) return false;
        std::optional<State> next = apply_action(d, s0, t);
        if (!next) return false;
        return satisfies_any_split(d, *next, tasks, plan, task_index + 1, begin + 1);
    }
    for (std::size_t end = begin; end <= plan.size(); ++end) {
        ExecOutcome out = execute(d, s0, plan, begin, end);
        if (std::holds_alternative<ExecFailure>(out)) break; // longer spans fail too
        const State& mid = std::get<State>(out);
        if (!validator_detail::task_effects_hold(d, mid, t)) continue;
        if (satisfies_any_split(d, mid, tasks, plan, task_index + 1, end)) return true;
    }
    return false;
}

} // namespace verihtn::validation
