#pragma once

// Ordered task decomposition with verifier injection and an oracle fallback.
// Three cases per agenda head: primitive tasks apply and extend the plan,
// compound tasks try each applicable method decomposition, and when every
// method branch fails the oracle is asked once for a candidate decomposition.
// Every decomposition, method or oracle, is followed by a verifier task, so
// any emitted plan realizes the decomposed task's declared effects.

#include <optional>

#include "verihtn/domain.hpp"
#include "verihtn/oracle.hpp"
#include "verihtn/trace.hpp"

namespace verihtn {

struct Limits {
    int max_depth = 200;     // decomposition nesting bound
    int oracle_budget = 25;  // max oracle queries per plan() call
    int oracle_attempt = 1;  // forwarded to OraclePort::decompose
};

struct Stats {
    int oracle_calls = 0;
    int oracle_failures = 0;
    int dead_ends = 0;   // inapplicable actions, failed verifiers, depth cuts
    int loop_cuts = 0;
    long nodes_expanded = 0;
};

enum class NoPlanReason { Exhausted, LoopCut, OracleBudget };

inline const char* reason_name(NoPlanReason r) {
    switch (r) {
    case NoPlanReason::Exhausted: return "exhausted";
    case NoPlanReason::LoopCut: return "loop-cut";
    case NoPlanReason::OracleBudget: return "oracle-budget";
    }
    return "unknown";
}

// The reason with the largest leaf-failure count; ties prefer loop-cut, then
// exhausted, so a search dominated by revisits reports the loop.
inline NoPlanReason dominant_reason(const Stats& st) {
    NoPlanReason r = NoPlanReason::Exhausted;
    int best = st.dead_ends;
    if (st.loop_cuts >= best && st.loop_cuts > 0) {
        best = st.loop_cuts;
        r = NoPlanReason::LoopCut;
    }
    if (st.oracle_failures > best) r = NoPlanReason::OracleBudget;
    return r;
}

struct PlanResult {
    std::optional<std::vector<GroundTask>> plan;
    NoPlanReason reason = NoPlanReason::Exhausted; // meaningful when !plan
    Stats stats;
    // Plan prefix length after each top-level task; segment i of the plan is
    // [segments[i-1], segments[i]).
    std::vector<std::size_t> segments;
};

namespace planner_detail {

struct Item {
    GroundTask task;
    int boundary = -1; // >= 0 marks the end of top-level task [boundary]
};

struct Search {
    const Domain& d;
    const std::vector<Method>& methods;
    OraclePort& oracle;
    const Limits& limits;
    Stats stats;
    TraceSink* trace = nullptr;
    std::vector<std::size_t> segments;
    // (state hash, task text) pairs stay for the whole search; a compound
    // task reentered in an identical state cannot make new progress.
    std::set<std::pair<std::uint64_t, std::string>> visited;
};

inline std::vector<Item> splice(const std::vector<GroundTask>& subtasks, const Item& verifier,
                                const std::vector<Item>& rest) {
    std::vector<Item> out;
    out.reserve(subtasks.size() + 1 + rest.size());
    for (const GroundTask& t : subtasks) out.push_back(Item{t});
    out.push_back(verifier);
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

inline std::optional<std::vector<GroundTask>> seek(Search& c, const State& s,
                                                   const std::vector<Item>& agenda,
                                                   std::vector<GroundTask> plan, int depth) {
    if (agenda.empty()) return plan;
    const Item& head = agenda.front();
    const std::vector<Item> rest(agenda.begin() + 1, agenda.end());

    if (head.boundary >= 0) {
        c.segments[static_cast<std::size_t>(head.boundary)] = plan.size();
        trace_detail::emit(c.trace, "segment",
                           {{"index", head.boundary}, {"plan_prefix", plan.size()}});
        return seek(c, s, rest, std::move(plan), depth);
    }

    const GroundTask& t = head.task;

    if (t.kind == TaskKind::Primitive || t.kind == TaskKind::Verifier) {
        std::optional<State> next = apply_action(c.d, s, t);
        if (t.kind == TaskKind::Verifier) {
            trace_detail::emit(c.trace, next ? "verifier-pass" : "verifier-fail",
                               {{"task", t.text()}});
        }
        if (!next) {
            if (t.kind == TaskKind::Primitive) {
                trace_detail::emit(c.trace, "inapplicable", {{"task", t.text()}});
            }
            ++c.stats.dead_ends;
            return std::nullopt;
        }
        if (t.kind == TaskKind::Primitive) {
            trace_detail::emit(c.trace, "apply", {{"task", t.text()}});
        }
        plan.push_back(t);
        return seek(c, *next, rest, std::move(plan), depth);
    }

    // compound
    const std::pair<std::uint64_t, std::string> key{s.hash(), t.text()};
    if (c.visited.count(key)) {
        ++c.stats.loop_cuts;
        trace_detail::emit(c.trace, "loop-cut", {{"task", t.text()}});
        return std::nullopt;
    }
    if (depth >= c.limits.max_depth) {
        ++c.stats.dead_ends;
        trace_detail::emit(c.trace, "depth-cut", {{"task", t.text()}, {"depth", depth}});
        return std::nullopt;
    }
    c.visited.insert(key);
    ++c.stats.nodes_expanded;
    trace_detail::emit(c.trace, "expand", {{"task", t.text()}, {"depth", depth}});

    const Item verifier{make_verifier(c.d, t)};

    for (const Decomposition& dec : applicable_decompositions(c.d, s, t, c.methods)) {
        std::vector<std::string> subtask_texts;
        for (const GroundTask& st : dec.subtasks) subtask_texts.push_back(st.text());
        trace_detail::emit(c.trace, "method-applied",
                           {{"task", t.text()},
                            {"method", dec.method->name},
                            {"subtasks", subtask_texts}});
        auto r = seek(c, s, splice(dec.subtasks, verifier, rest), plan, depth + 1);
        if (r) return r;
        trace_detail::emit(c.trace, "backtrack",
                           {{"task", t.text()}, {"choice", dec.method->name}});
    }

    // Cases 1 and 2 failed; ask the oracle once for this entry.
    if (c.stats.oracle_calls >= c.limits.oracle_budget) {
        ++c.stats.oracle_failures;
        trace_detail::emit(c.trace, "oracle-query",
                           {{"task", t.text()}, {"outcome", "budget-exhausted"}});
        return std::nullopt;
    }
    ++c.stats.oracle_calls;
    OracleRequest req = make_oracle_request(c.d, s, t);
    OracleResult result = c.oracle.decompose(req, c.limits.oracle_attempt);
    if (const OracleFailure* f = std::get_if<OracleFailure>(&result)) {
        ++c.stats.oracle_failures;
        trace_detail::emit(c.trace, "oracle-query",
                           {{"task", t.text()},
                            {"fingerprint", request_fingerprint(req)},
                            {"outcome", failure_kind_name(f->kind)},
                            {"message", f->message}});
        return std::nullopt;
    }
    const OracleResponse& resp = std::get<OracleResponse>(result);
    std::vector<std::string> task_texts;
    for (const GroundTask& ot : resp.tasks) task_texts.push_back(ot.text());
    trace_detail::emit(c.trace, "oracle-query",
                       {{"task", t.text()},
                        {"fingerprint", request_fingerprint(req)},
                        {"outcome", "ok"},
                        {"source", resp.source},
                        {"tasks", task_texts}});
    auto r = seek(c, s, splice(resp.tasks, verifier, rest), plan, depth + 1);
    if (r) return r;
    trace_detail::emit(c.trace, "backtrack", {{"task", t.text()}, {"choice", "oracle"}});
    return std::nullopt;
}

} // namespace planner_detail

inline PlanResult plan(const Domain& d, const State& s0, const std::vector<GroundTask>& tasks,
                       const std::vector<Method>& methods, OraclePort& oracle,
                       const Limits& limits = {}, TraceSink* trace = nullptr) {
    planner_detail::Search c{d, methods, oracle, limits};
    c.trace = trace;
    c.segments.assign(tasks.size(), 0);

    std::vector<planner_detail::Item> agenda;
    agenda.reserve(tasks.size() * 2);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        agenda.push_back(planner_detail::Item{tasks[i]});
        planner_detail::Item marker;
        marker.boundary = static_cast<int>(i);
        agenda.push_back(marker);
    }

    auto found = planner_detail::seek(c, s0, agenda, {}, 0);

    PlanResult pr;
    pr.stats = c.stats;
    nlohmann::json fields;
    fields["oracle_calls"] = c.stats.oracle_calls;
    fields["nodes_expanded"] = c.stats.nodes_expanded;
    if (found) {
        pr.plan = std::move(*found);
        pr.segments = c.segments;
        std::vector<std::string> texts;
        for (const GroundTask& t : *pr.plan) texts.push_back(t.text());
        fields["status"] = "plan";
        fields["plan"] = texts;
        fields["segments"] = pr.segments;
    } else {
        pr.reason = dominant_reason(c.stats);
        fields["status"] = "noplan";
        fields["reason"] = reason_name(pr.reason);
    }
    trace_detail::emit(trace, "result", fields);
    return pr;
}

// Convenience overload using the domain's own method list.
inline PlanResult plan(const Domain& d, const State& s0, const std::vector<GroundTask>& tasks,
                       OraclePort& oracle, const Limits& limits = {},
                       TraceSink* trace = nullptr) {
    return plan(d, s0, tasks, d.methods, oracle, limits, trace);
}

} // namespace verihtn
