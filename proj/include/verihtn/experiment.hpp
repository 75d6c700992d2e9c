#pragma once

// The ablation matrix: full domain, unsolvable variant, single method
// removed, all methods of one task removed, and no methods at all. Each cell
// gets up to five planning attempts; every reported plan is revalidated, and
// a validation failure aborts the run since it would falsify the soundness
// guarantee the planner is built around.

#include "verihtn/planner.hpp"
#include "verihtn/plan_io.hpp"
#include "verihtn/validator.hpp"

namespace verihtn {

class SoundnessViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class AblationMode { Full, Unsolvable, MethodRemoved, NoMethods, NoModel };

inline const char* ablation_mode_name(AblationMode m) {
    switch (m) {
    case AblationMode::Full: return "full";
    case AblationMode::Unsolvable: return "unsolvable";
    case AblationMode::MethodRemoved: return "method-removed";
    case AblationMode::NoMethods: return "no-methods";
    case AblationMode::NoModel: return "no-model";
    }
    return "unknown";
}

struct AblationSpec {
    AblationMode mode = AblationMode::Full;
    std::string task;      // MethodRemoved, NoMethods
    int method_ordinal = 0; // MethodRemoved: 1-based position among the task's methods
};

// Methods surviving the ablation, in declaration order.
inline std::vector<Method> apply_ablation(const Domain& d, const AblationSpec& spec) {
    std::vector<Method> out;
    int seen = 0;
    for (const Method& m : d.methods) {
        switch (spec.mode) {
        case AblationMode::Full:
        case AblationMode::Unsolvable:
            out.push_back(m);
            break;
        case AblationMode::NoModel:
            break;
        case AblationMode::NoMethods:
            if (m.task != spec.task) out.push_back(m);
            break;
        case AblationMode::MethodRemoved:
            if (m.task == spec.task && ++seen == spec.method_ordinal) break;
            out.push_back(m);
            break;
        }
    }
    return out;
}

struct CellAttempt {
    int attempt = 0;
    bool solved = false;
    int oracle_calls = 0;
    std::string reason; // set when unsolved
};

struct CellResult {
    AblationSpec spec;
    std::string label;
    bool solved = false;
    std::vector<CellAttempt> attempts;
    bool short_circuited = false; // deterministic oracle, retries skipped
    std::size_t plan_length = 0;
    std::string plan_file;
};

struct ExperimentReport {
    std::string domain;
    std::vector<CellResult> cells;
};

struct ExperimentOptions {
    int max_attempts = 5;
    Limits limits;
    std::string plan_dir; // when set, first solving plan per cell is written here
};

namespace experiment_detail {

inline std::string cell_label(const Domain& d, const AblationSpec& spec) {
    switch (spec.mode) {
    case AblationMode::Full: return "full";
    case AblationMode::Unsolvable: return "unsolvable";
    case AblationMode::NoModel: return "no-model";
    case AblationMode::NoMethods: return spec.task;
    case AblationMode::MethodRemoved:
        return spec.task + " M" + std::to_string(spec.method_ordinal);
    }
    (void)d;
    return "unknown";
}

inline std::string sanitize(std::string s) {
    for (char& c : s) {
        if (c == ' ' || c == '/') c = '-';
    }
    return s;
}

} // namespace experiment_detail

// Rows in presentation order: full, unsolvable, then per compound task its
// no-methods row followed by one method-removed row per method.
inline std::vector<AblationSpec> matrix_rows(const Domain& d) {
    std::vector<AblationSpec> rows;
    rows.push_back({AblationMode::Full, "", 0});
    rows.push_back({AblationMode::Unsolvable, "", 0});
    for (const std::string& task : d.task_order) {
        rows.push_back({AblationMode::NoMethods, task, 0});
        int count = 0;
        for (const Method& m : d.methods) {
            if (m.task == task) ++count;
        }
        for (int i = 1; i <= count; ++i) {
            rows.push_back({AblationMode::MethodRemoved, task, i});
        }
    }
    rows.push_back({AblationMode::NoModel, "", 0});
    return rows;
}

inline CellResult run_cell(const Domain& d, const Problem& problem, const AblationSpec& spec,
                           OraclePort& oracle, const ExperimentOptions& opt) {
    CellResult cell;
    cell.spec = spec;
    cell.label = experiment_detail::cell_label(d, spec);
    const std::vector<Method> methods = apply_ablation(d, spec);
    for (int attempt = 1; attempt <= std::max(1, opt.max_attempts); ++attempt) {
        Limits limits = opt.limits;
        limits.oracle_attempt = attempt;
        PlanResult pr = plan(d, problem.initial, problem.tasks, methods, oracle, limits);
        CellAttempt ca;
        ca.attempt = attempt;
        ca.solved = pr.plan.has_value();
        ca.oracle_calls = pr.stats.oracle_calls;
        if (!pr.plan) ca.reason = reason_name(pr.reason);
        cell.attempts.push_back(ca);
        if (pr.plan) {
            auto rejection = validation::check(d, problem.initial, problem.tasks, *pr.plan,
                                               pr.segments);
            if (rejection) {
                throw SoundnessViolation("validator rejected a reported plan (" +
                                         std::string(validation::reject_kind_name(
                                             rejection->kind)) +
                                         ") in cell " + cell.label + ": " + rejection->detail);
            }
            cell.solved = true;
            cell.plan_length = pr.plan->size();
            if (!opt.plan_dir.empty()) {
                PlanFile pf;
                pf.domain = d.name;
                pf.problem = problem.name;
                for (const GroundTask& t : problem.tasks) pf.task_texts.push_back(t.text());
                pf.plan = *pr.plan;
                pf.segments = pr.segments;
                cell.plan_file = opt.plan_dir + "/" + experiment_detail::sanitize(d.name) +
                                 "-" + experiment_detail::sanitize(cell.label) + ".json";
                write_plan_file(cell.plan_file, pf);
            }
            break;
        }
        if (attempt == 1 && !oracle.varies_per_attempt()) {
            cell.short_circuited = true; // identical retries cannot change the outcome
            break;
        }
    }
    return cell;
}

inline ExperimentReport run_experiment(const Domain& d, const Problem& prototypical,
                                       const Problem& unsolvable, OraclePort& oracle,
                                       const ExperimentOptions& opt = {}) {
    ExperimentReport report;
    report.domain = d.name;
    for (const AblationSpec& spec : matrix_rows(d)) {
        const Problem& problem =
            spec.mode == AblationMode::Unsolvable ? unsolvable : prototypical;
        report.cells.push_back(run_cell(d, problem, spec, oracle, opt));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

inline std::string cell_text(const CellResult& cell) {
    std::string out = cell.solved ? "✓" : "X";
    out += "(";
    for (std::size_t i = 0; i < cell.attempts.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(cell.attempts[i].oracle_calls);
    }
    out += ")";
    if (cell.short_circuited && !cell.solved) out += "*";
    return out;
}

inline std::string render_report(const std::vector<ExperimentReport>& reports) {
    std::string out;
    for (const ExperimentReport& r : reports) {
        out += r.domain;
        out += "\n";
        std::size_t width = 0;
        auto display = [](const CellResult& c) {
            std::string label;
            switch (c.spec.mode) {
            case AblationMode::Full: label = "Full domain"; break;
            case AblationMode::Unsolvable: label = "Unsolvable"; break;
            case AblationMode::NoModel: label = "No model"; break;
            case AblationMode::NoMethods: label = c.spec.task; break;
            case AblationMode::MethodRemoved:
                label = "  M" + std::to_string(c.spec.method_ordinal);
                break;
            }
            return label;
        };
        for (const CellResult& c : r.cells) width = std::max(width, display(c).size());
        for (const CellResult& c : r.cells) {
            std::string label = display(c);
            out += "  " + label + std::string(width + 2 - label.size(), ' ') + cell_text(c);
            out += "\n";
        }
        out += "\n";
    }
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

inline nlohmann::json report_json(const std::vector<ExperimentReport>& reports) {
    nlohmann::json out;
    nlohmann::json domains = nlohmann::json::array();
    for (const ExperimentReport& r : reports) {
        nlohmann::json dj;
        dj["name"] = r.domain;
        nlohmann::json cells = nlohmann::json::array();
        for (const CellResult& c : r.cells) {
            nlohmann::json cj;
            cj["mode"] = ablation_mode_name(c.spec.mode);
            if (!c.spec.task.empty()) cj["task"] = c.spec.task;
            if (c.spec.method_ordinal > 0) cj["method"] = c.spec.method_ordinal;
            cj["label"] = c.label;
            cj["solved"] = c.solved;
            nlohmann::json attempts = nlohmann::json::array();
            for (const CellAttempt& a : c.attempts) {
                nlohmann::json aj;
                aj["attempt"] = a.attempt;
                aj["solved"] = a.solved;
                aj["oracle_calls"] = a.oracle_calls;
                if (!a.reason.empty()) aj["reason"] = a.reason;
                attempts.push_back(std::move(aj));
            }
            cj["attempts"] = std::move(attempts);
            if (c.short_circuited) cj["short_circuited"] = true;
            if (c.solved) cj["plan_length"] = c.plan_length;
            if (!c.plan_file.empty()) cj["plan_file"] = c.plan_file;
            cells.push_back(std::move(cj));
        }
        dj["cells"] = std::move(cells);
        domains.push_back(std::move(dj));
    }
    out["domains"] = std::move(domains);
    return out;
}

} // namespace verihtn
