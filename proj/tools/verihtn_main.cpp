// Command line front end: solve problems, run the ablation matrix, validate
// stored plans, and print the oracle prompts for a given task.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "verihtn/llm_transport.hpp"
#include "verihtn/verihtn.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNoPlan = 1;      // also: plan rejected by the validator
constexpr int kExitLoadError = 2;   // bad files, bad flags
constexpr int kExitOracleDown = 3;  // no plan and the oracle was the bottleneck

struct OracleFlags {
    std::string kind = "scripted";
    std::uint64_t seed = 1;
    std::string cache_file;
    bool record = false;
    std::string policy = "salvage";
};

void add_oracle_flags(CLI::App* cmd, OracleFlags& f) {
    cmd->add_option("--oracle", f.kind, "Oracle backend: scripted, adversarial, failing, live, replay")
        ->check(CLI::IsMember({"scripted", "adversarial", "failing", "live", "replay"}));
    cmd->add_option("--seed", f.seed, "Adversarial oracle seed");
    cmd->add_option("--cache", f.cache_file, "Exchange cache file (JSONL)");
    cmd->add_flag("--record", f.record, "Record oracle exchanges into --cache");
    cmd->add_option("--policy", f.policy, "Reply parse policy: strict or salvage")
        ->check(CLI::IsMember({"strict", "salvage"}));
}

// Owns whichever oracle stack the flags select.
struct OracleStack {
    std::unique_ptr<verihtn::OraclePort> base;
    std::unique_ptr<verihtn::ExchangeCache> cache;
    std::unique_ptr<verihtn::OraclePort> cached;

    verihtn::OraclePort& top() { return cached ? *cached : *base; }
};

OracleStack build_oracle(const OracleFlags& f, const verihtn::DomainBundle& bundle) {
    OracleStack s;
    bool base_varies = false;
    if (f.kind == "scripted") {
        s.base = std::make_unique<verihtn::ScriptedOracle>(bundle.scripted);
    } else if (f.kind == "adversarial") {
        s.base = std::make_unique<verihtn::AdversarialOracle>(f.seed);
        base_varies = true;
    } else if (f.kind == "failing") {
        s.base = std::make_unique<verihtn::FailingOracle>();
    } else if (f.kind == "live") {
        verihtn::LiveConfig cfg = verihtn::live_config_from_env();
        cfg.policy = verihtn::parse_policy_from_name(f.policy);
        if (cfg.api_key.empty()) {
            throw verihtn::LoadError(
                "live oracle needs an api key (VERIHTN_API_KEY or OPENAI_API_KEY)");
        }
        s.base = std::make_unique<verihtn::LlmOracle>(cfg, verihtn::make_http_transport(cfg));
        base_varies = true;
    } else if (f.kind == "replay") {
        if (f.cache_file.empty()) {
            throw verihtn::LoadError("replay oracle needs --cache");
        }
    } else {
        throw verihtn::LoadError("unknown oracle kind: " + f.kind);
    }
    const bool wrap = !f.cache_file.empty() && (f.record || f.kind == "replay");
    if (wrap) {
        s.cache = std::make_unique<verihtn::ExchangeCache>(
            verihtn::ExchangeCache::load(f.cache_file));
        s.cached = std::make_unique<verihtn::CachedOracle>(
            *s.cache, s.base.get(), verihtn::parse_policy_from_name(f.policy),
            /*inner_varies=*/true);
    }
    return s;
}

std::string default_data_dir() {
#ifdef VERIHTN_DEFAULT_DATA_DIR
    return VERIHTN_DEFAULT_DATA_DIR;
#else
    return "data";
#endif
}

// A bundle argument is either a directory path or a bare name under the
// data directory.
std::string resolve_bundle_dir(const std::string& arg) {
    namespace fs = std::filesystem;
    if (fs::exists(fs::path(arg) / "bundle.json")) return arg;
    std::string by_name = default_data_dir() + "/domains/" + arg;
    if (fs::exists(fs::path(by_name) / "bundle.json")) return by_name;
    throw verihtn::LoadError("no bundle at '" + arg + "' or '" + by_name + "'");
}

verihtn::Problem resolve_problem(const verihtn::DomainBundle& bundle, const std::string& arg) {
    if (arg.empty() || arg == "prototypical") return bundle.prototypical;
    if (arg == "unsolvable") return bundle.unsolvable;
    return verihtn::load_problem(arg, bundle.domain);
}

int cmd_solve(const std::string& bundle_arg, const std::string& problem_arg,
              const OracleFlags& oracle_flags, const verihtn::Limits& limits,
              const std::string& trace_file, const std::string& plan_out) {
    verihtn::DomainBundle bundle = verihtn::load_bundle(resolve_bundle_dir(bundle_arg));
    verihtn::Problem problem = resolve_problem(bundle, problem_arg);
    OracleStack oracle = build_oracle(oracle_flags, bundle);

    std::unique_ptr<verihtn::JsonlTraceWriter> trace;
    if (!trace_file.empty()) trace = std::make_unique<verihtn::JsonlTraceWriter>(trace_file);

    verihtn::PlanResult pr = verihtn::plan(bundle.domain, problem.initial, problem.tasks,
                                           bundle.domain.methods, oracle.top(), limits,
                                           trace.get());
    if (!pr.plan) {
        std::cout << "NOPLAN " << verihtn::reason_name(pr.reason)
                  << " (oracle calls: " << pr.stats.oracle_calls << ")\n";
        return pr.reason == verihtn::NoPlanReason::OracleBudget ? kExitOracleDown : kExitNoPlan;
    }
    auto rejection = verihtn::validation::check(bundle.domain, problem.initial, problem.tasks,
                                                *pr.plan, pr.segments);
    if (rejection) {
        std::cout << "REJECTED " << verihtn::validation::reject_kind_name(rejection->kind)
                  << ": " << rejection->detail << "\n";
        return kExitNoPlan;
    }
    for (const verihtn::GroundTask& t : *pr.plan) std::cout << t.text() << "\n";
    std::cout << "; oracle calls: " << pr.stats.oracle_calls << "\n";
    if (!plan_out.empty()) {
        verihtn::PlanFile pf;
        pf.domain = bundle.domain.name;
        pf.problem = problem.name;
        for (const verihtn::GroundTask& t : problem.tasks) pf.task_texts.push_back(t.text());
        pf.plan = *pr.plan;
        pf.segments = pr.segments;
        verihtn::write_plan_file(plan_out, pf);
    }
    return kExitOk;
}

int cmd_experiment(const std::vector<std::string>& bundle_args, const OracleFlags& oracle_flags,
                   const verihtn::ExperimentOptions& opt_in, const std::string& report_out,
                   const std::string& json_out) {
    verihtn::ExperimentOptions opt = opt_in;
    std::vector<verihtn::ExperimentReport> reports;
    for (const std::string& arg : bundle_args) {
        verihtn::DomainBundle bundle = verihtn::load_bundle(resolve_bundle_dir(arg));
        OracleStack oracle = build_oracle(oracle_flags, bundle);
        reports.push_back(verihtn::run_experiment(bundle.domain, bundle.prototypical,
                                                  bundle.unsolvable, oracle.top(), opt));
    }
    std::string table = verihtn::render_report(reports);
    std::cout << table << "\n";
    if (!report_out.empty()) {
        std::ofstream out(report_out);
        out << table << "\n";
    }
    if (!json_out.empty()) {
        std::ofstream out(json_out);
        out << verihtn::report_json(reports).dump(2) << "\n";
    }
    return kExitOk;
}

int cmd_validate(const std::string& bundle_arg, const std::string& problem_arg,
                 const std::string& plan_path) {
    verihtn::DomainBundle bundle = verihtn::load_bundle(resolve_bundle_dir(bundle_arg));
    verihtn::Problem problem = resolve_problem(bundle, problem_arg);
    verihtn::PlanFile pf = verihtn::read_plan_file(plan_path, bundle.domain);
    std::optional<verihtn::validation::Rejection> rejection;
    if (!pf.segments.empty()) {
        rejection = verihtn::validation::check(bundle.domain, problem.initial, problem.tasks,
                                               pf.plan, pf.segments);
    } else if (!verihtn::validation::satisfies_any_split(bundle.domain, problem.initial,
                                                         problem.tasks, pf.plan)) {
        rejection = verihtn::validation::Rejection{
            verihtn::validation::RejectKind::PrefixMismatch, 0,
            "no segmentation satisfies the task list"};
    }
    if (rejection) {
        std::cout << "REJECTED " << verihtn::validation::reject_kind_name(rejection->kind)
                  << ": " << rejection->detail << "\n";
        return kExitNoPlan;
    }
    std::cout << "VALID (" << pf.plan.size() << " steps)\n";
    return kExitOk;
}

int cmd_prompts(const std::string& bundle_arg, const std::string& problem_arg,
                const std::string& task_text, const std::string& reply_file) {
    verihtn::DomainBundle bundle = verihtn::load_bundle(resolve_bundle_dir(bundle_arg));
    verihtn::Problem problem = resolve_problem(bundle, problem_arg);
    verihtn::GroundTask task = verihtn::parse_ground_task(task_text, bundle.domain);
    verihtn::OracleRequest req =
        verihtn::make_oracle_request(bundle.domain, problem.initial, task);
    std::cout << "system: " << verihtn::kSystemPrompt << "\n\n";
    std::cout << "stage 1 user:\n" << verihtn::prompt::stage1_user(req) << "\n";
    if (!reply_file.empty()) {
        std::ifstream in(reply_file);
        if (!in) throw verihtn::LoadError("cannot open reply file: " + reply_file);
        std::string reply((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        std::cout << "\nstage 2 user:\n" << verihtn::prompt::stage2_user(req, reply) << "\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"HTN planner with verified oracle decompositions"};
    app.require_subcommand(1);

    OracleFlags oracle_flags;
    verihtn::Limits limits;
    std::string bundle_arg, problem_arg, trace_file, plan_out;

    CLI::App* solve = app.add_subcommand("solve", "Plan a problem and print the plan");
    solve->add_option("--bundle", bundle_arg, "Bundle directory or name")->required();
    solve->add_option("--problem", problem_arg,
                      "prototypical, unsolvable, or a problem file path");
    add_oracle_flags(solve, oracle_flags);
    solve->add_option("--depth", limits.max_depth, "Max decomposition depth");
    solve->add_option("--budget", limits.oracle_budget, "Max oracle queries");
    solve->add_option("--attempt", limits.oracle_attempt, "Oracle attempt number");
    solve->add_option("--trace", trace_file, "Write a JSONL search trace");
    solve->add_option("--plan-out", plan_out, "Write the plan file here");

    std::vector<std::string> bundle_args;
    verihtn::ExperimentOptions exp_opt;
    std::string report_out, json_out;
    CLI::App* experiment = app.add_subcommand("experiment", "Run the ablation matrix");
    experiment->add_option("--bundle", bundle_args, "Bundle directories or names")->required();
    add_oracle_flags(experiment, oracle_flags);
    experiment->add_option("--attempts", exp_opt.max_attempts, "Attempts per cell");
    experiment->add_option("--depth", exp_opt.limits.max_depth, "Max decomposition depth");
    experiment->add_option("--budget", exp_opt.limits.oracle_budget, "Max oracle queries");
    experiment->add_option("--plan-dir", exp_opt.plan_dir, "Directory for solved plan files");
    experiment->add_option("--report-out", report_out, "Write the text report here");
    experiment->add_option("--json-out", json_out, "Write the JSON report here");

    std::string plan_path;
    CLI::App* validate = app.add_subcommand("validate", "Check a stored plan file");
    validate->add_option("--bundle", bundle_arg, "Bundle directory or name")->required();
    validate->add_option("--problem", problem_arg,
                         "prototypical, unsolvable, or a problem file path");
    validate->add_option("--plan", plan_path, "Plan file to check")->required();

    std::string task_text, reply_file;
    CLI::App* prompts = app.add_subcommand("prompts", "Print the oracle prompts for a task");
    prompts->add_option("--bundle", bundle_arg, "Bundle directory or name")->required();
    prompts->add_option("--problem", problem_arg,
                        "prototypical, unsolvable, or a problem file path");
    prompts->add_option("--task", task_text, "Compound task, e.g. name(a,b)")->required();
    prompts->add_option("--reply", reply_file,
                        "File with a stage-one reply; also prints the stage-two prompt");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            return cmd_solve(bundle_arg, problem_arg, oracle_flags, limits, trace_file,
                             plan_out);
        }
        if (experiment->parsed()) {
            return cmd_experiment(bundle_args, oracle_flags, exp_opt, report_out, json_out);
        }
        if (validate->parsed()) {
            return cmd_validate(bundle_arg, problem_arg, plan_path);
        }
        if (prompts->parsed()) {
            return cmd_prompts(bundle_arg, problem_arg, task_text, reply_file);
        }
    } catch (const verihtn::SoundnessViolation& e) {
        std::cerr << "soundness violation: " << e.what() << "\n";
        return kExitLoadError;
    } catch (const verihtn::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitLoadError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitLoadError;
    }
    return kExitLoadError;
}
