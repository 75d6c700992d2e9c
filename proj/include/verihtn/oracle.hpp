#pragma once

// Decomposition oracle port. When no hand-authored method applies to a
// compound task, the planner asks an OraclePort for a candidate decomposition
// into primitive tasks. Implementations here: scripted fixtures, a seeded
// adversarial generator, an always-failing stub, and a record/replay cache.
// The live HTTP-backed adapter lives in llm_client.hpp.

#include <cstdio>
#include <random>
#include <variant>

#include <nlohmann/json.hpp>

#include "verihtn/domain.hpp"
#include "verihtn/loader.hpp"

namespace verihtn {

// Bumped whenever prompt construction changes; part of the cache fingerprint.
inline constexpr const char* kPromptVersion = "v1";

inline constexpr const char* kSystemPrompt =
    "You are an AI planner specializing in HTN planning.";

struct OracleRequest {
    const Domain* domain = nullptr;
    GroundTask task;
    State state;
    std::vector<std::string> precondition_texts; // grounded, display form
    std::vector<std::string> effect_texts;
};

inline OracleRequest make_oracle_request(const Domain& d, const State& s, const GroundTask& t) {
    if (!d.is_compound(t.name)) {
        throw UnknownAction("oracle request for non-compound task: " + t.text());
    }
    const CompoundTaskSchema& schema = d.compound_tasks.at(t.name);
    OracleRequest req;
    req.domain = &d;
    req.task = t;
    req.state = s;
    req.precondition_texts = grounded_condition_texts(d, t, schema.preconditions);
    req.effect_texts = grounded_condition_texts(d, t, schema.effects);
    return req;
}

struct OracleResponse {
    std::vector<GroundTask> tasks; // primitive, schema valid
    std::string raw_stage1;
    std::string raw_stage2;
    std::string source; // "live", "cache", "scripted", "adversarial"
};

enum class OracleFailureKind { Unparseable, Transport, BudgetExhausted };

struct OracleFailure {
    OracleFailureKind kind = OracleFailureKind::Unparseable;
    std::string message;
};

inline const char* failure_kind_name(OracleFailureKind k) {
    switch (k) {
    case OracleFailureKind::Unparseable: return "unparseable";
    case OracleFailureKind::Transport: return "transport";
    case OracleFailureKind::BudgetExhausted: return "budget-exhausted";
    }
    return "unknown";
}

using OracleResult = std::variant<OracleResponse, OracleFailure>;

class OraclePort {
public:
    virtual ~OraclePort() = default;
    // attempt is 1-based; implementations may answer differently per attempt.
    virtual OracleResult decompose(const OracleRequest& req, int attempt) = 0;
    // False means retrying an identical request cannot change the answer.
    virtual bool varies_per_attempt() const = 0;
};

// ---------------------------------------------------------------------------
// Prompt construction (two chained conversations)
// ---------------------------------------------------------------------------

namespace prompt {

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline std::string condition_text(const Condition& c) {
    auto wrap = [](const Condition& ch) {
        std::string t = condition_text(ch);
        if (ch.kind == Condition::Kind::Lit) return t;
        return "(" + t + ")";
    };
    switch (c.kind) {
    case Condition::Kind::Lit:
        return literal_text(c.literal);
    case Condition::Kind::And:
    case Condition::Kind::Or: {
        std::vector<std::string> parts;
        for (const ConditionPtr& ch : c.children) parts.push_back(wrap(*ch));
        return join(parts, c.kind == Condition::Kind::And ? " and " : " or ");
    }
    case Condition::Kind::Not:
        return "not " + wrap(*c.children.front());
    case Condition::Kind::Forall:
    case Condition::Kind::Exists: {
        const char* q = c.kind == Condition::Kind::Forall ? "forall " : "exists ";
        return q + c.quant_var + ":" + c.quant_type + " (" + condition_text(*c.body) + ")";
    }
    }
    return "";
}

inline std::string pattern_text(const PatternAtom& p) {
    std::string out = p.predicate;
    out += '(';
    for (std::size_t i = 0; i < p.args.size(); ++i) {
        if (i) out += ',';
        out += p.args[i].name;
    }
    out += ')';
    return out;
}

// One line per action, deterministic declaration order.
inline std::string operators_text(const Domain& d) {
    std::vector<std::string> lines;
    for (const std::string& name : d.action_order) {
        const ActionSchema& a = d.actions.at(name);
        std::string head = name;
        head += '(';
        for (std::size_t i = 0; i < a.params.size(); ++i) {
            if (i) head += ',';
            head += a.params[i];
        }
        head += ')';
        std::vector<std::string> pre, add, del;
        for (const Literal& l : a.preconditions) pre.push_back(literal_text(l));
        for (const PatternAtom& p : a.add) add.push_back(pattern_text(p));
        for (const PatternAtom& p : a.del) del.push_back(pattern_text(p));
        std::string line = head + ": preconditions " + (pre.empty() ? "none" : join(pre, ", "));
        line += "; add " + (add.empty() ? "none" : join(add, ", "));
        line += "; delete " + (del.empty() ? "none" : join(del, ", "));
        lines.push_back(line);
    }
    return join(lines, "\n");
}

inline std::string axioms_text(const Domain& d) {
    if (d.axioms.empty()) return "none";
    std::vector<std::string> lines;
    for (const auto& [name, ax] : d.axioms) {
        std::string head = name;
        head += '(';
        for (std::size_t i = 0; i < ax.params.size(); ++i) {
            if (i) head += ',';
            head += ax.params[i];
        }
        head += ')';
        lines.push_back(head + ": " + condition_text(*ax.body));
    }
    return join(lines, "\n");
}

inline std::string stage1_user(const OracleRequest& req) {
    std::string s;
    s += "The domain is defined by the following operators (each defined as a  Python function):";
    s += operators_text(*req.domain);
    s += ". Some of the preconditions in the operators are defined by the following python functions: ";
    s += axioms_text(*req.domain);
    s += ". Provide the Sub-Tasks Breakdown for the following task: ";
    s += req.task.text();
    s += ". Here are the preconditions of the task: ";
    s += join(req.precondition_texts, ", ");
    s += ". Here are the effects of the task: ";
    s += join(req.effect_texts, ", ");
    s += ". Here is the current state: ";
    s += req.state.text();
    s += " Provide a complete and logically valid decomposition using the operators and functions provided.";
    s += " Do not invent new operators. Your output should be a step-by-step list of sub-tasks in logical order,";
    s += " using arguments ground in the current state.";
    return s;
}

inline std::string stage2_user(const OracleRequest& req, const std::string& stage1_reply) {
    std::string s;
    s += ". You generated the following response:";
    s += stage1_reply;
    s += "to my request to provide the Sub-Tasks Breakdown for the following task: ";
    s += req.task.text();
    s += ". I also gave you the preconditions of the task: ";
    s += join(req.precondition_texts, ", ");
    s += " and the effects of the task: ";
    s += join(req.effect_texts, ", ");
    s += ".and gave you the state: ";
    s += req.state.text();
    s += "and gave you the domain  defined by the following operators (each defined as a  Python function):";
    s += operators_text(*req.domain);
    s += ". I also gave you the following python functions which are called to check some preconditions and to check some effects: ";
    s += axioms_text(*req.domain);
    s += ". As a follow-up, can you map  the subtasks you generated with the operators I provided, please? please list the operator names as predicates,";
    s += " for the match you generate use only the predicate names of the operators and the arguments in your sub-task breakdown";
    s += " Always respond with a compact, machine-readable format using predicate form. ";
    s += " Avoid explanations or extra text unless explicitly requested. ";
    s += " When generating your output, list only the predicates in the form: ";
    s += " predicate(arg1, arg2, ...)";
    s += " where predicate is name of an operator I provided";
    s += " Separate predicates by newlines. Do not include explanations, headings, or descriptions.";
    s += " Use only the operator names I provided. Ensure that every predicate corresponds exactly";
    s += " to one of those operators and that all arguments match those in your sub-task breakdown";
    return s;
}

} // namespace prompt

// ---------------------------------------------------------------------------
// Request fingerprint (cache key prefix)
// ---------------------------------------------------------------------------

inline std::string request_fingerprint(const OracleRequest& req) {
    std::string blob = req.task.text();
    blob += '|';
    blob += req.state.text();
    blob += '|';
    blob += prompt::join(req.precondition_texts, ", ");
    blob += '|';
    blob += prompt::join(req.effect_texts, ", ");
    blob += '|';
    blob += prompt::operators_text(*req.domain);
    blob += '|';
    blob += prompt::axioms_text(*req.domain);
    blob += '|';
    blob += kPromptVersion;
    std::uint64_t h = detail::fnv1a64(blob);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// Reply parsing
// ---------------------------------------------------------------------------

enum class ParsePolicy { Strict, Salvage };

inline const char* parse_policy_name(ParsePolicy p) {
    return p == ParsePolicy::Strict ? "strict" : "salvage";
}

inline ParsePolicy parse_policy_from_name(const std::string& s) {
    if (s == "strict") return ParsePolicy::Strict;
    if (s == "salvage") return ParsePolicy::Salvage;
    throw DomainError("unknown parse policy: " + s);
}

enum class LineRejection { Malformed, UnknownOperator, NotPrimitive, ArityMismatch, UnknownConstant };

inline const char* rejection_name(LineRejection r) {
    switch (r) {
    case LineRejection::Malformed: return "malformed";
    case LineRejection::UnknownOperator: return "unknown-operator";
    case LineRejection::NotPrimitive: return "not-primitive";
    case LineRejection::ArityMismatch: return "arity-mismatch";
    case LineRejection::UnknownConstant: return "unknown-constant";
    }
    return "unknown";
}

struct RejectedLine {
    std::string text;
    LineRejection reason = LineRejection::Malformed;
};

struct ParseReport {
    std::vector<GroundTask> tasks;
    std::vector<RejectedLine> rejected;

    bool accepted(ParsePolicy policy) const {
        if (tasks.empty()) return false;
        if (policy == ParsePolicy::Strict && !rejected.empty()) return false;
        return true;
    }
};

namespace oracle_detail {

// Strips list decoration an LLM tends to wrap around predicate lines:
// bullets, numbering, backticks, trailing punctuation.
inline std::string strip_decoration(std::string s) {
    s = detail::trim(s);
    while (!s.empty() && (s.front() == '`' || s.front() == '-' || s.front() == '*')) {
        s.erase(s.begin());
        s = detail::trim(s);
    }
    std::size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) {
        s = s.substr(i + 1);
    }
    s = detail::trim(s);
    while (!s.empty() && (s.back() == '`' || s.back() == '.' || s.back() == ',' || s.back() == ';')) {
        s.pop_back();
    }
    return detail::trim(s);
}

} // namespace oracle_detail

// Parses a stage-two reply line by line into ground primitive tasks. Every
// non-empty line is either accepted or recorded with a rejection reason; the
// caller applies the policy via ParseReport::accepted.
inline ParseReport parse_oracle_reply(const Domain& d, const std::string& text) {
    ParseReport report;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string line = nl == std::string::npos ? text.substr(pos)
                                                   : text.substr(pos, nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        line = oracle_detail::strip_decoration(line);
        if (line.empty()) continue;
        std::string name;
        std::vector<std::string> args;
        try {
            std::tie(name, args) = detail::split_call(line);
        } catch (const DomainError&) {
            report.rejected.push_back({line, LineRejection::Malformed});
            continue;
        }
        if (d.is_compound(name)) {
            report.rejected.push_back({line, LineRejection::NotPrimitive});
            continue;
        }
        if (!d.is_action(name)) {
            report.rejected.push_back({line, LineRejection::UnknownOperator});
            continue;
        }
        if (d.actions.at(name).params.size() != args.size()) {
            report.rejected.push_back({line, LineRejection::ArityMismatch});
            continue;
        }
        bool bad_constant = false;
        for (const std::string& a : args) {
            if (!d.has_constant(a)) bad_constant = true;
        }
        if (bad_constant) {
            report.rejected.push_back({line, LineRejection::UnknownConstant});
            continue;
        }
        report.tasks.push_back(GroundTask{name, args, TaskKind::Primitive});
    }
    return report;
}

// ---------------------------------------------------------------------------
// Scripted oracle: fixture file keyed by task name plus sorted arguments
// ---------------------------------------------------------------------------

inline std::string scripted_key(const GroundTask& t) {
    std::vector<std::string> args = t.args;
    std::sort(args.begin(), args.end());
    return t.name + "(" + prompt::join(args, ",") + ")";
}

class ScriptedOracle : public OraclePort {
public:
    ScriptedOracle() = default;

    static ScriptedOracle from_file(const std::string& path, const Domain& d) {
        nlohmann::json j = loader_detail::read_json_file(path);
        return from_json(j, d, path);
    }

    static ScriptedOracle from_json(const nlohmann::json& j, const Domain& d,
                                    const std::string& ctx) {
        ScriptedOracle o;
        if (!j.contains("decompositions") || !j.at("decompositions").is_array()) {
            throw LoadError(ctx + ": missing decompositions array");
        }
        for (const nlohmann::json& e : j.at("decompositions")) {
            GroundTask head;
            try {
                head = parse_ground_task(e.at("task").get<std::string>(), d);
            } catch (const DomainError& err) {
                throw LoadError(ctx + ": " + err.what());
            }
            if (head.kind != TaskKind::Compound) {
                throw LoadError(ctx + ": fixture task '" + head.text() + "' is not compound");
            }
            std::vector<GroundTask> subtasks;
            for (const nlohmann::json& sj : e.at("subtasks")) {
                GroundTask sub;
                try {
                    sub = parse_ground_task(sj.get<std::string>(), d);
                } catch (const DomainError& err) {
                    throw LoadError(ctx + ": " + err.what());
                }
                if (sub.kind != TaskKind::Primitive) {
                    throw LoadError(ctx + ": fixture subtask '" + sub.text() + "' is not primitive");
                }
                subtasks.push_back(std::move(sub));
            }
            std::string key = scripted_key(head);
            if (o.entries_.count(key)) {
                throw LoadError(ctx + ": duplicate fixture entry '" + key + "'");
            }
            o.entries_[key] = std::move(subtasks);
        }
        return o;
    }

    void add(const GroundTask& head, std::vector<GroundTask> subtasks) {
        entries_[scripted_key(head)] = std::move(subtasks);
    }

    OracleResult decompose(const OracleRequest& req, int) override {
        auto it = entries_.find(scripted_key(req.task));
        if (it == entries_.end()) {
            return OracleFailure{OracleFailureKind::Unparseable,
                                 "no fixture entry for " + scripted_key(req.task)};
        }
        OracleResponse resp;
        resp.tasks = it->second;
        std::vector<std::string> lines;
        for (const GroundTask& t : resp.tasks) lines.push_back(t.text());
        resp.raw_stage2 = prompt::join(lines, "\n");
        resp.source = "scripted";
        return resp;
    }

    bool varies_per_attempt() const override { return false; }

private:
    std::map<std::string, std::vector<GroundTask>> entries_;
};

// ---------------------------------------------------------------------------
// Adversarial oracle: schema-valid but semantically random decompositions
// ---------------------------------------------------------------------------

class AdversarialOracle : public OraclePort {
public:
    explicit AdversarialOracle(std::uint64_t seed) : seed_(seed) {}

    OracleResult decompose(const OracleRequest& req, int attempt) override {
        const Domain& d = *req.domain;
        if (d.action_order.empty() || d.constants.empty()) {
            return OracleFailure{OracleFailureKind::Unparseable, "domain has no actions"};
        }
        // Derived seed makes the reply a function of (seed, request, attempt)
        // alone, independent of call order.
        std::uint64_t mix = seed_;
        mix ^= detail::fnv1a64(request_fingerprint(req));
        mix ^= 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(attempt);
        std::mt19937_64 rng(mix);
        // Modulo reduction keeps replies identical across standard libraries.
        std::size_t count = static_cast<std::size_t>(rng() % 5);
        OracleResponse resp;
        for (std::size_t i = 0; i < count; ++i) {
            const std::string& name =
                d.action_order[static_cast<std::size_t>(rng() % d.action_order.size())];
            const ActionSchema& schema = d.actions.at(name);
            GroundTask t;
            t.name = name;
            t.kind = TaskKind::Primitive;
            for (std::size_t p = 0; p < schema.params.size(); ++p) {
                t.args.push_back(
                    d.constants[static_cast<std::size_t>(rng() % d.constants.size())]);
            }
            resp.tasks.push_back(std::move(t));
        }
        std::vector<std::string> lines;
        for (const GroundTask& t : resp.tasks) lines.push_back(t.text());
        resp.raw_stage2 = prompt::join(lines, "\n");
        resp.source = "adversarial";
        return resp;
    }

    bool varies_per_attempt() const override { return true; }

private:
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Failing oracle: models an unavailable or refused oracle
// ---------------------------------------------------------------------------

class FailingOracle : public OraclePort {
public:
    OracleResult decompose(const OracleRequest&, int) override {
        return OracleFailure{OracleFailureKind::BudgetExhausted, "oracle disabled"};
    }
    bool varies_per_attempt() const override { return false; }
};

// ---------------------------------------------------------------------------
// Exchange cache: append-only JSONL record/replay of oracle exchanges
// ---------------------------------------------------------------------------

class ExchangeCache {
public:
    ExchangeCache() = default;

    static ExchangeCache load(const std::string& path) {
        ExchangeCache c;
        c.path_ = path;
        std::ifstream in(path);
        if (!in) return c; // a missing cache file is an empty cache
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (detail::trim(line).empty()) continue;
            nlohmann::json rec;
            try {
                rec = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw LoadError(path + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (!rec.contains("key")) {
                throw LoadError(path + ":" + std::to_string(lineno) + ": record has no key");
            }
            c.records_[rec.at("key").get<std::string>()] = rec;
        }
        return c;
    }

    bool has(const std::string& key) const { return records_.count(key) != 0; }

    const nlohmann::json& get(const std::string& key) const { return records_.at(key); }

    // Appends to the backing file immediately so an interrupted run keeps
    // every exchange it paid for.
    void put(const std::string& key, nlohmann::json rec) {
        rec["key"] = key;
        records_[key] = rec;
        if (!path_.empty()) {
            std::ofstream out(path_, std::ios::app);
            if (!out) throw DomainError("cannot append to cache file: " + path_);
            out << records_[key].dump() << "\n";
        }
    }

    std::size_t size() const { return records_.size(); }

private:
    std::string path_;
    std::map<std::string, nlohmann::json> records_;
};

// Record/replay wrapper. On a cache hit the stored stage-two reply is parsed
// again locally; on a miss the inner oracle (when present) answers and the
// exchange is recorded. Without an inner oracle a miss is a transport failure.
class CachedOracle : public OraclePort {
public:
    CachedOracle(ExchangeCache& cache, OraclePort* inner, ParsePolicy policy,
                 bool inner_varies)
        : cache_(cache), inner_(inner), policy_(policy), inner_varies_(inner_varies) {}

    OracleResult decompose(const OracleRequest& req, int attempt) override {
        const std::string key = request_fingerprint(req) + ":" + std::to_string(attempt);
        if (cache_.has(key)) {
            const nlohmann::json& rec = cache_.get(key);
            if (rec.contains("failure")) {
                OracleFailure f;
                f.kind = OracleFailureKind::Transport;
                const std::string kind = rec.at("failure").get<std::string>();
                if (kind == "unparseable") f.kind = OracleFailureKind::Unparseable;
                if (kind == "budget-exhausted") f.kind = OracleFailureKind::BudgetExhausted;
                f.message = rec.value("message", "cached failure");
                return f;
            }
            OracleResponse resp;
            resp.raw_stage1 = rec.value("stage1_reply", "");
            resp.raw_stage2 = rec.value("stage2_reply", "");
            resp.source = "cache";
            if (rec.contains("tasks")) {
                // Recorded task list replays exactly, including empty replies.
                for (const nlohmann::json& tj : rec.at("tasks")) {
                    GroundTask t;
                    try {
                        t = parse_ground_task(tj.get<std::string>(), *req.domain);
                    } catch (const DomainError& e) {
                        return OracleFailure{OracleFailureKind::Unparseable,
                                             std::string("cached task rejected: ") + e.what()};
                    }
                    if (t.kind != TaskKind::Primitive) {
                        return OracleFailure{OracleFailureKind::Unparseable,
                                             "cached task is not primitive: " + t.text()};
                    }
                    resp.tasks.push_back(std::move(t));
                }
                return resp;
            }
            // Hand-written caches may carry only raw replies; parse them.
            ParseReport report = parse_oracle_reply(*req.domain, resp.raw_stage2);
            if (!report.accepted(policy_)) {
                return OracleFailure{OracleFailureKind::Unparseable,
                                     "cached reply failed to parse under " +
                                         std::string(parse_policy_name(policy_)) + " policy"};
            }
            resp.tasks = std::move(report.tasks);
            return resp;
        }
        if (!inner_) {
            return OracleFailure{OracleFailureKind::Transport, "cache miss for " + key};
        }
        OracleResult result = inner_->decompose(req, attempt);
        nlohmann::json rec;
        rec["task"] = req.task.text();
        rec["state"] = req.state.text();
        rec["attempt"] = attempt;
        rec["prompt_version"] = kPromptVersion;
        if (const OracleResponse* resp = std::get_if<OracleResponse>(&result)) {
            rec["stage1_reply"] = resp->raw_stage1;
            rec["stage2_reply"] = resp->raw_stage2;
            rec["source"] = resp->source;
            nlohmann::json tasks = nlohmann::json::array();
            for (const GroundTask& t : resp->tasks) tasks.push_back(t.text());
            rec["tasks"] = std::move(tasks);
        } else {
            const OracleFailure& f = std::get<OracleFailure>(result);
            rec["failure"] = failure_kind_name(f.kind);
            rec["message"] = f.message;
        }
        cache_.put(key, std::move(rec));
        return result;
    }

    bool varies_per_attempt() const override { return inner_varies_; }

private:
    ExchangeCache& cache_;
    OraclePort* inner_;
    ParsePolicy policy_;
    bool inner_varies_;
};

} // namespace verihtn
