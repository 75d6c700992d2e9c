#pragma once

// Plan files: JSON with the ordered task texts (verifier lines included) and
// the per-task segment boundaries, so a stored plan can be revalidated
// without rerunning the search.

#include <fstream>

#include <nlohmann/json.hpp>

#include "verihtn/domain.hpp"
#include "verihtn/loader.hpp"

namespace verihtn {

struct PlanFile {
    std::string domain;
    std::string problem;
    std::vector<std::string> task_texts; // top-level task list
    std::vector<GroundTask> plan;
    std::vector<std::size_t> segments;
};

inline nlohmann::json plan_file_json(const PlanFile& pf) {
    nlohmann::json j;
    j["domain"] = pf.domain;
    j["problem"] = pf.problem;
    j["tasks"] = pf.task_texts;
    nlohmann::json steps = nlohmann::json::array();
    for (const GroundTask& t : pf.plan) steps.push_back(t.text());
    j["plan"] = std::move(steps);
    j["segments"] = pf.segments;
    return j;
}

inline void write_plan_file(const std::string& path, const PlanFile& pf) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write plan file: " + path);
    out << plan_file_json(pf).dump(2) << "\n";
}

inline PlanFile read_plan_file(const std::string& path, const Domain& d) {
    nlohmann::json j = loader_detail::read_json_file(path);
    PlanFile pf;
    pf.domain = j.value("domain", "");
    pf.problem = j.value("problem", "");
    for (const nlohmann::json& t : j.value("tasks", nlohmann::json::array())) {
        pf.task_texts.push_back(t.get<std::string>());
    }
    if (!j.contains("plan") || !j.at("plan").is_array()) {
        throw LoadError(path + ": missing plan array");
    }
    for (const nlohmann::json& t : j.at("plan")) {
        try {
            pf.plan.push_back(parse_ground_task(t.get<std::string>(), d));
        } catch (const DomainError& e) {
            throw LoadError(path + ": " + e.what());
        }
    }
    for (const nlohmann::json& s : j.value("segments", nlohmann::json::array())) {
        pf.segments.push_back(s.get<std::size_t>());
    }
    return pf;
}

} // namespace verihtn
