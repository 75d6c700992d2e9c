#pragma once

// A domain bundle directory holds the domain, a prototypical problem that
// exercises every compound task, an unsolvable variant of it, and a scripted
// oracle fixture covering the decompositions the domain's methods produce.

#include "verihtn/loader.hpp"
#include "verihtn/oracle.hpp"

namespace verihtn {

struct DomainBundle {
    std::string name;
    std::string dir;
    Domain domain;
    Problem prototypical;
    Problem unsolvable;
    ScriptedOracle scripted;
};

inline DomainBundle load_bundle(const std::string& dir) {
    nlohmann::json j = loader_detail::read_json_file(dir + "/bundle.json");
    DomainBundle b;
    b.dir = dir;
    b.name = j.value("name", "unnamed");
    b.domain = load_domain(dir + "/" + j.value("domain", "domain.json"));
    b.prototypical = load_problem(dir + "/" + j.value("prototypical", "prototypical.json"),
                                  b.domain);
    b.unsolvable = load_problem(dir + "/" + j.value("unsolvable", "unsolvable.json"), b.domain);
    b.scripted = ScriptedOracle::from_file(dir + "/" + j.value("oracle_fixture",
                                                               "oracle_fixture.json"),
                                           b.domain);
    return b;
}

} // namespace verihtn
