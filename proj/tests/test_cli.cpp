// End-to-end checks of the command line front end: each subcommand is run as
// a child process and judged on its exit code and printed output.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include "support/test_paths.hpp"

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout and stderr interleaved
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(VERIHTN_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof(buf), pipe)) r.output.append(buf, n);
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("solve prints the plan and a call count, exit 0") {
    RunResult r = run_cli("solve --bundle logistics");
    CHECK(r.exit_code == 0);
    CHECK(r.output ==
          "drive(truck1,apt1,loc1)\n"
          "loadTruck(pck1,truck1,loc1)\n"
          "drive(truck1,loc1,apt1)\n"
          "unloadTruck(pck1,truck1,apt1)\n"
          "verify(truckTransport(pck1,loc1,apt1))\n"
          "loadPlane(pck1,plane1,apt1)\n"
          "fly(plane1,apt1,apt2)\n"
          "unloadPlane(pck1,plane1,apt2)\n"
          "verify(planeTransport(pck1,apt1,apt2))\n"
          "loadTruck(pck1,truck2,apt2)\n"
          "drive(truck2,apt2,loc2)\n"
          "unloadTruck(pck1,truck2,loc2)\n"
          "verify(truckTransport(pck1,apt2,loc2))\n"
          "verify(transportPackage(pck1,loc1,loc2))\n"
          "; oracle calls: 0\n");
}

TEST_CASE("bundles resolve by directory path as well as by name") {
    RunResult r = run_cli("solve --bundle " + testsupport::data_dir() + "/domains/household");
    CHECK(r.exit_code == 0);
    CHECK(contains(r.output, "verify(careHouse(rob1,house1))"));
}

TEST_CASE("no plan exits 1, an exhausted oracle budget exits 3") {
    RunResult adversarial =
        run_cli("solve --bundle logistics --problem unsolvable --oracle adversarial --seed 5");
    CHECK(adversarial.exit_code == 1);
    CHECK(contains(adversarial.output, "NOPLAN exhausted"));

    RunResult failing =
        run_cli("solve --bundle logistics --problem unsolvable --oracle failing");
    CHECK(failing.exit_code == 3);
    CHECK(contains(failing.output, "NOPLAN oracle-budget"));

    RunResult budget =
        run_cli("solve --bundle logistics --problem unsolvable --oracle scripted --budget 0");
    CHECK(budget.exit_code == 3);
    CHECK(contains(budget.output, "NOPLAN oracle-budget (oracle calls: 0)"));
}

TEST_CASE("load failures exit 2 with a diagnostic") {
    RunResult r = run_cli("solve --bundle nowhere");
    CHECK(r.exit_code == 2);
    CHECK(contains(r.output, "no bundle at"));
}

TEST_CASE("missing required flags are rejected by the argument parser") {
    RunResult r = run_cli("solve");
    CHECK(r.exit_code != 0);
    CHECK(contains(r.output, "--bundle"));
}

TEST_CASE("solve writes a plan file that validate accepts") {
    const std::string dir = testsupport::fresh_temp_dir("cli");
    const std::string plan = dir + "/plan.json";
    RunResult solve = run_cli("solve --bundle logistics --plan-out " + plan);
    REQUIRE(solve.exit_code == 0);
    REQUIRE(std::filesystem::exists(plan));

    RunResult validate = run_cli("validate --bundle logistics --plan " + plan);
    CHECK(validate.exit_code == 0);
    CHECK(contains(validate.output, "VALID (14 steps)"));

    SECTION("a tampered copy is rejected") {
        nlohmann::json j = nlohmann::json::parse(read_file(plan));
        j["plan"].erase(1); // drop the load; later steps become inapplicable
        const std::string bad = dir + "/bad.json";
        std::ofstream(bad) << j.dump(2);
        RunResult rejected = run_cli("validate --bundle logistics --plan " + bad);
        CHECK(rejected.exit_code == 1);
        CHECK(contains(rejected.output, "REJECTED"));
    }
    SECTION("without segments the validator searches for a split") {
        nlohmann::json j = nlohmann::json::parse(read_file(plan));
        j.erase("segments");
        const std::string loose = dir + "/loose.json";
        std::ofstream(loose) << j.dump(2);
        RunResult ok = run_cli("validate --bundle logistics --plan " + loose);
        CHECK(ok.exit_code == 0);
        CHECK(contains(ok.output, "VALID"));
    }
}

TEST_CASE("solve can leave a search trace behind") {
    const std::string trace = testsupport::fresh_temp_dir("cli") + "/trace.jsonl";
    RunResult r = run_cli("solve --bundle logistics --trace " + trace);
    REQUIRE(r.exit_code == 0);
    std::ifstream in(trace);
    REQUIRE(in);
    std::string first, line, last;
    REQUIRE(std::getline(in, first));
    last = first;
    while (std::getline(in, line)) {
        if (!line.empty()) last = line;
    }
    CHECK(nlohmann::json::parse(first).at("event") == "expand");
    nlohmann::json end = nlohmann::json::parse(last);
    CHECK(end.at("event") == "result");
    CHECK(end.at("status") == "plan");
}

TEST_CASE("experiment renders the matrix and can dump json") {
    const std::string json_out = testsupport::fresh_temp_dir("cli") + "/report.json";
    RunResult r = run_cli("experiment --bundle logistics rescue --json-out " + json_out);
    CHECK(r.exit_code == 0);
    CHECK(contains(r.output, "logistics"));
    CHECK(contains(r.output, "rescue"));
    CHECK(contains(r.output, "Full domain"));
    CHECK(contains(r.output, "✓(0)"));
    CHECK(contains(r.output, "X(1)*")); // logistics unsolvable, scripted short-circuit

    nlohmann::json j = nlohmann::json::parse(read_file(json_out));
    REQUIRE(j.at("domains").size() == 2);
    CHECK(j.at("domains").at(0).at("name") == "logistics");
    CHECK(j.at("domains").at(0).at("cells").size() == 14);
    CHECK(j.at("domains").at(1).at("name") == "rescue");
    CHECK(j.at("domains").at(1).at("cells").size() == 17);
}

TEST_CASE("prompts prints the exact texts sent to the oracle") {
    RunResult r = run_cli("prompts --bundle logistics "
                          "--task 'transportPackage(pck1,loc1,loc2)'");
    CHECK(r.exit_code == 0);
    CHECK(contains(r.output, "system: You are an AI planner specializing in HTN planning."));
    CHECK(contains(r.output, read_file(testsupport::golden_dir() + "/stage1_logistics.txt")));
    CHECK_FALSE(contains(r.output, "stage 2 user"));

    SECTION("a reply file adds the follow-up prompt") {
        const std::string reply = testsupport::fresh_temp_dir("cli") + "/reply.txt";
        std::ofstream(reply) << "first load, then drive";
        RunResult two = run_cli("prompts --bundle logistics "
                                "--task 'transportPackage(pck1,loc1,loc2)' --reply " + reply);
        CHECK(two.exit_code == 0);
        CHECK(contains(two.output,
                       ". You generated the following response:first load, then drive"));
    }
}

TEST_CASE("record and replay through the cli cache flags") {
    const std::string cache = testsupport::fresh_temp_dir("cli") + "/cache.jsonl";
    RunResult rec = run_cli("solve --bundle logistics --problem unsolvable "
                            "--oracle adversarial --seed 11 --record --cache " + cache);
    CHECK(rec.exit_code == 1);
    REQUIRE(std::filesystem::exists(cache));

    RunResult rep1 = run_cli("solve --bundle logistics --problem unsolvable "
                             "--oracle replay --cache " + cache);
    RunResult rep2 = run_cli("solve --bundle logistics --problem unsolvable "
                             "--oracle replay --cache " + cache);
    CHECK(rep1.exit_code == 1);
    CHECK(rep1.output == rec.output);
    CHECK(rep2.output == rep1.output);

    SECTION("replay without a cache flag is a usage error") {
        RunResult r = run_cli("solve --bundle logistics --oracle replay");
        CHECK(r.exit_code == 2);
        CHECK(contains(r.output, "replay oracle needs --cache"));
    }
}
