#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "axm/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args) {
    const std::string cmd = std::string(AXM_CLI_PATH) + " " + args + " 2>/dev/null";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("axm_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const std::string kQuick = " --config " + std::string(AXM_TEST_DATA_DIR) + "/data/quick.json";

}  // namespace

TEST_CASE("eval --accurate -B 8 reports zero error") {
    const auto r = run("eval --accurate -B 8");
    CHECK(r.code == 0);
    const auto doc = nlohmann::json::parse(r.out);
    const auto& err = doc["layers"][0]["error"];
    CHECK(err["er"] == 0.0);
    CHECK(err["nmed"] == 0.0);
    CHECK(err["maxed"] == 0);
    CHECK(doc["layers"][0]["norm_power"] == 1.0);
}

TEST_CASE("usage and validation errors exit with 2") {
    CHECK(run("eval --bogus").code == 2);
    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("eval").code == 2);
    CHECK(run("eval --accurate -B 1").code == 2);
    CHECK(run("eval --theta 0.5,1.5 -B 4").code == 2);
    CHECK(run("run --lambda -3" + kQuick).code == 2);
    CHECK(run("run --lambda abc" + kQuick).code == 2);
    CHECK(run("map --theta 0.5 --candidates pp,xor").code == 2);
    CHECK(run("--help").code == 0);
}

TEST_CASE("eval --theta gives the closed-form anchor") {
    const auto r = run("eval --theta 0.5,0,0 -B 4");
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["layers"][0]["mse"] == 0.0625);
}

TEST_CASE("map -> emit -> eval, byte-identical on repetition") {
    const auto dir = scratch("map");
    const auto map = run("map -B 6 --theta 0.9,0.8,0.5,0.2 --out " + dir.string());
    REQUIRE(map.code == 0);
    CHECK(fs::exists(dir / "netlist.json"));
    CHECK(fs::exists(dir / "trace.json"));
    const auto e1 = run("eval --netlist " + (dir / "netlist.json").string());
    const auto e2 = run("eval --netlist " + (dir / "netlist.json").string());
    CHECK(e1.code == 0);
    CHECK(e1.out == e2.out);
    const auto v1 = run("emit --netlist " + (dir / "netlist.json").string() + " --module mul6");
    CHECK(v1.code == 0);
    CHECK(v1.out.find("module mul6 (") != std::string::npos);
    CHECK(v1.out == run("emit --netlist " + (dir / "netlist.json").string() + " --module mul6").out);
    CHECK(run("emit --netlist " + (dir / "netlist.json").string() + " --module 9x").code == 2);
}

TEST_CASE("explore -> map with tied layers") {
    const auto dir = scratch("explore");
    REQUIRE(run("explore --lambda 30 --tie-layers --out " + dir.string() + kQuick).code == 0);
    const auto theta = nlohmann::json::parse(axm::read_text(dir / "theta.json"));
    CHECK(theta["tie_layers"] == true);
    CHECK(theta["layers"][0]["theta"] == theta["layers"][1]["theta"]);
    CHECK(fs::exists(dir / "loss_trace.csv"));
    REQUIRE(run("map --theta " + (dir / "theta.json").string() + " --out " + dir.string()).code == 0);
    CHECK(fs::exists(dir / "netlist.json"));
}

TEST_CASE("run and sweep write their artifacts") {
    const auto a = scratch("run_a"), b = scratch("run_b");
    REQUIRE(run("run --lambda 10 --seed 5 --out " + a.string() + kQuick).code == 0);
    REQUIRE(run("run --lambda 10 --seed 5 --out " + b.string() + kQuick).code == 0);
    for (const char* f : {"theta.json", "netlist.json", "trace.json", "axm.v"}) {
        CAPTURE(f);
        CHECK(axm::read_text(a / f) == axm::read_text(b / f));
    }
    const auto s = scratch("sweep");
    REQUIRE(run("sweep --lambda 1,10,100 --jobs 2 --out " + s.string() + kQuick).code == 0);
    const auto csv = axm::read_text(s / "pareto.csv");
    CHECK(csv.rfind(axm::sweep_csv_header() + "\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(fs::exists(s / "pareto.svg"));
    CHECK(fs::exists(s / "lambda_2" / "axm.v"));
}
