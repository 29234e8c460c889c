#include "doctest.h"

#include <filesystem>

#include "axm/error.hpp"
#include "axm/pipeline.hpp"

using namespace axm;
namespace fs = std::filesystem;

namespace {

RunSpec quick_spec() {
    RunSpec s;
    s.data.blobs.n_train = 256;
    s.data.blobs.n_test = 128;
    s.model.hidden = {16};
    s.train.epochs_pretrain = 5;
    s.train.epochs_phase1 = 3;
    s.train.epochs_phase3 = 2;
    return s;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("axm_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("sweep CSV schema") {
    CHECK(sweep_csv_header() == "lambda,accuracy,norm_power,final_mse,l_power,status,theta");
    const std::vector<SweepRow> rows{{1.0, "ok", 0.5, 0.75, 2.0, 0.25, "1 0|1 0"}};
    CHECK(sweep_csv(rows) == "lambda,accuracy,norm_power,final_mse,l_power,status,theta\n"
                             "1,0.500000,0.750000,2.000000,0.250000,ok,1 0|1 0\n");
    const auto svg = sweep_svg(rows);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("<circle") != std::string::npos);
}

TEST_CASE("sweep: one row per lambda, failures isolated, jobs do not change output") {
    const auto spec = quick_spec();
    const std::vector<double> one{5.0};
    CHECK(run_sweep(spec, one, 1, 1).size() == 1);

    const std::vector<double> lambdas{0.0, -1.0, 50.0};
    const auto serial = run_sweep(spec, lambdas, 1, 1);
    REQUIRE(serial.size() == 3);
    CHECK(serial[0].status == "ok");
    CHECK(serial[1].status.rfind("error:", 0) == 0);
    CHECK(serial[1].status.find(',') == std::string::npos);
    CHECK(serial[2].status == "ok");
    CHECK(serial[2].l_power < serial[0].l_power);
    const auto parallel = run_sweep(spec, lambdas, 1, 3);
    CHECK(sweep_csv(parallel) == sweep_csv(serial));
}

TEST_CASE("pipeline artifacts are byte-identical under a fixed seed") {
    const auto spec = quick_spec();
    const auto a = scratch("run_a"), b = scratch("run_b");
    write_pipeline_artifacts(run_pipeline(spec, 20.0, 3), a);
    write_pipeline_artifacts(run_pipeline(spec, 20.0, 3), b);
    for (const char* f : {"theta.json", "netlist.json", "trace.json", "axm.v", "loss_trace.csv", "report.json", "checkpoint.json"}) {
        CAPTURE(f);
        CHECK(read_text(a / f) == read_text(b / f));
    }
}

TEST_CASE("artifacts reload into the same netlists and theta") {
    const auto spec = quick_spec();
    const auto r = run_pipeline(spec, 20.0, 4);
    const auto nets = netlists_from_document(netlist_document(r.layers));
    REQUIRE(nets.size() == r.layers.size());
    for (std::size_t k = 0; k < nets.size(); ++k) {
        CHECK(nets[k].first == r.layers[k].layer);
        CHECK(nets[k].second == r.layers[k].mapped.netlist);
        CHECK(finalize(nets[k].second) == r.layers[k].finalized);
    }
    CHECK(theta_from_document(theta_document(8, false, r.theta)) == r.theta);
    const auto v = verilog_document(nets, "axm", VerilogStyle::kAssign);
    CHECK(v.find("module axm_l0 (") != std::string::npos);
    CHECK(v.find("module axm_l1 (") != std::string::npos);
    CHECK(r.accuracy_final >= 0.0);
    CHECK(r.norm_power <= 1.0);
}

TEST_CASE("tie_layers gives one theta for every layer") {
    auto spec = quick_spec();
    spec.train.tie_layers = true;
    const auto r = run_pipeline(spec, 30.0, 2);
    REQUIRE(r.theta.size() == 2);
    CHECK(r.theta[0] == r.theta[1]);
    CHECK(r.layers[0].mapped.netlist == r.layers[1].mapped.netlist);
    const auto doc = theta_document(8, true, r.theta);
    CHECK(doc["layers"][0]["theta"] == doc["layers"][1]["theta"]);
}

TEST_CASE("conv-toy pipeline and csv data") {
    auto spec = quick_spec();
    spec.model.arch = "conv-toy";
    spec.model.hidden = {8};
    CHECK(run_pipeline(spec, 10.0, 1).layers.size() == 3);

    auto csv = quick_spec();
    csv.data.kind = "csv";
    csv.data.path = std::string(AXM_TEST_DATA_DIR) + "/data/tiny.csv";
    csv.model.hidden = {4};
    CHECK(run_pipeline(csv, 1.0, 1).layers.size() == 2);
}

TEST_CASE("run spec parsing") {
    const auto doc = nlohmann::json::parse(R"({
        "bits": 6, "p_columns": 5, "lambdas": [0, 10], "seed": 9, "tie_layers": true,
        "candidates": "pp,carry", "order": "compressors-first",
        "cost_table": {"and": 1, "ha": 2, "fa": 4},
        "model": {"arch": "mlp", "hidden": [8, 8]},
        "data": {"kind": "csv", "path": "d.csv", "test_fraction": 0.5},
        "train": {"epochs_phase1": 2, "lr_theta": 0.01}
    })");
    const auto s = run_spec_from_json(doc, "/base");
    CHECK(s.bits == 6);
    CHECK(s.train.p_columns == 5);
    CHECK(s.lambdas == std::vector<double>{0, 10});
    CHECK(s.train.seed == 9);
    CHECK(s.train.tie_layers);
    CHECK(s.candidates.to_string() == "pp,carry");
    CHECK(s.order == OrderPolicy::kCompressorsFirst);
    CHECK(s.cost.base.full_adder == 4);
    CHECK(s.model.hidden == std::vector<std::size_t>{8, 8});
    CHECK(s.data.path == fs::path("/base/d.csv"));
    CHECK(s.train.epochs_phase1 == 2);
    CHECK(s.train.lr_theta == 0.01);
    s.validate();

    CHECK_THROWS_AS(run_spec_from_json(nlohmann::json{{"bitz", 8}}), ValidationError);
    CHECK_THROWS_AS(run_spec_from_json(nlohmann::json{{"model", {{"arch", 3}}}}), ValidationError);
    auto bad = quick_spec();
    bad.bits = 12;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = quick_spec();
    bad.train.p_columns = 17;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("theta document validation") {
    CHECK_THROWS_AS(theta_from_document(nlohmann::json::parse(R"({"layers": [{"theta": [1.5]}]})")), ValidationError);
    CHECK_THROWS_AS(theta_from_document(nlohmann::json::parse(R"({"layers": []})")), ValidationError);
    CHECK_THROWS_AS(netlists_from_document(nlohmann::json::parse(R"({"layers": [{"layer": 0}]})")), ValidationError);
}
