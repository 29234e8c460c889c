/// @file pipeline.hpp
/// @brief The full flow (pretrain, explore, map, finalize, recover, evaluate),
///        its on-disk artifacts, and lambda sweeps.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "axm/dataset.hpp"
#include "axm/emitter.hpp"
#include "axm/mapper.hpp"
#include "axm/trainer.hpp"

namespace axm {

struct ModelSpec {
    std::string arch = "mlp";  // mlp | conv-toy
    std::vector<std::size_t> hidden{32};
    std::size_t channels = 4;  // conv-toy
    std::size_t kernel = 3;
};

struct DataSpec {
    std::string kind = "blobs";  // blobs | csv
    std::filesystem::path path;  // csv only
    double test_fraction = 0.25;  // csv only
    std::uint64_t seed = 7;       // data generation and splitting
    BlobSpec blobs;
};

/// Everything a run needs. Read from a JSON config; CLI flags override.
struct RunSpec {
    int bits = 8;
    ModelSpec model;
    DataSpec data;
    TrainConfig train;
    std::vector<double> lambdas{0.0};
    CostTable cost = default_cost_table();
    std::optional<std::filesystem::path> distribution_path;
    CandidateSet candidates;
    OrderPolicy order = OrderPolicy::kPartialProductsFirst;
    Granularity weight_granularity = Granularity::kPerTensor;

    void validate() const;
};

/// Relative paths inside the document resolve against `base_dir`.
RunSpec run_spec_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunSpec load_run_spec(const std::filesystem::path& path);

DatasetSplit load_data(const DataSpec& spec);
TinyModel build_model(const RunSpec& spec, std::size_t d_in, std::size_t d_out, std::uint64_t seed);

struct LayerMapping {
    int layer = 0;
    MappingResult mapped;
    MultiplierNetlist finalized;
};

struct PipelineResult {
    double lambda = 0.0;
    std::uint64_t seed = 0;
    int bits = 8;
    int p_columns = 8;
    bool tied = false;
    std::vector<std::vector<double>> theta;  // per layer
    std::vector<LayerMapping> layers;        // instrumented layers
    double accuracy_float = 0.0;
    double accuracy_explore = 0.0;  // closed-form multipliers under theta*
    double accuracy_mapped = 0.0;   // mapped netlists before recovery
    double accuracy_final = 0.0;    // after recovery
    double l_power = 0.0;           // power loss at theta*
    double norm_power = 0.0;        // mult-weighted effective power of the mapped netlists
    double final_mse = 0.0;         // mult-weighted mapper MSE
    TrainState state;
};

/// Deterministic for a fixed spec, lambda and seed.
PipelineResult run_pipeline(const RunSpec& spec, double lambda, std::uint64_t seed);

/// Maps every layer's theta (layers with equal theta share one mapping).
std::vector<LayerMapping> map_layers(const MultiplierNetlist& accurate, std::span<const std::vector<double>> per_layer_theta,
                                     const MappingConfig& cfg);

// Artifact documents. Byte-identical for identical inputs.
nlohmann::json theta_document(int bits, bool tied, std::span<const std::vector<double>> per_layer_theta);
/// Returns per-layer theta; accepts the theta_document layout.
std::vector<std::vector<double>> theta_from_document(const nlohmann::json& doc);
nlohmann::json netlist_document(std::span<const LayerMapping> layers);
nlohmann::json trace_document(std::span<const LayerMapping> layers);
/// Accepts a netlist_document or a single netlist; returns (layer, netlist) pairs.
std::vector<std::pair<int, MultiplierNetlist>> netlists_from_document(const nlohmann::json& doc);
/// One module per netlist: `base` for a single one, `base_l<k>` otherwise.
std::string verilog_document(std::span<const std::pair<int, MultiplierNetlist>> netlists, const std::string& base,
                             VerilogStyle style);
nlohmann::json report_document(const PipelineResult& r);

/// Writes theta.json, netlist.json, trace.json, axm.v, loss_trace.csv,
/// report.json and checkpoint.json under `dir`.
void write_pipeline_artifacts(const PipelineResult& r, const std::filesystem::path& dir);

struct SweepRow {
    double lambda = 0.0;
    std::string status = "ok";  // "ok" or "error: ..."
    double accuracy = 0.0;
    double norm_power = 0.0;
    double final_mse = 0.0;
    double l_power = 0.0;
    std::string theta;  // layers separated by '|', columns by ' '
};

/// Runs the pipeline per lambda, up to `jobs` at a time. A failing point is
/// recorded in its row and the sweep continues. When `out_dir` is set each
/// point's artifacts go to out_dir/lambda_<i>.
std::vector<SweepRow> run_sweep(const RunSpec& spec, std::span<const double> lambdas, std::uint64_t seed, int jobs,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string sweep_csv_header();
std::string sweep_csv(std::span<const SweepRow> rows);
/// Static accuracy-vs-normalized-power scatter plot.
std::string sweep_svg(std::span<const SweepRow> rows);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace axm
