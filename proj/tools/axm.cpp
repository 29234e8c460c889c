// axm: command-line front end for approximate multiplier synthesis.
//
// Exit codes: 0 success, 2 usage or validation error, 1 internal error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "axm/emitter.hpp"
#include "axm/error.hpp"
#include "axm/mapper.hpp"
#include "axm/metrics.hpp"
#include "axm/pipeline.hpp"
#include "axm/power.hpp"

namespace fs = std::filesystem;
using namespace axm;

namespace {

// Flags shared by the training subcommands; unset ones leave the run spec alone.
struct SpecFlags {
    std::string config;
    int bits = 8;
    int p_columns = 8;
    std::string lambdas;
    std::string cost_table;
    std::string dist;
    std::uint64_t seed = 1;
    bool tie_layers = false;
    std::string candidates;
    std::string out = "axm_out";
    int jobs = 1;

    CLI::Option* o_bits = nullptr;
    CLI::Option* o_p = nullptr;
    CLI::Option* o_seed = nullptr;

    void add(CLI::App* app, bool with_lambda) {
        app->add_option("--config", config, "run spec JSON")->check(CLI::ExistingFile);
        o_bits = app->add_option("-B,--bits", bits, "operand bitwidth");
        o_p = app->add_option("--p-columns", p_columns, "number of approximable columns P");
        if (with_lambda) app->add_option("--lambda", lambdas, "trade-off weight, or a comma list for sweeps");
        app->add_option("--cost-table", cost_table, "component cost table JSON")->check(CLI::ExistingFile);
        app->add_option("--dist", dist, "input distribution JSON used by the mapper")->check(CLI::ExistingFile);
        o_seed = app->add_option("--seed", seed, "random seed");
        app->add_flag("--tie-layers", tie_layers, "share one structure vector across layers");
        app->add_option("--candidates", candidates, "candidate classes, subset of pp,sum,carry");
        app->add_option("--out", out, "output directory");
    }

    RunSpec spec() const {
        RunSpec s = config.empty() ? RunSpec{} : load_run_spec(config);
        if (o_bits->count()) s.bits = bits;
        if (o_p->count()) s.train.p_columns = p_columns;
        if (o_seed->count()) s.train.seed = seed;
        if (tie_layers) s.train.tie_layers = true;
        if (!lambdas.empty()) s.lambdas = parse_list(lambdas, "--lambda");
        if (!cost_table.empty()) s.cost = load_cost_table(cost_table);
        if (!dist.empty()) s.distribution_path = dist;
        if (!candidates.empty()) s.candidates = CandidateSet::parse(candidates);
        s.validate();
        return s;
    }

    MappingConfig mapping(const RunSpec& s) const {
        MappingConfig m;
        m.candidates = s.candidates;
        m.order = s.order;
        if (s.distribution_path) m.distribution = load_distribution(*s.distribution_path);
        return m;
    }

    static std::vector<double> parse_list(const std::string& text, const char* flag) {
        std::vector<double> out;
        std::size_t start = 0;
        while (start <= text.size()) {
            const auto end = std::min(text.find(',', start), text.size());
            const auto item = text.substr(start, end - start);
            try {
                std::size_t pos = 0;
                out.push_back(std::stod(item, &pos));
                if (pos != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ValidationError(fmt::format("{}: '{}' is not a number", flag, item));
            }
            start = end + 1;
        }
        return out;
    }
};

void emit_to(const std::optional<fs::path>& path, const std::string& text) {
    if (path) {
        if (path->has_parent_path()) fs::create_directories(path->parent_path());
        write_text(*path, text);
    } else {
        std::fwrite(text.data(), 1, text.size(), stdout);
    }
}

nlohmann::json parse_json_file(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::vector<std::vector<double>> theta_argument(const std::string& arg) {
    if (fs::exists(arg)) return theta_from_document(parse_json_file(arg));
    auto t = SpecFlags::parse_list(arg, "--theta");
    for (double v : t) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(fmt::format("--theta: {} outside [0, 1]", v));
    }
    return {t};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Approximate multiplier synthesis: exploration, mapping, emission and evaluation"};
    app.require_subcommand(1);

    // eval
    auto* eval = app.add_subcommand("eval", "error metrics and normalized power of a multiplier");
    bool accurate = false, maxed_full = false;
    int eval_bits = 8;
    std::string eval_netlist, eval_theta, eval_dist, eval_cost, eval_format = "json", eval_out;
    eval->add_flag("--accurate", accurate, "the accurate array multiplier");
    eval->add_option("-B,--bits", eval_bits, "bitwidth for --accurate / --theta");
    eval->add_option("--netlist", eval_netlist, "netlist JSON or netlist.json bundle")->check(CLI::ExistingFile);
    eval->add_option("--theta", eval_theta, "structure vector (comma list or theta.json)");
    eval->add_option("--dist", eval_dist, "input distribution JSON")->check(CLI::ExistingFile);
    eval->add_option("--cost-table", eval_cost, "component cost table JSON")->check(CLI::ExistingFile);
    eval->add_flag("--maxed-full-range", maxed_full, "MaxED over all inputs, not only the support");
    eval->add_option("--format", eval_format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    eval->add_option("--out", eval_out, "write the report to this file instead of stdout");

    // explore / map / emit / run / sweep
    SpecFlags explore_flags, run_flags, sweep_flags;
    auto* explore_cmd = app.add_subcommand("explore", "pretrain, then jointly train weights and structure parameters");
    explore_flags.add(explore_cmd, true);

    auto* map_cmd = app.add_subcommand("map", "map structure parameters to approximate netlists");
    SpecFlags map_flags;
    std::string map_theta;
    map_flags.add(map_cmd, false);
    map_cmd->add_option("--theta", map_theta, "theta.json from explore, or a comma list")->required();
    std::string map_order = "pp-first";
    map_cmd->add_option("--order", map_order, "candidate order")->check(CLI::IsMember({"pp-first", "compressors-first"}));

    auto* emit_cmd = app.add_subcommand("emit", "write structural Verilog for mapped netlists");
    std::string emit_netlist, emit_module = "axm", emit_out;
    bool emit_cells = false;
    emit_cmd->add_option("--netlist", emit_netlist, "netlist JSON or netlist.json bundle")->required()->check(CLI::ExistingFile);
    emit_cmd->add_option("--module", emit_module, "module name (suffixed _l<k> per layer)");
    emit_cmd->add_flag("--cells", emit_cells, "instantiate HA/FA cells instead of assign statements");
    emit_cmd->add_option("--out", emit_out, "output directory (axm.v); stdout when omitted");

    auto* run_cmd = app.add_subcommand("run", "full pipeline for one lambda");
    run_flags.add(run_cmd, true);

    auto* sweep_cmd = app.add_subcommand("sweep", "full pipeline per lambda, Pareto CSV and plot");
    sweep_flags.add(sweep_cmd, true);
    sweep_cmd->add_option("--jobs", sweep_flags.jobs, "lambda points run concurrently")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*eval) {
            const int sources = (accurate ? 1 : 0) + (eval_netlist.empty() ? 0 : 1) + (eval_theta.empty() ? 0 : 1);
            if (sources != 1) throw ValidationError("eval: give exactly one of --accurate, --netlist, --theta");
            const CostTable cost = eval_cost.empty() ? default_cost_table() : load_cost_table(eval_cost);
            const MaxEdScope scope = maxed_full ? MaxEdScope::kFullRange : MaxEdScope::kSupport;

            std::vector<std::pair<int, MultiplierNetlist>> nets;
            std::vector<std::vector<double>> thetas;
            if (accurate) nets.emplace_back(0, build_array_multiplier(eval_bits));
            if (!eval_netlist.empty()) nets = netlists_from_document(parse_json_file(eval_netlist));
            if (!eval_theta.empty()) thetas = theta_argument(eval_theta);
            const int bits = nets.empty() ? eval_bits : nets.front().second.bitwidth();
            const PowerModel power(build_array_multiplier(bits), cost);
            const InputDistribution dist = eval_dist.empty() ? InputDistribution::uniform(bits) : load_distribution(eval_dist);
            if (dist.bitwidth() != bits) throw ValidationError("distribution bitwidth differs from the multiplier");

            nlohmann::json rows = nlohmann::json::array();
            std::string csv;
            if (!nets.empty()) {
                csv = "layer," + csv_header() + ",norm_power\n";
                for (const auto& [layer, net] : nets) {
                    if (net.bitwidth() != bits) throw ValidationError("all netlists must share one bitwidth");
                    const auto report = evaluate(net, dist, scope);
                    const double np = power.normalized_power(net);
                    rows.push_back({{"layer", layer}, {"error", to_json(report)}, {"norm_power", np}, {"forced_zero", net.forced_count()}});
                    csv += fmt::format("{},{},{:.17g}\n", layer, to_csv_row(report), np);
                }
            } else {
                csv = "layer,f_power,mse\n";
                for (std::size_t l = 0; l < thetas.size(); ++l) {
                    const double fp = power.f_power(thetas[l]);
                    const auto ref = reference_outputs(bits, thetas[l]);
                    const auto exact = simulate_exhaustive(build_array_multiplier(bits));
                    const double mse = weighted_mse(exact, ref, dist);
                    rows.push_back({{"layer", l}, {"theta", thetas[l]}, {"f_power", fp}, {"mse", mse}});
                    csv += fmt::format("{},{:.17g},{:.17g}\n", l, fp, mse);
                }
            }
            const nlohmann::json doc = {{"bitwidth", bits},
                                        {"maxed_scope", maxed_full ? "full-range" : "support"},
                                        {"distribution", eval_dist.empty() ? "uniform" : "file"},
                                        {"layers", rows}};
            const std::string text = eval_format == "csv" ? csv : doc.dump(2) + "\n";
            emit_to(eval_out.empty() ? std::nullopt : std::optional<fs::path>(eval_out), text);
            if (dist.renormalized()) std::cerr << "note: distribution was renormalized\n";
        } else if (*explore_cmd) {
            const RunSpec spec = explore_flags.spec();
            if (spec.lambdas.size() != 1) throw ValidationError("explore takes a single --lambda");
            TrainConfig cfg = spec.train;
            cfg.lambda = spec.lambdas.front();
            const auto data = load_data(spec.data);
            TrainState state = init_state(build_model(spec, data.train.dim, data.train.classes, cfg.seed), cfg);
            const PowerModel power(build_array_multiplier(spec.bits), spec.cost);
            pretrain(state, data.train, cfg);
            explore(state, data.train, cfg, power);
            const fs::path out(explore_flags.out);
            fs::create_directories(out);
            const auto theta = state.per_layer_theta();
            write_text(out / "theta.json", theta_document(spec.bits, cfg.tie_layers, theta).dump(2) + "\n");
            write_text(out / "loss_trace.csv", loss_trace_csv(state.trace));
            write_text(out / "checkpoint.json", checkpoint(state).dump() + "\n");
            fmt::print("explore: lambda {} -> L_power {:.6f}, wrote {}\n", cfg.lambda,
                       power.power_loss(state.model.profiles(), theta), (out / "theta.json").string());
        } else if (*map_cmd) {
            RunSpec spec = map_flags.spec();
            spec.order = map_order == "pp-first" ? OrderPolicy::kPartialProductsFirst : OrderPolicy::kCompressorsFirst;
            auto theta = theta_argument(map_theta);
            if (fs::exists(map_theta)) {
                const auto doc = parse_json_file(map_theta);
                if (doc.contains("bits") && doc["bits"].is_number_integer()) spec.bits = doc["bits"].get<int>();
            }
            const auto layers = map_layers(build_array_multiplier(spec.bits), theta, map_flags.mapping(spec));
            const fs::path out(map_flags.out);
            fs::create_directories(out);
            write_text(out / "netlist.json", netlist_document(layers).dump(2) + "\n");
            write_text(out / "trace.json", trace_document(layers).dump(2) + "\n");
            for (const auto& lm : layers) {
                fmt::print("map: layer {} forced {} signals, MSE {:.6g} -> {:.6g}\n", lm.layer, lm.mapped.netlist.forced_count(),
                           lm.mapped.trace.initial_mse, lm.mapped.trace.final_mse);
            }
        } else if (*emit_cmd) {
            auto nets = netlists_from_document(parse_json_file(emit_netlist));
            for (auto& [layer, net] : nets) net = finalize(net);
            const auto text = verilog_document(nets, emit_module, emit_cells ? VerilogStyle::kCells : VerilogStyle::kAssign);
            emit_to(emit_out.empty() ? std::nullopt : std::optional<fs::path>(fs::path(emit_out) / "axm.v"), text);
        } else if (*run_cmd) {
            const RunSpec spec = run_flags.spec();
            if (spec.lambdas.size() != 1) throw ValidationError("run takes a single --lambda; use sweep for lists");
            const auto r = run_pipeline(spec, spec.lambdas.front(), spec.train.seed);
            write_pipeline_artifacts(r, run_flags.out);
            fmt::print("run: lambda {} accuracy {:.4f} (float {:.4f}), normalized power {:.4f}, wrote {}\n", r.lambda,
                       r.accuracy_final, r.accuracy_float, r.norm_power, run_flags.out);
        } else if (*sweep_cmd) {
            const RunSpec spec = sweep_flags.spec();
            const fs::path out(sweep_flags.out);
            fs::create_directories(out);
            const auto rows = run_sweep(spec, spec.lambdas, spec.train.seed, sweep_flags.jobs, out);
            write_text(out / "pareto.csv", sweep_csv(rows));
            write_text(out / "pareto.svg", sweep_svg(rows));
            std::size_t failed = 0;
            for (const auto& r : rows) failed += r.status == "ok" ? 0 : 1;
            fmt::print("sweep: {} points ({} failed), wrote {}\n", rows.size(), failed, (out / "pareto.csv").string());
        }
    } catch (const ValidationError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch (const DivergenceError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        try {
            const fs::path dump = fs::path("axm_divergence.json");
            write_text(dump, e.state().dump() + "\n");
            fmt::print(stderr, "state dump written to {}\n", dump.string());
        } catch (const std::exception&) {
        }
        return 1;
    } catch (const std::exception& e) {
        fmt::print(stderr, "internal error: {}\n", e.what());
        return 1;
    }
    return 0;
}
