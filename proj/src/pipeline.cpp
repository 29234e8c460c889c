/// @file pipeline.cpp

#include "axm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>
#include <fmt/format.h>

#include "axm/error.hpp"

namespace axm {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_model_spec(const nlohmann::json& j, ModelSpec& m) {
    for (const auto& [key, v] : j.items()) {
        if (key == "arch") m.arch = v.get<std::string>();
        else if (key == "hidden") m.hidden = v.get<std::vector<std::size_t>>();
        else if (key == "channels") m.channels = v.get<std::size_t>();
        else if (key == "kernel") m.kernel = v.get<std::size_t>();
        else throw ValidationError(fmt::format("model: unknown field '{}'", key));
    }
}

void parse_data_spec(const nlohmann::json& j, DataSpec& d, const std::filesystem::path& base) {
    for (const auto& [key, v] : j.items()) {
        if (key == "kind") d.kind = v.get<std::string>();
        else if (key == "path") d.path = resolve(base, v.get<std::string>());
        else if (key == "test_fraction") d.test_fraction = v.get<double>();
        else if (key == "seed") d.seed = v.get<std::uint64_t>();
        else if (key == "dim") d.blobs.dim = v.get<std::size_t>();
        else if (key == "classes") d.blobs.classes = v.get<std::size_t>();
        else if (key == "n_train") d.blobs.n_train = v.get<std::size_t>();
        else if (key == "n_test") d.blobs.n_test = v.get<std::size_t>();
        else if (key == "center_spread") d.blobs.center_spread = v.get<double>();
        else if (key == "noise") d.blobs.noise = v.get<double>();
        else throw ValidationError(fmt::format("data: unknown field '{}'", key));
    }
}

double weighted_mean(const std::vector<std::pair<double, double>>& value_weight) {
    double num = 0.0, den = 0.0;
    for (const auto& [v, w] : value_weight) {
        num += v * w;
        den += w;
    }
    return den > 0.0 ? num / den : 0.0;
}

std::string theta_string(std::span<const std::vector<double>> per_layer) {
    std::vector<std::string> layers;
    for (const auto& t : per_layer) layers.push_back(fmt::format("{:.6f}", fmt::join(t, " ")));
    return fmt::format("{}", fmt::join(layers, "|"));
}

std::string csv_safe(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '"', '\'');
    return s;
}

}  // namespace

void RunSpec::validate() const {
    if (bits < kMinBitwidth || bits > kMaxExhaustiveBitwidth) {
        throw ConfigError(fmt::format("B must be in [{}, {}] for training runs, got {}", kMinBitwidth, kMaxExhaustiveBitwidth, bits));
    }
    train.validate(bits);
    if (lambdas.empty()) throw ValidationError("at least one lambda is required");
    for (double l : lambdas) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError(fmt::format("lambda must be >= 0, got {}", l));
    }
    if (model.arch != "mlp" && model.arch != "conv-toy") {
        throw ValidationError(fmt::format("model.arch: expected mlp or conv-toy, got '{}'", model.arch));
    }
    if (data.kind != "blobs" && data.kind != "csv") throw ValidationError(fmt::format("data.kind: expected blobs or csv, got '{}'", data.kind));
    if (data.kind == "csv" && data.path.empty()) throw ValidationError("data.path is required for csv data");
    cost.validate();
    if (!candidates.any()) throw ValidationError("at least one candidate class is required");
}

RunSpec run_spec_from_json(const nlohmann::json& doc, const std::filesystem::path& base) {
    if (!doc.is_object()) throw ValidationError("run spec must be a JSON object");
    RunSpec s;
    try {
        if (doc.contains("train")) s.train = train_config_from_json(doc["train"]);
        for (const auto& [key, v] : doc.items()) {
            if (key == "train") continue;
            if (key == "bits") s.bits = v.get<int>();
            else if (key == "p_columns") s.train.p_columns = v.get<int>();
            else if (key == "lambda") s.lambdas = {v.get<double>()};
            else if (key == "lambdas") s.lambdas = v.get<std::vector<double>>();
            else if (key == "seed") s.train.seed = v.get<std::uint64_t>();
            else if (key == "tie_layers") s.train.tie_layers = v.get<bool>();
            else if (key == "cost_table") {
                s.cost = v.is_string() ? load_cost_table(resolve(base, v.get<std::string>())) : parse_cost_table(v);
            } else if (key == "dist") s.distribution_path = resolve(base, v.get<std::string>());
            else if (key == "candidates") s.candidates = CandidateSet::parse(v.get<std::string>());
            else if (key == "order") {
                const auto o = v.get<std::string>();
                if (o == "pp-first") s.order = OrderPolicy::kPartialProductsFirst;
                else if (o == "compressors-first") s.order = OrderPolicy::kCompressorsFirst;
                else throw ValidationError(fmt::format("order: expected pp-first or compressors-first, got '{}'", o));
            } else if (key == "weight_granularity") {
                const auto g = v.get<std::string>();
                if (g == "per-tensor") s.weight_granularity = Granularity::kPerTensor;
                else if (g == "per-channel") s.weight_granularity = Granularity::kPerChannel;
                else throw ValidationError(fmt::format("weight_granularity: unknown value '{}'", g));
            } else if (key == "model") parse_model_spec(v, s.model);
            else if (key == "data") parse_data_spec(v, s.data, base);
            else throw ValidationError(fmt::format("run spec: unknown field '{}'", key));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("run spec: {}", e.what()));
    }
    return s;
}

RunSpec load_run_spec(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return run_spec_from_json(doc, path.parent_path());
}

DatasetSplit load_data(const DataSpec& spec) {
    if (spec.kind == "csv") return split(load_csv(spec.path), spec.test_fraction, spec.seed);
    return make_blobs(spec.blobs, spec.seed);
}

TinyModel build_model(const RunSpec& spec, std::size_t d_in, std::size_t d_out, std::uint64_t seed) {
    TinyModel m;
    if (spec.model.arch == "conv-toy") {
        const std::size_t hidden = spec.model.hidden.empty() ? 16 : spec.model.hidden.front();
        m = TinyModel::conv_toy(d_in, spec.model.channels, spec.model.kernel, hidden, d_out, spec.bits, seed);
    } else {
        m = TinyModel::mlp(d_in, spec.model.hidden, d_out, spec.bits, seed);
    }
    m.weight_granularity = spec.weight_granularity;
    return m;
}

std::vector<LayerMapping> map_layers(const MultiplierNetlist& accurate, std::span<const std::vector<double>> per_layer_theta,
                                     const MappingConfig& cfg) {
    std::vector<LayerMapping> out;
    std::map<std::vector<double>, std::size_t> seen;
    for (std::size_t l = 0; l < per_layer_theta.size(); ++l) {
        const auto it = seen.find(per_layer_theta[l]);
        if (it != seen.end()) {
            LayerMapping copy = out[it->second];
            copy.layer = static_cast<int>(l);
            out.push_back(std::move(copy));
            continue;
        }
        auto mapped = map_structure(accurate, per_layer_theta[l], cfg);
        auto fin = finalize(mapped.netlist);
        seen.emplace(per_layer_theta[l], out.size());
        out.push_back({static_cast<int>(l), std::move(mapped), std::move(fin)});
    }
    return out;
}

PipelineResult run_pipeline(const RunSpec& spec, double lambda, std::uint64_t seed) {
    spec.validate();
    TrainConfig cfg = spec.train;
    cfg.lambda = lambda;
    cfg.seed = seed;
    cfg.validate(spec.bits);

    const auto data = load_data(spec.data);
    auto model = build_model(spec, data.train.dim, data.train.classes, seed);
    TrainState state = init_state(std::move(model), cfg);
    const auto accurate = build_array_multiplier(spec.bits);
    const PowerModel power(accurate, spec.cost);

    PipelineResult r;
    r.lambda = lambda;
    r.seed = seed;
    r.bits = spec.bits;
    r.p_columns = cfg.p_columns;
    r.tied = cfg.tie_layers;

    pretrain(state, data.train, cfg);
    r.accuracy_float = evaluate_accuracy(state.model, data.test, MultiplierSet::floating(state.model).layers());

    explore(state, data.train, cfg, power);
    r.theta = state.per_layer_theta();
    r.accuracy_explore = evaluate_accuracy(state.model, data.test, std::span<const std::vector<double>>(r.theta));
    r.l_power = power.power_loss(state.model.profiles(), r.theta);

    MappingConfig mcfg;
    mcfg.candidates = spec.candidates;
    mcfg.order = spec.order;
    if (spec.distribution_path) mcfg.distribution = load_distribution(*spec.distribution_path);
    r.layers = map_layers(accurate, r.theta, mcfg);

    std::vector<MultiplierNetlist> finals;
    std::vector<std::pair<double, double>> powers, mses;
    for (const auto& lm : r.layers) {
        finals.push_back(lm.finalized);
        const auto w = static_cast<double>(state.model.layers[lm.layer].shape.mult_count());
        powers.emplace_back(power.normalized_power(lm.mapped.netlist), w);
        mses.emplace_back(lm.mapped.trace.final_mse, w);
    }
    r.norm_power = weighted_mean(powers);
    r.final_mse = weighted_mean(mses);
    r.accuracy_mapped = evaluate_accuracy(state.model, data.test, std::span<const MultiplierNetlist>(finals));

    recover(state, finals, data.train, cfg);
    r.accuracy_final = evaluate_accuracy(state.model, data.test, std::span<const MultiplierNetlist>(finals));
    r.state = std::move(state);
    return r;
}

nlohmann::json theta_document(int bits, bool tied, std::span<const std::vector<double>> per_layer_theta) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < per_layer_theta.size(); ++l) layers.push_back({{"layer", l}, {"theta", per_layer_theta[l]}});
    return {{"bits", bits},
            {"p_columns", per_layer_theta.empty() ? 0 : per_layer_theta.front().size()},
            {"tie_layers", tied},
            {"layers", std::move(layers)}};
}

std::vector<std::vector<double>> theta_from_document(const nlohmann::json& doc) {
    std::vector<std::vector<double>> out;
    try {
        const auto& layers = doc.at("layers");
        if (!layers.is_array() || layers.empty()) throw ValidationError("theta document: 'layers' must be a nonempty list");
        for (std::size_t k = 0; k < layers.size(); ++k) {
            const auto& t = layers[k].at("theta");
            auto v = t.get<std::vector<double>>();
            for (std::size_t c = 0; c < v.size(); ++c) {
                if (!(v[c] >= 0.0 && v[c] <= 1.0)) {
                    throw ValidationError(fmt::format("layers[{}].theta[{}] = {} outside [0, 1]", k, c, v[c]));
                }
            }
            out.push_back(std::move(v));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("theta document: {}", e.what()));
    }
    return out;
}

nlohmann::json netlist_document(std::span<const LayerMapping> layers) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& lm : layers) arr.push_back({{"layer", lm.layer}, {"netlist", netlist_to_json(lm.mapped.netlist)}});
    return {{"layers", std::move(arr)}};
}

nlohmann::json trace_document(std::span<const LayerMapping> layers) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& lm : layers) arr.push_back({{"layer", lm.layer}, {"trace", to_json(lm.mapped.trace)}});
    return {{"layers", std::move(arr)}};
}

std::vector<std::pair<int, MultiplierNetlist>> netlists_from_document(const nlohmann::json& doc) {
    std::vector<std::pair<int, MultiplierNetlist>> out;
    if (doc.is_object() && doc.contains("layers")) {
        const auto& layers = doc["layers"];
        if (!layers.is_array() || layers.empty()) throw ValidationError("netlist document: 'layers' must be a nonempty list");
        for (std::size_t k = 0; k < layers.size(); ++k) {
            const auto& e = layers[k];
            if (!e.is_object() || !e.contains("layer") || !e.contains("netlist") || !e["layer"].is_number_integer()) {
                throw ValidationError(fmt::format("layers[{}]: expected {{\"layer\": int, \"netlist\": {{...}}}}", k));
            }
            try {
                out.emplace_back(e["layer"].get<int>(), netlist_from_json(e["netlist"]));
            } catch (const ValidationError& err) {
                throw ValidationError(fmt::format("layers[{}].netlist.{}", k, err.what()));
            }
        }
        return out;
    }
    out.emplace_back(0, netlist_from_json(doc));
    return out;
}

std::string verilog_document(std::span<const std::pair<int, MultiplierNetlist>> netlists, const std::string& base,
                             VerilogStyle style) {
    std::string out;
    for (std::size_t k = 0; k < netlists.size(); ++k) {
        const auto name = netlists.size() == 1 ? base : fmt::format("{}_l{}", base, netlists[k].first);
        if (k > 0) out += "\n";
        out += emit_verilog(netlists[k].second, name, style);
    }
    return out;
}

nlohmann::json report_document(const PipelineResult& r) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& lm : r.layers) {
        layers.push_back({{"layer", lm.layer},
                          {"forced_zero", lm.mapped.netlist.forced_count()},
                          {"initial_mse", lm.mapped.trace.initial_mse},
                          {"final_mse", lm.mapped.trace.final_mse},
                          {"error", to_json(evaluate(lm.finalized, InputDistribution::uniform(r.bits)))}});
    }
    return {{"lambda", r.lambda},
            {"seed", r.seed},
            {"bits", r.bits},
            {"p_columns", r.p_columns},
            {"tie_layers", r.tied},
            {"accuracy_float", r.accuracy_float},
            {"accuracy_explore", r.accuracy_explore},
            {"accuracy_mapped", r.accuracy_mapped},
            {"accuracy_final", r.accuracy_final},
            {"l_power", r.l_power},
            {"norm_power", r.norm_power},
            {"final_mse", r.final_mse},
            {"layers", std::move(layers)}};
}

void write_pipeline_artifacts(const PipelineResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "theta.json", theta_document(r.bits, r.tied, r.theta).dump(2) + "\n");
    write_text(dir / "netlist.json", netlist_document(r.layers).dump(2) + "\n");
    write_text(dir / "trace.json", trace_document(r.layers).dump(2) + "\n");
    std::vector<std::pair<int, MultiplierNetlist>> finals;
    for (const auto& lm : r.layers) finals.emplace_back(lm.layer, lm.finalized);
    write_text(dir / "axm.v", verilog_document(finals, "axm", VerilogStyle::kAssign));
    write_text(dir / "loss_trace.csv", loss_trace_csv(r.state.trace));
    write_text(dir / "report.json", report_document(r).dump(2) + "\n");
    write_text(dir / "checkpoint.json", checkpoint(r.state).dump() + "\n");
}

std::vector<SweepRow> run_sweep(const RunSpec& spec, std::span<const double> lambdas, std::uint64_t seed, int jobs,
                                const std::optional<std::filesystem::path>& out_dir) {
    if (lambdas.empty()) throw ValidationError("sweep needs at least one lambda");
    spec.validate();
    std::vector<SweepRow> rows(lambdas.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < lambdas.size(); i = next++) {
            SweepRow& row = rows[i];
            row.lambda = lambdas[i];
            try {
                const auto r = run_pipeline(spec, lambdas[i], seed);
                row.accuracy = r.accuracy_final;
                row.norm_power = r.norm_power;
                row.final_mse = r.final_mse;
                row.l_power = r.l_power;
                row.theta = theta_string(r.theta);
                if (out_dir) write_pipeline_artifacts(r, *out_dir / fmt::format("lambda_{}", i));
            } catch (const std::exception& e) {
                row.status = csv_safe(fmt::format("error: {}", e.what()));
            }
        }
    };
    const auto n = static_cast<std::size_t>(std::clamp(jobs, 1, static_cast<int>(lambdas.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return rows;
}

std::string sweep_csv_header() { return "lambda,accuracy,norm_power,final_mse,l_power,status,theta"; }

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::string out = sweep_csv_header() + "\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{},{}\n", r.lambda, r.accuracy, r.norm_power, r.final_mse,
                           r.l_power, r.status, r.theta);
    }
    return out;
}

std::string sweep_svg(std::span<const SweepRow> rows) {
    constexpr double kW = 480, kH = 360, kL = 60, kR = 20, kT = 20, kB = 50;
    double pmin = 1, pmax = 0, amin = 1, amax = 0;
    for (const auto& r : rows) {
        if (r.status != "ok") continue;
        pmin = std::min(pmin, r.norm_power);
        pmax = std::max(pmax, r.norm_power);
        amin = std::min(amin, r.accuracy);
        amax = std::max(amax, r.accuracy);
    }
    if (pmin > pmax) pmin = 0, pmax = 1, amin = 0, amax = 1;
    const double pspan = std::max(pmax - pmin, 1e-3), aspan = std::max(amax - amin, 1e-3);
    pmin -= 0.05 * pspan, pmax += 0.05 * pspan, amin -= 0.05 * aspan, amax += 0.05 * aspan;
    const auto px = [&](double p) { return kL + (p - pmin) / (pmax - pmin) * (kW - kL - kR); };
    const auto py = [&](double a) { return kH - kB - (a - amin) / (amax - amin) * (kH - kT - kB); };

    std::string s = fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)", kW, kH);
    s += "\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", kL, kH - kB, kW - kR);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kL, kT, kH - kB);
    for (int t = 0; t <= 4; ++t) {
        const double p = pmin + (pmax - pmin) * t / 4, a = amin + (amax - amin) * t / 4;
        s += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{:.3f}</text>\n", px(p), kH - kB + 16, p);
        s += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3f}</text>\n", kL - 4, py(a) + 4, a);
    }
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">normalized power</text>\n", (kL + kW - kR) / 2, kH - 12);
    s += fmt::format("<text transform=\"translate(14,{}) rotate(-90)\" text-anchor=\"middle\">accuracy</text>\n", (kT + kH - kB) / 2);
    for (const auto& r : rows) {
        if (r.status != "ok") continue;
        s += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"4\" fill=\"steelblue\"><title>lambda={}</title></circle>\n",
                         px(r.norm_power), py(r.accuracy), r.lambda);
    }
    s += "</svg>\n";
    return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
    out << text;
    if (!out) throw ValidationError(fmt::format("write failed for '{}'", path.string()));
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace axm
