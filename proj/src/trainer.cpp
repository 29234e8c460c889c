/// @file trainer.cpp

#include "axm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <fmt/format.h>

#include "axm/error.hpp"

namespace axm {

namespace {

struct Batch {
    std::vector<double> inputs;
    std::vector<int> labels;
};

Batch gather(const Dataset& data, std::span<const std::size_t> idx) {
    Batch b;
    b.inputs.reserve(idx.size() * data.dim);
    b.labels.reserve(idx.size());
    for (std::size_t i : idx) {
        b.inputs.insert(b.inputs.end(), data.row(i), data.row(i) + data.dim);
        b.labels.push_back(data.labels[i]);
    }
    return b;
}

void check_data(const TinyModel& model, const Dataset& data) {
    if (data.size() == 0) throw ValidationError("dataset is empty");
    if (data.dim != model.input_dim()) {
        throw ValidationError(fmt::format("dataset has {} features, model expects {}", data.dim, model.input_dim()));
    }
    if (data.classes > model.output_dim()) {
        throw ValidationError(fmt::format("dataset has {} classes, model outputs {}", data.classes, model.output_dim()));
    }
}

void reset_velocity(TrainState& s) {
    s.vel_weight.clear();
    s.vel_bias.clear();
    for (const auto& l : s.model.layers) {
        s.vel_weight.emplace_back(l.weight.size(), 0.0);
        s.vel_bias.emplace_back(l.bias.size(), 0.0);
    }
    s.vel_theta.clear();
    for (const auto& t : s.theta) s.vel_theta.emplace_back(t.size(), 0.0);
}

void step_weights(TrainState& s, const Gradients& g, double lr, const TrainConfig& cfg) {
    for (std::size_t l = 0; l < s.model.num_layers(); ++l) {
        auto& layer = s.model.layers[l];
        for (std::size_t i = 0; i < layer.weight.size(); ++i) {
            const double grad = g.weight[l][i] + cfg.weight_decay * layer.weight[i];
            s.vel_weight[l][i] = cfg.momentum * s.vel_weight[l][i] + grad;
            layer.weight[i] -= lr * s.vel_weight[l][i];
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            s.vel_bias[l][i] = cfg.momentum * s.vel_bias[l][i] + g.bias[l][i];
            layer.bias[i] -= lr * s.vel_bias[l][i];
        }
    }
}

void step_theta(TrainState& s, const std::vector<std::vector<double>>& g, double lr, double momentum) {
    for (std::size_t t = 0; t < s.theta.size(); ++t) {
        for (std::size_t c = 0; c < s.theta[t].size(); ++c) {
            s.vel_theta[t][c] = momentum * s.vel_theta[t][c] + g[t][c];
            s.theta[t][c] = std::clamp(s.theta[t][c] - lr * s.vel_theta[t][c], 0.0, 1.0);
            if (!(s.theta[t][c] >= 0.0 && s.theta[t][c] <= 1.0)) throw InternalError("theta left [0, 1] after projection");
        }
    }
}

bool all_finite(const Gradients& g) {
    for (const auto* group : {&g.weight, &g.bias, &g.theta}) {
        for (const auto& v : *group) {
            for (double x : v) {
                if (!std::isfinite(x)) return false;
            }
        }
    }
    return true;
}

[[noreturn]] void diverged(const TrainState& s, const std::string& phase, int epoch, std::size_t step, double loss) {
    nlohmann::json dump = checkpoint(s);
    dump["phase"] = phase;
    dump["epoch"] = epoch;
    dump["step"] = step;
    dump["loss"] = std::isfinite(loss) ? nlohmann::json(loss) : nlohmann::json(fmt::format("{}", loss));
    throw DivergenceError(fmt::format("training diverged in {} (epoch {}, step {}, loss {})", phase, epoch, step, loss),
                          std::move(dump));
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

// Runs one epoch of weight-only training; returns mean model loss.
template <class LrFn>
double weight_epoch(TrainState& s, const Dataset& train, const TrainConfig& cfg, std::span<const LayerMultiplier> mults,
                    LrFn lr_at, std::size_t& global_step, const char* phase, int epoch) {
    const std::size_t bs = cfg.effective_batch(train.size());
    const auto idx = shuffled(train.size(), s.rng);
    double sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < idx.size(); start += bs) {
        const std::size_t n = std::min(bs, idx.size() - start);
        const auto b = gather(train, std::span(idx).subspan(start, n));
        const auto pass = forward(s.model, b.inputs, n, mults);
        std::vector<double> dlogits;
        const double loss = cross_entropy(pass.logits(), b.labels, s.model.output_dim(), &dlogits);
        const auto g = backward(s.model, pass, dlogits, mults);
        if (!std::isfinite(loss) || !all_finite(g)) diverged(s, phase, epoch, steps, loss);
        step_weights(s, g, lr_at(global_step), cfg);
        ++global_step;
        sum += loss;
        ++steps;
    }
    return sum / static_cast<double>(steps);
}

}  // namespace

void TrainConfig::validate(int bits) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError(fmt::format("lambda must be >= 0, got {}", lambda));
    if (epochs_pretrain < 0 || epochs_phase1 < 0 || epochs_phase3 < 0) throw ValidationError("epoch counts must be >= 0");
    for (double lr : {lr_pretrain, lr_weights, lr_theta, lr_recover}) {
        if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("learning rates must be finite and >= 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight decay must be >= 0");
    if (p_columns < 1 || p_columns > 2 * bits) {
        throw ConfigError(fmt::format("P must be in [1, {}] for B = {}, got {}", 2 * bits, bits, p_columns));
    }
}

std::size_t TrainConfig::effective_batch(std::size_t n) const {
    if (batch_size > 0) return std::min(batch_size, std::max<std::size_t>(n, 1));
    return std::min<std::size_t>(256, std::max<std::size_t>(1, n / 4));
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"lambda", c.lambda},
            {"epochs_pretrain", c.epochs_pretrain},
            {"epochs_phase1", c.epochs_phase1},
            {"epochs_phase3", c.epochs_phase3},
            {"lr_pretrain", c.lr_pretrain},
            {"lr_weights", c.lr_weights},
            {"lr_theta", c.lr_theta},
            {"lr_recover", c.lr_recover},
            {"momentum", c.momentum},
            {"weight_decay", c.weight_decay},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"tie_layers", c.tie_layers},
            {"p_columns", c.p_columns},
            {"theta_init", c.theta_init == ThetaInit::kLow4 ? "low4" : "zero"}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig c) {
    if (!doc.is_object()) throw ValidationError("training config must be an object");
    try {
        for (const auto& [key, v] : doc.items()) {
            if (key == "lambda") c.lambda = v.get<double>();
            else if (key == "epochs_pretrain") c.epochs_pretrain = v.get<int>();
            else if (key == "epochs_phase1") c.epochs_phase1 = v.get<int>();
            else if (key == "epochs_phase3") c.epochs_phase3 = v.get<int>();
            else if (key == "lr_pretrain") c.lr_pretrain = v.get<double>();
            else if (key == "lr_weights") c.lr_weights = v.get<double>();
            else if (key == "lr_theta") c.lr_theta = v.get<double>();
            else if (key == "lr_recover") c.lr_recover = v.get<double>();
            else if (key == "momentum") c.momentum = v.get<double>();
            else if (key == "weight_decay") c.weight_decay = v.get<double>();
            else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "tie_layers") c.tie_layers = v.get<bool>();
            else if (key == "p_columns") c.p_columns = v.get<int>();
            else if (key == "theta_init") {
                const auto s = v.get<std::string>();
                if (s == "low4") c.theta_init = ThetaInit::kLow4;
                else if (s == "zero") c.theta_init = ThetaInit::kZero;
                else throw ValidationError(fmt::format("theta_init: expected low4 or zero, got '{}'", s));
            } else {
                throw ValidationError(fmt::format("training config: unknown field '{}'", key));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("training config: {}", e.what()));
    }
    return c;
}

std::string loss_trace_csv(std::span<const LossRecord> trace) {
    std::string out = "phase,epoch,l_power,l_model,total\n";
    for (const auto& r : trace) out += fmt::format("{},{},{:.17g},{:.17g},{:.17g}\n", r.phase, r.epoch, r.l_power, r.l_model, r.total);
    return out;
}

std::vector<std::vector<double>> TrainState::per_layer_theta() const {
    std::vector<std::vector<double>> out;
    for (std::size_t l = 0; l < model.num_layers(); ++l) out.push_back(layer_theta(l));
    return out;
}

TrainState init_state(TinyModel model, const TrainConfig& cfg) {
    model.validate();
    cfg.validate(model.bits);
    TrainState s{std::move(model), {}, cfg.tie_layers, {}, {}, {}, {}, std::mt19937_64(cfg.seed)};
    std::vector<double> init(static_cast<std::size_t>(cfg.p_columns), 0.0);
    if (cfg.theta_init == ThetaInit::kLow4) {
        for (std::size_t c = 0; c < std::min<std::size_t>(4, init.size()); ++c) init[c] = 1.0;
    }
    s.theta.assign(cfg.tie_layers ? 1 : s.model.num_layers(), init);
    reset_velocity(s);
    return s;
}

MultiplierSet MultiplierSet::floating(const TinyModel& model) {
    MultiplierSet m;
    m.mults_.resize(model.num_layers());
    return m;
}

MultiplierSet MultiplierSet::exact(const TinyModel& model) {
    MultiplierSet m;
    m.tables_.push_back(exact_product_table(model.bits));
    m.mults_.resize(model.num_layers());
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        if (model.layers[l].instrumented) m.mults_[l].table = &m.tables_[0];
    }
    return m;
}

MultiplierSet MultiplierSet::from_theta(const TinyModel& model, const ColumnSumTable& column_sums,
                                        std::span<const std::vector<double>> per_layer_theta, bool with_theta_grad) {
    if (per_layer_theta.size() != model.num_layers()) throw ValidationError("one theta vector per layer is required");
    if (column_sums.bits() != model.bits) throw ValidationError("column-sum table bitwidth differs from the model");
    MultiplierSet m;
    m.tables_.reserve(model.num_layers());
    m.mults_.resize(model.num_layers());
    std::vector<const std::vector<double>*> source;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        if (!model.layers[l].instrumented) continue;
        const auto& theta = per_layer_theta[l];
        std::size_t found = m.tables_.size();
        for (std::size_t t = 0; t < source.size(); ++t) {
            if (*source[t] == theta) found = t;
        }
        if (found == m.tables_.size()) {
            m.tables_.push_back(column_sums.forward_table(theta));
            source.push_back(&theta);
        }
        m.mults_[l].table = &m.tables_[found];
        if (with_theta_grad) m.mults_[l].column_sums = &column_sums;
    }
    return m;
}

MultiplierSet MultiplierSet::from_netlists(const TinyModel& model, std::span<const MultiplierNetlist> per_layer) {
    if (per_layer.size() != model.num_layers()) throw ValidationError("one netlist per layer is required");
    MultiplierSet m;
    m.tables_.reserve(model.num_layers());
    m.mults_.resize(model.num_layers());
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        if (!model.layers[l].instrumented) continue;
        if (per_layer[l].bitwidth() != model.bits) {
            throw ValidationError(fmt::format("layer {}: netlist is {}-bit, model is {}-bit", l, per_layer[l].bitwidth(), model.bits));
        }
        std::size_t found = m.tables_.size();
        for (std::size_t p = 0; p < l; ++p) {
            if (m.mults_[p].table && per_layer[p] == per_layer[l]) found = static_cast<std::size_t>(m.mults_[p].table - m.tables_.data());
        }
        if (found == m.tables_.size()) m.tables_.push_back(netlist_product_table(per_layer[l]));
        m.mults_[l].table = &m.tables_[found];
    }
    return m;
}

Objective objective(const TrainState& state, std::span<const double> inputs, std::span<const int> labels,
                    const TrainConfig& cfg, const PowerModel& power, const ColumnSumTable& column_sums,
                    std::vector<std::vector<double>>* theta_grad, Gradients* weight_grad) {
    const auto& model = state.model;
    const auto per_layer = state.per_layer_theta();
    const auto mults = MultiplierSet::from_theta(model, column_sums, per_layer, theta_grad != nullptr);
    const std::size_t n = labels.size();
    const auto pass = forward(model, inputs, n, mults.layers());
    std::vector<double> dlogits;
    const bool need_grad = theta_grad || weight_grad;
    Objective obj;
    obj.l_model = cross_entropy(pass.logits(), labels, model.output_dim(), need_grad ? &dlogits : nullptr);

    std::vector<LayerProfile> profiles;
    std::vector<std::vector<double>> thetas;
    std::vector<std::size_t> layer_of;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        if (!model.layers[l].instrumented) continue;
        profiles.push_back({static_cast<int>(l), model.layers[l].shape.mult_count()});
        thetas.push_back(per_layer[l]);
        layer_of.push_back(l);
    }
    if (!profiles.empty()) obj.l_power = power.power_loss(profiles, thetas);
    obj.total = cfg.lambda * obj.l_power + obj.l_model;

    if (!need_grad) return obj;
    auto g = backward(model, pass, dlogits, mults.layers());
    if (theta_grad) {
        theta_grad->assign(state.theta.size(), std::vector<double>(static_cast<std::size_t>(column_sums.p_columns()), 0.0));
        const auto pg = profiles.empty() ? std::vector<std::vector<double>>{} : power.grad_power_loss(profiles, thetas);
        for (std::size_t k = 0; k < layer_of.size(); ++k) {
            const std::size_t l = layer_of[k];
            auto& dst = (*theta_grad)[state.tied ? 0 : l];
            for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += g.theta[l][c] + cfg.lambda * pg[k][c];
        }
    }
    if (weight_grad) *weight_grad = std::move(g);
    return obj;
}

void pretrain(TrainState& state, const Dataset& train, const TrainConfig& cfg) {
    check_data(state.model, train);
    reset_velocity(state);
    const auto mults = MultiplierSet::floating(state.model);
    std::size_t step = 0;
    for (int epoch = 1; epoch <= cfg.epochs_pretrain; ++epoch) {
        weight_epoch(state, train, cfg, mults.layers(), [&](std::size_t) { return cfg.lr_pretrain; }, step, "pretrain", epoch);
    }
    calibrate_activations(state.model, train.features, train.size());
    reset_velocity(state);
}

void explore(TrainState& state, const Dataset& train, const TrainConfig& cfg, const PowerModel& power) {
    check_data(state.model, train);
    cfg.validate(state.model.bits);
    if (power.bitwidth() != state.model.bits) throw ValidationError("power model bitwidth differs from the model");
    for (const auto& t : state.theta) {
        if (t.size() != static_cast<std::size_t>(cfg.p_columns)) throw ValidationError("theta length differs from P");
    }
    const ColumnSumTable column_sums(state.model.bits, cfg.p_columns);
    const std::size_t bs = cfg.effective_batch(train.size());
    for (int epoch = 1; epoch <= cfg.epochs_phase1; ++epoch) {
        const auto idx = shuffled(train.size(), state.rng);
        Objective sum;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < idx.size(); start += bs) {
            const std::size_t n = std::min(bs, idx.size() - start);
            const auto b = gather(train, std::span(idx).subspan(start, n));
            std::vector<std::vector<double>> tg;
            Gradients wg;
            const auto obj = objective(state, b.inputs, b.labels, cfg, power, column_sums, &tg, &wg);
            if (!std::isfinite(obj.total) || !all_finite(wg)) diverged(state, "explore", epoch, steps, obj.total);
            for (const auto& v : tg) {
                for (double x : v) {
                    if (!std::isfinite(x)) diverged(state, "explore", epoch, steps, obj.total);
                }
            }
            const double recomposed = cfg.lambda * obj.l_power + obj.l_model;
            if (std::abs(recomposed - obj.total) > 1e-12 * std::max(1.0, std::abs(obj.total))) {
                throw InternalError("reported loss differs from lambda * L_power + L_model");
            }
            step_weights(state, wg, cfg.lr_weights, cfg);
            step_theta(state, tg, cfg.lr_theta, cfg.momentum);
            sum.l_model += obj.l_model;
            sum.l_power += obj.l_power;
            ++steps;
        }
        LossRecord rec{"explore", epoch, sum.l_power / steps, sum.l_model / steps, 0.0};
        rec.total = cfg.lambda * rec.l_power + rec.l_model;
        state.trace.push_back(rec);
    }
}

void recover(TrainState& state, std::span<const MultiplierNetlist> per_layer, const Dataset& train,
             const TrainConfig& cfg) {
    check_data(state.model, train);
    const auto mults = MultiplierSet::from_netlists(state.model, per_layer);
    reset_velocity(state);
    const std::size_t bs = cfg.effective_batch(train.size());
    const std::size_t steps_per_epoch = (train.size() + bs - 1) / bs;
    const double total_steps = static_cast<double>(steps_per_epoch) * cfg.epochs_phase3;
    const auto lr_at = [&](std::size_t step) {
        return 0.5 * cfg.lr_recover * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
    };
    std::size_t step = 0;
    for (int epoch = 1; epoch <= cfg.epochs_phase3; ++epoch) {
        const double loss = weight_epoch(state, train, cfg, mults.layers(), lr_at, step, "recover", epoch);
        state.trace.push_back({"recover", epoch, 0.0, loss, loss});
    }
}

double evaluate_accuracy(const TinyModel& model, const Dataset& data, std::span<const LayerMultiplier> mults) {
    check_data(model, data);
    constexpr std::size_t kChunk = 512;
    std::size_t correct = 0;
    const std::size_t classes = model.output_dim();
    for (std::size_t start = 0; start < data.size(); start += kChunk) {
        const std::size_t n = std::min(kChunk, data.size() - start);
        const auto pass = forward(model, std::span(data.features).subspan(start * data.dim, n * data.dim), n, mults);
        const auto& z = pass.logits();
        for (std::size_t i = 0; i < n; ++i) {
            const auto* row = z.data() + i * classes;
            const auto pred = static_cast<int>(std::max_element(row, row + classes) - row);
            correct += pred == data.labels[start + i] ? 1 : 0;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double evaluate_accuracy(const TinyModel& model, const Dataset& data, std::span<const std::vector<double>> per_layer_theta) {
    std::size_t p = 0;
    for (const auto& t : per_layer_theta) p = std::max(p, t.size());
    if (p == 0) return evaluate_accuracy(model, data, MultiplierSet::exact(model).layers());
    const ColumnSumTable column_sums(model.bits, static_cast<int>(p));
    return evaluate_accuracy(model, data, MultiplierSet::from_theta(model, column_sums, per_layer_theta, false).layers());
}

double evaluate_accuracy(const TinyModel& model, const Dataset& data, std::span<const MultiplierNetlist> per_layer) {
    return evaluate_accuracy(model, data, MultiplierSet::from_netlists(model, per_layer).layers());
}

nlohmann::json checkpoint(const TrainState& s) {
    std::ostringstream rng;
    rng << s.rng;
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& r : s.trace) {
        trace.push_back({{"phase", r.phase}, {"epoch", r.epoch}, {"l_power", r.l_power}, {"l_model", r.l_model}, {"total", r.total}});
    }
    return {{"model", to_json(s.model)},
            {"theta", s.theta},
            {"tied", s.tied},
            {"vel_weight", s.vel_weight},
            {"vel_bias", s.vel_bias},
            {"vel_theta", s.vel_theta},
            {"trace", std::move(trace)},
            {"rng", rng.str()}};
}

TrainState restore_checkpoint(const nlohmann::json& doc) {
    try {
        TrainState s{model_from_json(doc.at("model")), doc.at("theta").get<std::vector<std::vector<double>>>(),
                     doc.at("tied").get<bool>(), doc.at("vel_weight").get<std::vector<std::vector<double>>>(),
                     doc.at("vel_bias").get<std::vector<std::vector<double>>>(),
                     doc.at("vel_theta").get<std::vector<std::vector<double>>>(), {}, {}};
        for (const auto& r : doc.at("trace")) {
            s.trace.push_back({r.at("phase").get<std::string>(), r.at("epoch").get<int>(), r.at("l_power").get<double>(),
                               r.at("l_model").get<double>(), r.at("total").get<double>()});
        }
        std::istringstream rng(doc.at("rng").get<std::string>());
        rng >> s.rng;
        if (!rng) throw ValidationError("checkpoint: unreadable rng state");
        if (s.theta.size() != (s.tied ? 1 : s.model.num_layers())) throw ValidationError("checkpoint: theta count mismatch");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("bad checkpoint: {}", e.what()));
    }
}

}  // namespace axm
