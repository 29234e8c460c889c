/// @file model.cpp

#include "axm/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <fmt/format.h>

#include "axm/error.hpp"

namespace axm {

namespace {

Layer make_layer(const LayerShape& shape, int bits, std::mt19937_64& rng) {
    Layer l;
    l.shape = shape;
    const std::size_t n = shape.units() * shape.fan_in();
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(shape.fan_in())));
    l.weight.resize(n);
    for (auto& w : l.weight) w = init(rng);
    l.bias.assign(shape.units(), 0.0);
    l.act_spec.bits = bits;
    return l;
}

LayerShape dense(std::size_t in, std::size_t out) {
    LayerShape s;
    s.in_features = in;
    s.out_features = out;
    return s;
}

// Gathers per-row input patches; dense layers copy the input as is.
void im2col(const LayerShape& s, std::span<const double> in, std::size_t batch, std::vector<double>& patches) {
    const std::size_t k = s.fan_in();
    const std::size_t rps = s.rows_per_sample();
    patches.resize(batch * rps * k);
    if (s.kind == LayerKind::kDense) {
        std::copy(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(batch * k), patches.begin());
        return;
    }
    for (std::size_t b = 0; b < batch; ++b) {
        const double* src = in.data() + b * s.in_features;
        for (std::size_t t = 0; t < rps; ++t) {
            double* dst = patches.data() + (b * rps + t) * k;
            std::copy(src + t * s.in_channels, src + t * s.in_channels + k, dst);
        }
    }
}

void col2im(const LayerShape& s, const std::vector<double>& dpatches, std::size_t batch, std::vector<double>& din) {
    const std::size_t k = s.fan_in();
    const std::size_t rps = s.rows_per_sample();
    if (s.kind == LayerKind::kDense) {
        din = dpatches;
        return;
    }
    din.assign(batch * s.in_features, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        double* dst = din.data() + b * s.in_features;
        for (std::size_t t = 0; t < rps; ++t) {
            const double* src = dpatches.data() + (b * rps + t) * k;
            for (std::size_t j = 0; j < k; ++j) dst[t * s.in_channels + j] += src[j];
        }
    }
}

std::vector<QuantSpec> weight_specs(const Layer& l, int bits, Granularity g) {
    if (g == Granularity::kPerChannel) return calibrate_per_channel(l.weight, l.shape.units(), bits);
    return std::vector<QuantSpec>(l.shape.units(), calibrate(l.weight, bits));
}

}  // namespace

TinyModel TinyModel::mlp(std::size_t d_in, const std::vector<std::size_t>& hidden, std::size_t d_out, int bits,
                         std::uint64_t seed) {
    TinyModel m;
    m.architecture = "mlp";
    m.bits = bits;
    std::mt19937_64 rng(seed);
    std::size_t prev = d_in;
    for (std::size_t h : hidden) {
        m.layers.push_back(make_layer(dense(prev, h), bits, rng));
        prev = h;
    }
    m.layers.push_back(make_layer(dense(prev, d_out), bits, rng));
    m.validate();
    return m;
}

TinyModel TinyModel::conv_toy(std::size_t d_in, std::size_t channels, std::size_t kernel, std::size_t hidden,
                              std::size_t d_out, int bits, std::uint64_t seed) {
    if (kernel == 0 || kernel > d_in) throw ValidationError("conv-toy kernel must be in [1, input dim]");
    TinyModel m;
    m.architecture = "conv-toy";
    m.bits = bits;
    std::mt19937_64 rng(seed);
    LayerShape conv;
    conv.kind = LayerKind::kConv1d;
    conv.in_features = d_in;
    conv.in_channels = 1;
    conv.out_channels = channels;
    conv.kernel = kernel;
    conv.out_features = (d_in - kernel + 1) * channels;
    m.layers.push_back(make_layer(conv, bits, rng));
    m.layers.push_back(make_layer(dense(conv.out_features, hidden), bits, rng));
    m.layers.push_back(make_layer(dense(hidden, d_out), bits, rng));
    m.validate();
    return m;
}

std::vector<LayerProfile> TinyModel::profiles() const {
    std::vector<LayerProfile> p;
    for (std::size_t l = 0; l < layers.size(); ++l) p.push_back({static_cast<int>(l), layers[l].shape.mult_count()});
    return p;
}

void TinyModel::validate() const {
    if (layers.empty()) throw ValidationError("model needs at least one layer");
    if (bits < 1 || bits > kMaxExhaustiveBitwidth) throw ConfigError(fmt::format("model bitwidth must be in [1, {}]", kMaxExhaustiveBitwidth));
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& s = layers[l].shape;
        const auto where = fmt::format("layer {}", l);
        if (s.fan_in() == 0 || s.units() == 0) throw ValidationError(where + ": empty shape");
        if (s.kind == LayerKind::kConv1d) {
            if (s.in_features % s.in_channels != 0 || s.kernel > s.in_features / s.in_channels) {
                throw ValidationError(where + ": conv shape does not fit its input");
            }
            if (s.out_features != s.rows_per_sample() * s.out_channels) throw ValidationError(where + ": conv output size mismatch");
        }
        if (layers[l].weight.size() != s.units() * s.fan_in() || layers[l].bias.size() != s.units()) {
            throw ValidationError(where + ": parameter sizes do not match the shape");
        }
        if (l > 0 && layers[l - 1].shape.out_features != s.in_features) {
            throw ValidationError(fmt::format("{}: expects {} inputs, previous layer gives {}", where, s.in_features,
                                              layers[l - 1].shape.out_features));
        }
    }
}

nlohmann::json to_json(const TinyModel& model) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : model.layers) {
        const auto& s = l.shape;
        layers.push_back({{"kind", s.kind == LayerKind::kDense ? "dense" : "conv1d"},
                          {"in_features", s.in_features},
                          {"out_features", s.out_features},
                          {"in_channels", s.in_channels},
                          {"out_channels", s.out_channels},
                          {"kernel", s.kernel},
                          {"weight", l.weight},
                          {"bias", l.bias},
                          {"act_spec", to_json(l.act_spec)},
                          {"instrumented", l.instrumented}});
    }
    return {{"architecture", model.architecture},
            {"bits", model.bits},
            {"weight_granularity", model.weight_granularity == Granularity::kPerTensor ? "per-tensor" : "per-channel"},
            {"layers", std::move(layers)}};
}

TinyModel model_from_json(const nlohmann::json& doc) {
    TinyModel m;
    try {
        m.architecture = doc.at("architecture").get<std::string>();
        m.bits = doc.at("bits").get<int>();
        m.weight_granularity = doc.at("weight_granularity").get<std::string>() == "per-channel" ? Granularity::kPerChannel
                                                                                                : Granularity::kPerTensor;
        for (const auto& j : doc.at("layers")) {
            Layer l;
            l.shape.kind = j.at("kind").get<std::string>() == "conv1d" ? LayerKind::kConv1d : LayerKind::kDense;
            l.shape.in_features = j.at("in_features").get<std::size_t>();
            l.shape.out_features = j.at("out_features").get<std::size_t>();
            l.shape.in_channels = j.at("in_channels").get<std::size_t>();
            l.shape.out_channels = j.at("out_channels").get<std::size_t>();
            l.shape.kernel = j.at("kernel").get<std::size_t>();
            l.weight = j.at("weight").get<std::vector<double>>();
            l.bias = j.at("bias").get<std::vector<double>>();
            l.act_spec = quant_spec_from_json(j.at("act_spec"));
            l.instrumented = j.at("instrumented").get<bool>();
            m.layers.push_back(std::move(l));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("bad model: {}", e.what()));
    }
    m.validate();
    return m;
}

std::vector<double> exact_product_table(int bits) {
    if (bits < 1 || bits > kMaxExhaustiveBitwidth) throw ConfigError("product tables need B <= 8");
    const std::size_t n = std::size_t{1} << bits;
    std::vector<double> t(n * n);
    for (std::size_t w = 0; w < n; ++w) {
        for (std::size_t x = 0; x < n; ++x) t[(w << bits) | x] = static_cast<double>(w * x);
    }
    return t;
}

std::vector<double> netlist_product_table(const MultiplierNetlist& net) {
    const auto outs = simulate_exhaustive(net);
    return {outs.begin(), outs.end()};
}

ForwardPass forward(const TinyModel& model, std::span<const double> inputs, std::size_t batch,
                    std::span<const LayerMultiplier> mults) {
    if (mults.size() != model.num_layers()) throw ValidationError("one multiplier per layer is required");
    if (inputs.size() < batch * model.input_dim()) throw ValidationError("input batch is smaller than declared");
    const int bits = model.bits;
    ForwardPass pass;
    pass.batch = batch;
    pass.layers.resize(model.num_layers());
    std::span<const double> in = inputs;
    for (std::size_t li = 0; li < model.num_layers(); ++li) {
        const Layer& layer = model.layers[li];
        const auto& s = layer.shape;
        LayerCache& c = pass.layers[li];
        const std::size_t k = s.fan_in();
        const std::size_t units = s.units();
        im2col(s, in, batch, c.patches);
        c.rows = batch * s.rows_per_sample();
        c.pre.assign(c.rows * units, 0.0);
        const bool last = li + 1 == model.num_layers();

        if (mults[li].table == nullptr) {
            for (std::size_t r = 0; r < c.rows; ++r) {
                const double* x = c.patches.data() + r * k;
                for (std::size_t o = 0; o < units; ++o) {
                    const double* w = layer.weight.data() + o * k;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < k; ++j) acc += w[j] * x[j];
                    c.pre[r * units + o] = layer.bias[o] + acc;
                }
            }
        } else {
            const auto& table = *mults[li].table;
            if (table.size() != (std::size_t{1} << (2 * bits))) throw ValidationError("product table size does not match B");
            const auto wspecs = weight_specs(layer, bits, model.weight_granularity);
            const QuantSpec& xs = layer.act_spec;
            c.x_scale = xs.scale;
            c.w_scale.resize(units);
            const std::size_t nw = layer.weight.size();
            c.w_code.resize(nw);
            c.w_sign.resize(nw);
            c.w_fq.resize(nw);
            c.w_pass.resize(nw);
            for (std::size_t o = 0; o < units; ++o) {
                c.w_scale[o] = wspecs[o].scale;
                for (std::size_t j = 0; j < k; ++j) {
                    const std::size_t idx = o * k + j;
                    const double v = layer.weight[idx];
                    c.w_code[idx] = quantize_magnitude(v, wspecs[o]);
                    c.w_sign[idx] = v < 0.0 ? -1 : 1;
                    c.w_fq[idx] = c.w_sign[idx] * static_cast<double>(c.w_code[idx]) * wspecs[o].scale;
                    c.w_pass[idx] = fake_quantize_grad(v, wspecs[o]);
                }
            }
            const std::size_t nx = c.patches.size();
            c.x_code.resize(nx);
            c.x_sign.resize(nx);
            c.x_fq.resize(nx);
            c.x_pass.resize(nx);
            for (std::size_t idx = 0; idx < nx; ++idx) {
                const double v = c.patches[idx];
                c.x_code[idx] = quantize_magnitude(v, xs);
                c.x_sign[idx] = v < 0.0 ? -1 : 1;
                c.x_fq[idx] = c.x_sign[idx] * static_cast<double>(c.x_code[idx]) * xs.scale;
                c.x_pass[idx] = fake_quantize_grad(v, xs);
            }
            for (std::size_t r = 0; r < c.rows; ++r) {
                const std::uint32_t* xq = c.x_code.data() + r * k;
                const std::int8_t* xsg = c.x_sign.data() + r * k;
                for (std::size_t o = 0; o < units; ++o) {
                    const std::uint32_t* wq = c.w_code.data() + o * k;
                    const std::int8_t* wsg = c.w_sign.data() + o * k;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < k; ++j) {
                        acc += (wsg[j] * xsg[j]) * table[(static_cast<std::size_t>(wq[j]) << bits) | xq[j]];
                    }
                    c.pre[r * units + o] = layer.bias[o] + acc * c.w_scale[o] * c.x_scale;
                }
            }
        }
        c.post = c.pre;
        if (!last) {
            for (auto& v : c.post) v = std::max(v, 0.0);
        }
        in = c.post;
    }
    return pass;
}

double cross_entropy(std::span<const double> logits, std::span<const int> labels, std::size_t classes,
                     std::vector<double>* dlogits) {
    const std::size_t n = labels.size();
    if (logits.size() != n * classes) throw ValidationError("logit count does not match labels x classes");
    if (dlogits) dlogits->assign(logits.size(), 0.0);
    double loss = 0.0;
    std::vector<double> p(classes);
    for (std::size_t i = 0; i < n; ++i) {
        const double* z = logits.data() + i * classes;
        const double zmax = *std::max_element(z, z + classes);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += p[c] = std::exp(z[c] - zmax);
        const auto label = static_cast<std::size_t>(labels[i]);
        if (label >= classes) throw ValidationError(fmt::format("label {} outside [0, {})", labels[i], classes));
        loss += std::log(sum) - (z[label] - zmax);
        if (dlogits) {
            for (std::size_t c = 0; c < classes; ++c) {
                (*dlogits)[i * classes + c] = (p[c] / sum - (c == label ? 1.0 : 0.0)) / static_cast<double>(n);
            }
        }
    }
    return loss / static_cast<double>(n);
}

Gradients backward(const TinyModel& model, const ForwardPass& pass, std::span<const double> dlogits,
                   std::span<const LayerMultiplier> mults) {
    const std::size_t nl = model.num_layers();
    Gradients g;
    g.weight.resize(nl);
    g.bias.resize(nl);
    g.theta.resize(nl);
    std::vector<double> dout(dlogits.begin(), dlogits.end());
    std::vector<double> dpatch, din;
    for (std::size_t li = nl; li-- > 0;) {
        const Layer& layer = model.layers[li];
        const LayerCache& c = pass.layers[li];
        const std::size_t k = layer.shape.fan_in();
        const std::size_t units = layer.shape.units();
        if (li + 1 < nl) {
            for (std::size_t i = 0; i < dout.size(); ++i) {
                if (c.pre[i] <= 0.0) dout[i] = 0.0;
            }
        }
        auto& dw = g.weight[li];
        auto& db = g.bias[li];
        dw.assign(layer.weight.size(), 0.0);
        db.assign(units, 0.0);
        dpatch.assign(c.rows * k, 0.0);
        const bool quantized = mults[li].table != nullptr;
        const ColumnSumTable* sums = mults[li].column_sums;
        std::vector<double> col_acc;
        if (sums) {
            if (sums->bits() != model.bits) throw ValidationError("column-sum table bitwidth differs from the model");
            col_acc.assign(static_cast<std::size_t>(sums->p_columns()), 0.0);
        }
        for (std::size_t r = 0; r < c.rows; ++r) {
            for (std::size_t o = 0; o < units; ++o) {
                const double go = dout[r * units + o];
                if (go == 0.0) continue;
                db[o] += go;
                double* dwo = dw.data() + o * k;
                double* dx = dpatch.data() + r * k;
                if (!quantized) {
                    const double* x = c.patches.data() + r * k;
                    const double* w = layer.weight.data() + o * k;
                    for (std::size_t j = 0; j < k; ++j) {
                        dwo[j] += go * x[j];
                        dx[j] += go * w[j];
                    }
                    continue;
                }
                const std::size_t wo = o * k;
                const std::size_t xr = r * k;
                for (std::size_t j = 0; j < k; ++j) {
                    dwo[j] += go * c.x_fq[xr + j] * c.w_pass[wo + j];
                    dx[j] += go * c.w_fq[wo + j] * c.x_pass[xr + j];
                }
                if (sums) {
                    const double coef = go * c.w_scale[o] * c.x_scale;
                    for (std::size_t j = 0; j < k; ++j) {
                        const std::size_t pair = (static_cast<std::size_t>(c.w_code[wo + j]) << model.bits) | c.x_code[xr + j];
                        const double s = coef * (c.w_sign[wo + j] * c.x_sign[xr + j]);
                        const auto row = sums->row(pair);
                        for (std::size_t col = 0; col < row.size(); ++col) col_acc[col] += s * row[col];
                    }
                }
            }
        }
        if (sums) {
            g.theta[li].resize(col_acc.size());
            for (std::size_t col = 0; col < col_acc.size(); ++col) {
                g.theta[li][col] = -std::ldexp(col_acc[col], static_cast<int>(col));
            }
        }
        if (li > 0) {
            col2im(layer.shape, dpatch, pass.batch, din);
            dout.swap(din);
        }
    }
    return g;
}

void calibrate_activations(TinyModel& model, std::span<const double> inputs, std::size_t count) {
    const std::vector<LayerMultiplier> floats(model.num_layers());
    const auto pass = forward(model, inputs, count, floats);
    for (std::size_t li = 0; li < model.num_layers(); ++li) {
        model.layers[li].act_spec = calibrate(pass.layers[li].patches, model.bits);
    }
}

}  // namespace axm
