/// @file model.hpp
/// @brief Desk-scale classifiers (MLP, 1-D conv toy) whose instrumented layers
///        run every multiplication through a 2^(2B)-entry product table.
///
/// A quantized layer computes
///
///     y[o] = bias[o] + scale_w[o] * scale_x * sum_k sign_w sign_x T[(Wq << B) | Xq]
///
/// where T is the exact product, the closed-form approximate product for some
/// theta, or the truth table of a mapped netlist. Gradients w.r.t. weights and
/// inputs use the exact-product straight-through rule; the theta gradient is
/// -2^c S_c per multiplication.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "axm/axsim.hpp"
#include "axm/power.hpp"

namespace axm {

enum class LayerKind { kDense, kConv1d };

struct LayerShape {
    LayerKind kind = LayerKind::kDense;
    std::size_t in_features = 0;  // per sample, flattened
    std::size_t out_features = 0;
    // conv1d: valid convolution, stride 1, input laid out as t * in_channels + ch
    std::size_t in_channels = 1;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;

    std::size_t fan_in() const { return kind == LayerKind::kDense ? in_features : in_channels * kernel; }
    std::size_t units() const { return kind == LayerKind::kDense ? out_features : out_channels; }
    std::size_t rows_per_sample() const { return kind == LayerKind::kDense ? 1 : in_features / in_channels - kernel + 1; }
    /// Multiplications per sample.
    std::uint64_t mult_count() const { return static_cast<std::uint64_t>(rows_per_sample()) * units() * fan_in(); }
};

struct Layer {
    LayerShape shape;
    std::vector<double> weight;  // units x fan_in
    std::vector<double> bias;    // units
    QuantSpec act_spec;          // quantizer of this layer's input
    bool instrumented = true;    // false: float arithmetic, no quantization
};

class TinyModel {
public:
    /// He-initialized MLP with ReLU between layers.
    static TinyModel mlp(std::size_t d_in, const std::vector<std::size_t>& hidden, std::size_t d_out, int bits,
                         std::uint64_t seed);
    /// conv1d(1 -> channels, kernel) -> ReLU -> dense(hidden) -> ReLU -> dense(d_out).
    static TinyModel conv_toy(std::size_t d_in, std::size_t channels, std::size_t kernel, std::size_t hidden,
                              std::size_t d_out, int bits, std::uint64_t seed);

    std::string architecture;
    int bits = 8;
    Granularity weight_granularity = Granularity::kPerTensor;
    std::vector<Layer> layers;

    std::size_t num_layers() const { return layers.size(); }
    std::size_t input_dim() const { return layers.front().shape.in_features; }
    std::size_t output_dim() const { return layers.back().shape.out_features; }
    std::vector<LayerProfile> profiles() const;

    /// Throws ValidationError on inconsistent shapes.
    void validate() const;
};

nlohmann::json to_json(const TinyModel& model);
TinyModel model_from_json(const nlohmann::json& doc);

/// How one layer multiplies.
struct LayerMultiplier {
    /// Products indexed by (Wq << B) | Xq; null for a float layer.
    const std::vector<double>* table = nullptr;
    /// When set, backward() fills the theta gradient for this layer.
    const ColumnSumTable* column_sums = nullptr;
};

/// Exact product table for B bits.
std::vector<double> exact_product_table(int bits);
/// Truth table of a netlist as doubles.
std::vector<double> netlist_product_table(const MultiplierNetlist& net);

struct LayerCache {
    std::size_t rows = 0;
    std::vector<double> patches;  // rows x fan_in, real inputs
    std::vector<double> pre;      // rows x units
    std::vector<double> post;     // after ReLU (identity on the last layer)
    // quantized path
    std::vector<std::uint32_t> x_code, w_code;
    std::vector<std::int8_t> x_sign, w_sign;
    std::vector<double> x_fq, w_fq, x_pass, w_pass;
    std::vector<double> w_scale;  // per unit
    double x_scale = 1.0;
};

struct ForwardPass {
    std::size_t batch = 0;
    std::vector<LayerCache> layers;
    const std::vector<double>& logits() const { return layers.back().post; }
};

struct Gradients {
    std::vector<std::vector<double>> weight;
    std::vector<std::vector<double>> bias;
    std::vector<std::vector<double>> theta;  // per layer, empty when not requested
};

ForwardPass forward(const TinyModel& model, std::span<const double> inputs, std::size_t batch,
                    std::span<const LayerMultiplier> mults);

/// Mean softmax cross-entropy; writes d loss / d logits when `dlogits` is given.
double cross_entropy(std::span<const double> logits, std::span<const int> labels, std::size_t classes,
                     std::vector<double>* dlogits = nullptr);

Gradients backward(const TinyModel& model, const ForwardPass& pass, std::span<const double> dlogits,
                   std::span<const LayerMultiplier> mults);

/// Max |input| of every layer over `inputs`, in float arithmetic; used to set act_spec.
void calibrate_activations(TinyModel& model, std::span<const double> inputs, std::size_t count);

}  // namespace axm
