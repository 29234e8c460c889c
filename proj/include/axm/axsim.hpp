/// @file axsim.hpp
/// @brief Closed-form differentiable AxM model and sign-magnitude fake quantization.
///
/// An approximated product is modeled as
///
///     Y = W*X - sum_{c<P} 2^c * theta_c * S_c(W, X),   S_c = sum_i W[i] * X[c-i]
///
/// so theta_c = 0 keeps column c exact and theta_c = 1 removes every partial
/// product of column c. Y is affine in each theta_c.
///
/// Signed tensors meet the unsigned multiplier through sign-magnitude coding:
/// magnitudes are quantized to unsigned B-bit codes and multiplied by the AxM,
/// the two signs multiply outside of it.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace axm {

/// Preconditions: Wq, Xq < 2^B, every theta_c in [0, 1], theta.size() <= 2B.
double axm_forward(std::uint32_t wq, std::uint32_t xq, std::span<const double> theta);

/// dY/dtheta_c = -2^c * S_c. Independent of theta.
std::vector<double> axm_backward_theta(std::uint32_t wq, std::uint32_t xq, std::span<const double> theta);

struct OperandGradient {
    double d_w = 0.0;
    double d_x = 0.0;
};

/// Straight-through operand gradient: the bit-decomposition error term is held
/// constant, leaving the exact product rule (Xq, Wq) for every theta.
OperandGradient axm_backward_operands(std::uint32_t wq, std::uint32_t xq, std::span<const double> theta);

/// Column populations S_c for every (W, X) pair and c < P, indexed by
/// ((W << B) | X) * P + c.
class ColumnSumTable {
public:
    ColumnSumTable(int bits, int p_columns);

    int bits() const { return bits_; }
    int p_columns() const { return p_; }
    std::span<const std::uint8_t> row(std::size_t pair_index) const {
        return {sums_.data() + pair_index * static_cast<std::size_t>(p_), static_cast<std::size_t>(p_)};
    }

    /// Y for every pair under `theta` (length P), as axm_forward would compute it.
    std::vector<double> forward_table(std::span<const double> theta) const;

private:
    int bits_;
    int p_;
    std::vector<std::uint8_t> sums_;
};

enum class Granularity { kPerTensor, kPerChannel };

/// Symmetric uniform quantizer for sign-magnitude values. zero_point is always 0.
struct QuantSpec {
    int bits = 8;
    double scale = 1.0;
    int zero_point = 0;
    Granularity granularity = Granularity::kPerTensor;

    std::uint32_t max_code() const { return (1u << bits) - 1u; }
    /// Throws ValidationError if bits is outside [1, 16], scale <= 0, or zero_point != 0.
    void validate() const;

    friend bool operator==(const QuantSpec&, const QuantSpec&) = default;
};

struct QuantizedTensor {
    std::vector<std::uint32_t> codes;
    std::vector<std::int8_t> signs;  // sign(0) = +1
};

/// Min-max calibration: scale = max|x| / (2^B - 1), or 1 for an all-zero tensor.
QuantSpec calibrate(std::span<const double> values, int bits,
                    Granularity granularity = Granularity::kPerTensor);

/// One spec per row of a row-major [rows x cols] tensor.
std::vector<QuantSpec> calibrate_per_channel(std::span<const double> values, std::size_t rows, int bits);

/// q = clamp(round(|x| / scale), 0, 2^B - 1). Throws ValidationError on non-finite input.
QuantizedTensor quantize(std::span<const double> values, const QuantSpec& spec);

std::uint32_t quantize_magnitude(double value, const QuantSpec& spec);

/// sign * q * scale, the value seen by straight-through training.
double fake_quantize(double value, const QuantSpec& spec);

/// Straight-through derivative of fake_quantize: 1 inside the clamp range, 0 outside.
double fake_quantize_grad(double value, const QuantSpec& spec);

/// sign_w * sign_x * Yq * scale_w * scale_x.
double dequantize(double yq, const QuantSpec& w_spec, const QuantSpec& x_spec, int sign_w, int sign_x);

nlohmann::json to_json(const QuantSpec& spec);
QuantSpec quant_spec_from_json(const nlohmann::json& doc);

}  // namespace axm
