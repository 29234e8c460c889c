/// @file axsim.cpp

#include "axm/axsim.hpp"

#include <cmath>
#include <fmt/format.h>

#include "axm/circuit.hpp"
#include "axm/error.hpp"

namespace axm {

double axm_forward(std::uint32_t wq, std::uint32_t xq, std::span<const double> theta) {
    double y = static_cast<double>(wq) * static_cast<double>(xq);
    for (std::size_t c = 0; c < theta.size(); ++c) {
        if (theta[c] == 0.0) continue;
        y -= std::ldexp(theta[c] * column_sum(wq, xq, static_cast<int>(c)), static_cast<int>(c));
    }
    return y;
}

std::vector<double> axm_backward_theta(std::uint32_t wq, std::uint32_t xq, std::span<const double> theta) {
    std::vector<double> g(theta.size());
    for (std::size_t c = 0; c < theta.size(); ++c) {
        g[c] = -std::ldexp(static_cast<double>(column_sum(wq, xq, static_cast<int>(c))), static_cast<int>(c));
    }
    return g;
}

OperandGradient axm_backward_operands(std::uint32_t wq, std::uint32_t xq, std::span<const double>) {
    return {static_cast<double>(xq), static_cast<double>(wq)};
}

ColumnSumTable::ColumnSumTable(int bits, int p_columns) : bits_(bits), p_(p_columns) {
    if (bits < 1 || bits > kMaxExhaustiveBitwidth) {
        throw ConfigError(fmt::format("column-sum table supports 1..{} bits, got {}", kMaxExhaustiveBitwidth, bits));
    }
    if (p_columns < 0 || p_columns > 2 * bits) {
        throw ConfigError(fmt::format("P = {} outside [0, {}]", p_columns, 2 * bits));
    }
    const std::size_t n = std::size_t{1} << (2 * bits);
    sums_.resize(n * static_cast<std::size_t>(p_));
    for (std::size_t idx = 0; idx < n; ++idx) {
        const auto w = static_cast<std::uint32_t>(idx >> bits);
        const auto x = static_cast<std::uint32_t>(idx & ((1u << bits) - 1));
        for (int c = 0; c < p_; ++c) sums_[idx * p_ + c] = static_cast<std::uint8_t>(column_sum(w, x, c));
    }
}

std::vector<double> ColumnSumTable::forward_table(std::span<const double> theta) const {
    if (theta.size() != static_cast<std::size_t>(p_)) {
        throw ValidationError(fmt::format("theta has {} entries, expected {}", theta.size(), p_));
    }
    std::vector<double> weight(p_);
    for (int c = 0; c < p_; ++c) weight[c] = std::ldexp(theta[c], c);
    const std::size_t n = std::size_t{1} << (2 * bits_);
    std::vector<double> out(n);
    for (std::size_t idx = 0; idx < n; ++idx) {
        double y = static_cast<double>(idx >> bits_) * static_cast<double>(idx & ((std::size_t{1} << bits_) - 1));
        const auto s = row(idx);
        for (int c = 0; c < p_; ++c) {
            if (theta[c] != 0.0) y -= weight[c] * s[c];
        }
        out[idx] = y;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quantization

void QuantSpec::validate() const {
    if (bits < 1 || bits > 16) throw ValidationError(fmt::format("quantization bits {} outside [1, 16]", bits));
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError(fmt::format("quantization scale {} must be > 0", scale));
    if (zero_point != 0) throw ValidationError("symmetric quantization requires zero_point = 0");
}

QuantSpec calibrate(std::span<const double> values, int bits, Granularity granularity) {
    double max_abs = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw ValidationError("cannot calibrate on non-finite values");
        max_abs = std::max(max_abs, std::abs(v));
    }
    QuantSpec spec;
    spec.bits = bits;
    spec.granularity = granularity;
    spec.scale = max_abs > 0.0 ? max_abs / static_cast<double>((1u << bits) - 1u) : 1.0;
    spec.validate();
    return spec;
}

std::vector<QuantSpec> calibrate_per_channel(std::span<const double> values, std::size_t rows, int bits) {
    if (rows == 0 || values.size() % rows != 0) throw ValidationError("per-channel calibration: bad shape");
    const std::size_t cols = values.size() / rows;
    std::vector<QuantSpec> specs;
    specs.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        specs.push_back(calibrate(values.subspan(r * cols, cols), bits, Granularity::kPerChannel));
    }
    return specs;
}

std::uint32_t quantize_magnitude(double value, const QuantSpec& spec) {
    if (!std::isfinite(value)) throw ValidationError("cannot quantize a non-finite value");
    const double q = std::nearbyint(std::abs(value) / spec.scale);
    return q >= spec.max_code() ? spec.max_code() : static_cast<std::uint32_t>(q);
}

QuantizedTensor quantize(std::span<const double> values, const QuantSpec& spec) {
    spec.validate();
    QuantizedTensor out;
    out.codes.reserve(values.size());
    out.signs.reserve(values.size());
    for (double v : values) {
        out.codes.push_back(quantize_magnitude(v, spec));
        out.signs.push_back(v < 0.0 ? -1 : 1);
    }
    return out;
}

double fake_quantize(double value, const QuantSpec& spec) {
    const double sign = value < 0.0 ? -1.0 : 1.0;
    return sign * static_cast<double>(quantize_magnitude(value, spec)) * spec.scale;
}

double fake_quantize_grad(double value, const QuantSpec& spec) {
    return std::abs(value) / spec.scale <= static_cast<double>(spec.max_code()) + 0.5 ? 1.0 : 0.0;
}

double dequantize(double yq, const QuantSpec& w_spec, const QuantSpec& x_spec, int sign_w, int sign_x) {
    return static_cast<double>(sign_w * sign_x) * yq * w_spec.scale * x_spec.scale;
}

nlohmann::json to_json(const QuantSpec& spec) {
    return {{"bits", spec.bits},
            {"scale", spec.scale},
            {"zero_point", spec.zero_point},
            {"granularity", spec.granularity == Granularity::kPerTensor ? "per-tensor" : "per-channel"}};
}

QuantSpec quant_spec_from_json(const nlohmann::json& doc) {
    QuantSpec spec;
    try {
        spec.bits = doc.at("bits").get<int>();
        spec.scale = doc.at("scale").get<double>();
        spec.zero_point = doc.value("zero_point", 0);
        const auto g = doc.value("granularity", std::string("per-tensor"));
        if (g == "per-tensor") spec.granularity = Granularity::kPerTensor;
        else if (g == "per-channel") spec.granularity = Granularity::kPerChannel;
        else throw ValidationError(fmt::format("unknown granularity '{}'", g));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("bad quantization spec: {}", e.what()));
    }
    spec.validate();
    return spec;
}

}  // namespace axm
