/// @file metrics.hpp
/// @brief Error metrics (ER, NMED, MaxED, MSE) of a multiplier against the
///        exact product under an input distribution.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "axm/circuit.hpp"

namespace axm {

enum class DistributionKind { kUniform, kEmpirical };

/// Probability of every input pair, stored densely and indexed by (W << B) | X.
class InputDistribution {
public:
    static InputDistribution uniform(int bitwidth);
    /// Product distribution of two per-operand histograms of length 2^B.
    static InputDistribution factored(int bitwidth, std::span<const double> w_hist, std::span<const double> x_hist);
    /// Joint histogram of length 2^(2B).
    static InputDistribution joint(int bitwidth, std::vector<double> weights);

    int bitwidth() const { return bitwidth_; }
    DistributionKind kind() const { return kind_; }
    std::span<const double> probabilities() const { return probs_; }
    double probability(std::size_t index) const { return probs_[index]; }

    /// True when the supplied mass differed from 1 by more than 1e-9 and was rescaled.
    bool renormalized() const { return renormalized_; }
    /// Total mass before normalization.
    double raw_mass() const { return raw_mass_; }

private:
    InputDistribution() = default;
    void normalize();

    int bitwidth_ = 0;
    DistributionKind kind_ = DistributionKind::kUniform;
    std::vector<double> probs_;
    bool renormalized_ = false;
    double raw_mass_ = 1.0;
};

struct ErrorReport {
    double er = 0.0;
    double nmed = 0.0;
    std::uint64_t maxed = 0;
    double mse = 0.0;  // against the exact product

    friend bool operator==(const ErrorReport&, const ErrorReport&) = default;
};

enum class MaxEdScope {
    kSupport,    // inputs with p > 0
    kFullRange,  // all 2^(2B) inputs regardless of p
};

/// Exhaustive evaluation; B must be <= 8 and match the distribution.
ErrorReport evaluate(const MultiplierNetlist& net, const InputDistribution& dist,
                     MaxEdScope scope = MaxEdScope::kSupport);

/// Same metrics from a precomputed output table indexed by (W << B) | X.
ErrorReport evaluate_outputs(std::span<const std::uint64_t> outputs, const InputDistribution& dist,
                             MaxEdScope scope = MaxEdScope::kSupport);

/// sum_i p_i * (outputs_i - reference_i)^2, accumulated in a fixed order.
double weighted_mse(std::span<const std::uint64_t> outputs, std::span<const double> reference,
                    const InputDistribution& dist);

/// Schema: {bitwidth, kind: "uniform"|"empirical", w_hist?, x_hist?, joint?}.
/// Histograms map operand value (as a string key) to weight; joint is a list of
/// [w, x, weight] triples. Prints a warning to stderr when renormalizing.
InputDistribution parse_distribution(const nlohmann::json& doc);
InputDistribution load_distribution(const std::filesystem::path& path);

nlohmann::json to_json(const ErrorReport& report);
std::string csv_header();
std::string to_csv_row(const ErrorReport& report);

}  // namespace axm
