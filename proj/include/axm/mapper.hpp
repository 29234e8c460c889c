/// @file mapper.hpp
/// @brief Maps continuous structure parameters onto a concrete approximate
///        multiplier by greedy constant-0 substitution.
///
/// Columns are visited from the least significant one. Within a column every
/// enabled candidate signal is tentatively forced to 0 and kept only if the
/// mean squared error against the closed-form reference strictly decreases.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "axm/circuit.hpp"
#include "axm/metrics.hpp"

namespace axm {

struct CandidateSet {
    bool partial_products = true;
    bool sums = true;
    bool carries = true;

    /// Comma-separated subset of {pp, sum, carry}.
    static CandidateSet parse(std::string_view text);
    std::string to_string() const;
    bool any() const { return partial_products || sums || carries; }
};

enum class OrderPolicy {
    kPartialProductsFirst,  // pp in increasing i, then compressor sum/carry in topological order
    kCompressorsFirst,
};

struct MappingConfig {
    CandidateSet candidates;
    OrderPolicy order = OrderPolicy::kPartialProductsFirst;
    /// MSE weighting; uniform when empty.
    std::optional<InputDistribution> distribution;
};

struct MappingStep {
    std::string signal;
    int column = 0;
    double mse_before = 0.0;
    double mse_after = 0.0;
    bool accepted = false;
};

struct MappingTrace {
    std::string order_policy;
    std::string candidates;
    double initial_mse = 0.0;
    std::vector<MappingStep> steps;
    double final_mse = 0.0;
};

struct MappingResult {
    MultiplierNetlist netlist;
    MappingTrace trace;
};

/// Y_ref(W, X) = W X - sum_c 2^c theta_c S_c(W, X) for every pair, indexed by
/// (W << B) | X. Requires B <= 8.
std::vector<double> reference_outputs(int bits, std::span<const double> theta);

/// `accurate` must carry no overrides; theta.size() is the column limit P.
MappingResult map_structure(const MultiplierNetlist& accurate, std::span<const double> theta,
                            const MappingConfig& cfg = {});

/// Structural simplification of a mapped netlist, checked by exhaustive
/// re-simulation. Throws InternalError if the function changed.
MultiplierNetlist finalize(const MultiplierNetlist& mapped);

nlohmann::json to_json(const MappingTrace& trace);
MappingTrace trace_from_json(const nlohmann::json& doc);

}  // namespace axm
