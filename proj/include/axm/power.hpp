/// @file power.hpp
/// @brief Analytic power model: per-column power of the accurate array,
///        normalized AxM power under structure parameters, and the
///        multiplication-weighted power loss across layers.
///
/// Costs are abstract, technology-agnostic units. Only ratios matter: every
/// quantity reported by this module is normalized by the accurate power.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "axm/circuit.hpp"

namespace axm {

struct ComponentCosts {
    double and_gate = 1.0;
    double half_adder = 2.0;
    double full_adder = 3.0;
};

struct CostTable {
    ComponentCosts base;
    std::map<int, ComponentCosts> per_column_overrides;

    const ComponentCosts& for_column(int column) const;
    /// Throws ValidationError on negative/non-finite costs or an all-zero table.
    void validate() const;
};

/// Costs (AND, HA, FA) = (1, 2, 3).
CostTable default_cost_table();
/// Schema: {and, ha, fa, per_column_overrides?: {"<column>": {and?, ha?, fa?}}}.
CostTable parse_cost_table(const nlohmann::json& doc);
CostTable load_cost_table(const std::filesystem::path& path);
nlohmann::json to_json(const CostTable& table);

struct LayerProfile {
    int layer = 0;
    std::uint64_t mult_count = 0;
};

/// sum_k cost_k * N_{c,k} over the raw census of `net`.
double column_power(const MultiplierNetlist& net, const CostTable& cost, int column);
/// Total cost-weighted component count of a census.
double census_power(const ComponentCensus& census, const CostTable& cost);

/// Column powers of one accurate multiplier, cached for repeated queries.
class PowerModel {
public:
    /// Forced-zero overrides on `accurate` are ignored: the model is defined
    /// on the raw census.
    PowerModel(const MultiplierNetlist& accurate, const CostTable& cost);

    int bitwidth() const { return bitwidth_; }
    std::span<const double> column_powers() const { return column_power_; }
    double accurate_power() const { return total_; }

    /// (Power_AccMul - sum_c theta_c * Power_c) / Power_AccMul.
    double f_power(std::span<const double> theta) const;
    /// d f_power / d theta_c = -Power_c / Power_AccMul, for c < P.
    std::vector<double> f_power_gradient(std::size_t p_columns) const;

    double power_loss(std::span<const LayerProfile> profiles,
                      std::span<const std::vector<double>> thetas) const;
    std::vector<std::vector<double>> grad_power_loss(std::span<const LayerProfile> profiles,
                                                     std::span<const std::vector<double>> thetas) const;

    /// Effective (post-simplification) power of a mapped netlist over the
    /// accurate power.
    double normalized_power(const MultiplierNetlist& mapped) const;

private:
    void check_theta(std::span<const double> theta) const;
    double total_mults(std::span<const LayerProfile> profiles, std::size_t num_thetas) const;

    int bitwidth_ = 0;
    CostTable cost_;
    std::vector<double> column_power_;
    double total_ = 0.0;
};

double f_power(const MultiplierNetlist& net, const CostTable& cost, std::span<const double> theta);
double power_loss(std::span<const LayerProfile> profiles, std::span<const std::vector<double>> thetas,
                  const MultiplierNetlist& net, const CostTable& cost);
std::vector<std::vector<double>> grad_power_loss(std::span<const LayerProfile> profiles,
                                                 std::span<const std::vector<double>> thetas,
                                                 const MultiplierNetlist& net, const CostTable& cost);

}  // namespace axm
