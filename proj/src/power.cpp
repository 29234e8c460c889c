/// @file power.cpp

#include "axm/power.hpp"

#include <cmath>
#include <fstream>
#include <fmt/format.h>

#include "axm/error.hpp"

namespace axm {

namespace {

double column_cost(const ColumnCensus& col, const ComponentCosts& c) {
    return c.and_gate * col.and_gates + c.half_adder * col.half_adders + c.full_adder * col.full_adders;
}

void check_cost(double v, const char* what) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError(fmt::format("cost '{}' must be finite and >= 0", what));
}

ComponentCosts parse_costs(const nlohmann::json& node, const ComponentCosts& fallback, bool allow_overrides) {
    if (!node.is_object()) throw ValidationError("cost table entries must be objects");
    ComponentCosts out = fallback;
    for (const auto& [key, value] : node.items()) {
        if (key == "per_column_overrides" && allow_overrides) continue;
        if (!value.is_number()) throw ValidationError(fmt::format("cost table: '{}' must be a number", key));
        if (key == "and") out.and_gate = value.get<double>();
        else if (key == "ha") out.half_adder = value.get<double>();
        else if (key == "fa") out.full_adder = value.get<double>();
        else throw ValidationError(fmt::format("cost table: unknown field '{}'", key));
    }
    return out;
}

}  // namespace

const ComponentCosts& CostTable::for_column(int column) const {
    const auto it = per_column_overrides.find(column);
    return it == per_column_overrides.end() ? base : it->second;
}

void CostTable::validate() const {
    check_cost(base.and_gate, "and");
    check_cost(base.half_adder, "ha");
    check_cost(base.full_adder, "fa");
    bool any_positive = base.and_gate > 0 || base.half_adder > 0 || base.full_adder > 0;
    for (const auto& [col, c] : per_column_overrides) {
        if (col < 0) throw ValidationError(fmt::format("cost override for negative column {}", col));
        check_cost(c.and_gate, "and");
        check_cost(c.half_adder, "ha");
        check_cost(c.full_adder, "fa");
        any_positive |= c.and_gate > 0 || c.half_adder > 0 || c.full_adder > 0;
    }
    if (!any_positive) throw ValidationError("cost table has no positive cost");
}

CostTable default_cost_table() { return CostTable{}; }

CostTable parse_cost_table(const nlohmann::json& doc) {
    CostTable t;
    t.base = parse_costs(doc, ComponentCosts{}, true);
    if (doc.contains("per_column_overrides")) {
        const auto& ov = doc["per_column_overrides"];
        if (!ov.is_object()) throw ValidationError("cost table: 'per_column_overrides' must be an object");
        for (const auto& [key, value] : ov.items()) {
            int col = -1;
            try {
                std::size_t pos = 0;
                col = std::stoi(key, &pos);
                if (pos != key.size()) col = -1;
            } catch (const std::exception&) {
                col = -1;
            }
            if (col < 0) throw ValidationError(fmt::format("cost table: bad column key '{}'", key));
            t.per_column_overrides[col] = parse_costs(value, t.base, false);
        }
    }
    t.validate();
    return t;
}

CostTable load_cost_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open cost table '{}'", path.string()));
    try {
        return parse_cost_table(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

nlohmann::json to_json(const CostTable& table) {
    nlohmann::json j = {{"and", table.base.and_gate}, {"ha", table.base.half_adder}, {"fa", table.base.full_adder}};
    if (!table.per_column_overrides.empty()) {
        auto& ov = j["per_column_overrides"];
        for (const auto& [col, c] : table.per_column_overrides) {
            ov[std::to_string(col)] = {{"and", c.and_gate}, {"ha", c.half_adder}, {"fa", c.full_adder}};
        }
    }
    return j;
}

double column_power(const MultiplierNetlist& net, const CostTable& cost, int column) {
    if (column < 0 || column >= net.num_columns()) {
        throw ValidationError(fmt::format("column {} outside [0, {}]", column, net.num_columns() - 1));
    }
    const auto c = census(net, CensusMode::kRaw);
    return column_cost(c.columns[column], cost.for_column(column));
}

double census_power(const ComponentCensus& census, const CostTable& cost) {
    double total = 0.0;
    for (std::size_t c = 0; c < census.columns.size(); ++c) {
        total += column_cost(census.columns[c], cost.for_column(static_cast<int>(c)));
    }
    return total;
}

// ---------------------------------------------------------------------------

PowerModel::PowerModel(const MultiplierNetlist& accurate, const CostTable& cost)
    : bitwidth_(accurate.bitwidth()), cost_(cost) {
    cost_.validate();
    const auto c = census(accurate, CensusMode::kRaw);
    column_power_.resize(c.columns.size());
    for (std::size_t k = 0; k < c.columns.size(); ++k) {
        column_power_[k] = column_cost(c.columns[k], cost_.for_column(static_cast<int>(k)));
        total_ += column_power_[k];
    }
    if (!(total_ > 0.0)) throw ValidationError("accurate multiplier has zero power under this cost table");
}

void PowerModel::check_theta(std::span<const double> theta) const {
    if (theta.size() > column_power_.size()) {
        throw ValidationError(fmt::format("theta has {} entries but the multiplier has {} columns", theta.size(),
                                          column_power_.size()));
    }
    for (std::size_t c = 0; c < theta.size(); ++c) {
        if (!(theta[c] >= 0.0 && theta[c] <= 1.0)) {
            throw ValidationError(fmt::format("theta[{}] = {} outside [0, 1]", c, theta[c]));
        }
    }
}

double PowerModel::f_power(std::span<const double> theta) const {
    check_theta(theta);
    double removed = 0.0;
    for (std::size_t c = 0; c < theta.size(); ++c) removed += theta[c] * column_power_[c];
    return (total_ - removed) / total_;
}

std::vector<double> PowerModel::f_power_gradient(std::size_t p_columns) const {
    if (p_columns > column_power_.size()) throw ValidationError("P exceeds the number of columns");
    std::vector<double> g(p_columns);
    for (std::size_t c = 0; c < p_columns; ++c) g[c] = -column_power_[c] / total_;
    return g;
}

double PowerModel::total_mults(std::span<const LayerProfile> profiles, std::size_t num_thetas) const {
    if (profiles.empty()) throw ValidationError("power loss needs at least one layer profile");
    if (profiles.size() != num_thetas) {
        throw ValidationError(fmt::format("{} layer profiles but {} theta vectors", profiles.size(), num_thetas));
    }
    double total = 0.0;
    for (const auto& p : profiles) {
        if (p.mult_count == 0) throw ValidationError(fmt::format("layer {} has zero multiplications", p.layer));
        total += static_cast<double>(p.mult_count);
    }
    return total;
}

double PowerModel::power_loss(std::span<const LayerProfile> profiles,
                              std::span<const std::vector<double>> thetas) const {
    const double total = total_mults(profiles, thetas.size());
    double loss = 0.0;
    for (std::size_t l = 0; l < profiles.size(); ++l) {
        loss += f_power(thetas[l]) * static_cast<double>(profiles[l].mult_count) / total;
    }
    return loss;
}

std::vector<std::vector<double>> PowerModel::grad_power_loss(std::span<const LayerProfile> profiles,
                                                             std::span<const std::vector<double>> thetas) const {
    const double total = total_mults(profiles, thetas.size());
    std::vector<std::vector<double>> grad(profiles.size());
    for (std::size_t l = 0; l < profiles.size(); ++l) {
        check_theta(thetas[l]);
        const double share = static_cast<double>(profiles[l].mult_count) / total;
        grad[l] = f_power_gradient(thetas[l].size());
        for (double& g : grad[l]) g *= share;
    }
    return grad;
}

double PowerModel::normalized_power(const MultiplierNetlist& mapped) const {
    if (mapped.bitwidth() != bitwidth_) throw ValidationError("netlist bitwidth differs from the power model");
    return census_power(census(mapped, CensusMode::kEffective), cost_) / total_;
}

double f_power(const MultiplierNetlist& net, const CostTable& cost, std::span<const double> theta) {
    return PowerModel(net, cost).f_power(theta);
}

double power_loss(std::span<const LayerProfile> profiles, std::span<const std::vector<double>> thetas,
                  const MultiplierNetlist& net, const CostTable& cost) {
    return PowerModel(net, cost).power_loss(profiles, thetas);
}

std::vector<std::vector<double>> grad_power_loss(std::span<const LayerProfile> profiles,
                                                 std::span<const std::vector<double>> thetas,
                                                 const MultiplierNetlist& net, const CostTable& cost) {
    return PowerModel(net, cost).grad_power_loss(profiles, thetas);
}

}  // namespace axm
