/// @file trainer.hpp
/// @brief Joint training of weights and structure parameters (exploration),
///        weight-only retraining on mapped multipliers (recovery), and accuracy
///        evaluation.
///
/// Objective: lambda * L_power + cross-entropy. L_power is the
/// mult-count-weighted mean of the per-layer normalized power. Theta is
/// clamped to [0, 1] after every optimizer step.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "axm/dataset.hpp"
#include "axm/model.hpp"
#include "axm/power.hpp"

namespace axm {

enum class ThetaInit {
    kLow4,  // columns 0..3 removed, the rest exact
    kZero,
};

struct TrainConfig {
    double lambda = 0.0;
    int epochs_pretrain = 30;  // float training before exploration
    int epochs_phase1 = 10;
    int epochs_phase3 = 10;
    double lr_pretrain = 0.05;
    double lr_weights = 5e-4;
    double lr_theta = 5e-4;
    double lr_recover = 5e-4;  // cosine-decayed to 0
    double momentum = 0.9;
    double weight_decay = 5e-4;  // weight matrices only
    std::size_t batch_size = 0;  // 0: min(256, max(1, N / 4))
    std::uint64_t seed = 1;
    bool tie_layers = false;
    int p_columns = 8;
    ThetaInit theta_init = ThetaInit::kLow4;

    /// Throws ConfigError / ValidationError.
    void validate(int bits) const;
    std::size_t effective_batch(std::size_t n) const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing fields keep their defaults; unknown fields are rejected.
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig base = {});

struct LossRecord {
    std::string phase;  // explore | recover
    int epoch = 0;
    double l_power = 0.0;
    double l_model = 0.0;
    double total = 0.0;
};

/// Header "phase,epoch,l_power,l_model,total" plus one line per record.
std::string loss_trace_csv(std::span<const LossRecord> trace);

struct TrainState {
    TinyModel model;
    /// One vector per layer, or a single shared vector when layers are tied.
    std::vector<std::vector<double>> theta;
    bool tied = false;
    std::vector<std::vector<double>> vel_weight, vel_bias, vel_theta;
    std::vector<LossRecord> trace;
    std::mt19937_64 rng;

    const std::vector<double>& layer_theta(std::size_t layer) const { return theta[tied ? 0 : layer]; }
    /// Theta expanded to one vector per layer.
    std::vector<std::vector<double>> per_layer_theta() const;
};

TrainState init_state(TinyModel model, const TrainConfig& cfg);

/// Divergence (non-finite loss). state() carries a diagnostic dump.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, nlohmann::json state)
        : std::runtime_error(what), state_(std::move(state)) {}
    const nlohmann::json& state() const { return state_; }

private:
    nlohmann::json state_;
};

/// Owns the product tables behind a set of LayerMultipliers. Layers with
/// instrumented == false run in float.
class MultiplierSet {
public:
    static MultiplierSet exact(const TinyModel& model);
    /// `column_sums` must outlive the set when `with_theta_grad` is true.
    static MultiplierSet from_theta(const TinyModel& model, const ColumnSumTable& column_sums,
                                    std::span<const std::vector<double>> per_layer_theta, bool with_theta_grad);
    static MultiplierSet from_netlists(const TinyModel& model, std::span<const MultiplierNetlist> per_layer);
    static MultiplierSet floating(const TinyModel& model);

    MultiplierSet(MultiplierSet&&) = default;
    MultiplierSet& operator=(MultiplierSet&&) = default;
    MultiplierSet(const MultiplierSet&) = delete;
    MultiplierSet& operator=(const MultiplierSet&) = delete;

    std::span<const LayerMultiplier> layers() const { return mults_; }

private:
    MultiplierSet() = default;
    std::vector<std::vector<double>> tables_;
    std::vector<LayerMultiplier> mults_;
};

struct Objective {
    double l_model = 0.0;
    double l_power = 0.0;
    double total = 0.0;
};

/// Objective on one batch with the closed-form multipliers. When `theta_grad`
/// is given it receives d total / d theta in the layout of state.theta.
Objective objective(const TrainState& state, std::span<const double> inputs, std::span<const int> labels,
                    const TrainConfig& cfg, const PowerModel& power, const ColumnSumTable& column_sums,
                    std::vector<std::vector<double>>* theta_grad = nullptr, Gradients* weight_grad = nullptr);

/// Float training with constant learning rate, then activation calibration.
void pretrain(TrainState& state, const Dataset& train, const TrainConfig& cfg);

/// Phase 1. Appends one LossRecord per epoch.
void explore(TrainState& state, const Dataset& train, const TrainConfig& cfg, const PowerModel& power);

/// Phase 3: weights only, bit-exact products from the mapped netlists.
void recover(TrainState& state, std::span<const MultiplierNetlist> per_layer, const Dataset& train,
             const TrainConfig& cfg);

double evaluate_accuracy(const TinyModel& model, const Dataset& data, std::span<const LayerMultiplier> mults);
double evaluate_accuracy(const TinyModel& model, const Dataset& data, std::span<const std::vector<double>> per_layer_theta);
double evaluate_accuracy(const TinyModel& model, const Dataset& data, std::span<const MultiplierNetlist> per_layer);

nlohmann::json checkpoint(const TrainState& state);
TrainState restore_checkpoint(const nlohmann::json& doc);

}  // namespace axm
