/// @file circuit.hpp
/// @brief Gate-level unsigned array multipliers: construction, bit-exact
///        simulation with constant-0 overrides, and component census.
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace axm {

inline constexpr int kMinBitwidth = 2;
inline constexpr int kMaxBitwidth = 16;
/// Largest bitwidth for which all 2^(2B) input pairs are enumerated.
inline constexpr int kMaxExhaustiveBitwidth = 8;

enum class SignalKind : std::uint8_t {
    kInputW,
    kInputX,
    kConstZero,
    kPartialProduct,
    kSum,
    kCarry,
};

struct SignalId {
    std::uint32_t value = 0;

    constexpr std::size_t index() const { return value; }
    friend constexpr auto operator<=>(SignalId, SignalId) = default;
};

/// A signal is named by (kind, column, ordinal). For primary inputs the column
/// field holds the operand bit index.
struct Signal {
    SignalKind kind = SignalKind::kConstZero;
    int column = 0;
    int ordinal = 0;

    friend bool operator==(const Signal&, const Signal&) = default;
};

/// pp(i, j) = w_i AND x_j, sitting in column i + j.
struct AndGate {
    int i = 0;
    int j = 0;
    SignalId out;

    friend bool operator==(const AndGate&, const AndGate&) = default;
};

enum class CompressorKind : std::uint8_t { kHalfAdder, kFullAdder };

struct Compressor {
    CompressorKind kind = CompressorKind::kHalfAdder;
    int column = 0;
    std::array<SignalId, 3> inputs{};  // third slot unused for half adders
    SignalId sum;
    SignalId carry;  // lives in column + 1

    std::size_t arity() const { return kind == CompressorKind::kFullAdder ? 3 : 2; }
    std::span<const SignalId> input_span() const { return {inputs.data(), arity()}; }

    friend bool operator==(const Compressor&, const Compressor&) = default;
};

struct ColumnCensus {
    int and_gates = 0;
    int half_adders = 0;
    int full_adders = 0;

    friend bool operator==(const ColumnCensus&, const ColumnCensus&) = default;
};

/// Per-column component counts N_{c,k}.
struct ComponentCensus {
    std::vector<ColumnCensus> columns;

    ColumnCensus total() const;
};

class NetlistBuilder;

/// Immutable gate structure plus a mutable set of signals overridden to constant 0.
///
/// Compressors are stored in topological order. Signal ids are dense; the
/// first 2B+1 ids are w_0..w_{B-1}, x_0..x_{B-1} and the constant-zero signal.
class MultiplierNetlist {
public:
    int bitwidth() const { return bitwidth_; }
    int num_columns() const { return 2 * bitwidth_; }

    std::span<const Signal> signals() const { return signals_; }
    std::span<const AndGate> gates() const { return gates_; }
    std::span<const Compressor> compressors() const { return compressors_; }
    std::span<const SignalId> outputs() const { return outputs_; }

    const Signal& signal(SignalId id) const { return signals_.at(id.index()); }
    SignalId input_w(int bit) const { return SignalId{static_cast<std::uint32_t>(bit)}; }
    SignalId input_x(int bit) const { return SignalId{static_cast<std::uint32_t>(bitwidth_ + bit)}; }
    SignalId zero() const { return SignalId{static_cast<std::uint32_t>(2 * bitwidth_)}; }

    /// Canonical name: w3, x0, zero, pp_c2_0, s_c2_1, co_c3_0.
    std::string signal_name(SignalId id) const;
    std::optional<SignalId> find_signal(std::string_view name) const;

    // Constant-0 overrides. Forcing primary inputs or the zero signal is rejected.
    void force_zero(SignalId id);
    void release(SignalId id);
    bool is_forced(SignalId id) const { return forced_[id.index()] != 0; }
    std::size_t forced_count() const { return forced_count_; }
    /// Forced signals in ascending id order.
    std::vector<SignalId> forced_zero() const;
    void clear_forced();

    friend bool operator==(const MultiplierNetlist&, const MultiplierNetlist&) = default;

private:
    friend class NetlistBuilder;
    MultiplierNetlist() = default;

    int bitwidth_ = 0;
    std::vector<Signal> signals_;
    std::vector<AndGate> gates_;
    std::vector<Compressor> compressors_;
    std::vector<SignalId> outputs_;
    std::vector<std::uint8_t> forced_;
    std::size_t forced_count_ = 0;
};

/// Incremental construction with topological order enforced at insertion:
/// every input of a new component must already exist.
class NetlistBuilder {
public:
    explicit NetlistBuilder(int bitwidth);

    SignalId w(int bit) const;
    SignalId x(int bit) const;
    SignalId zero() const;

    /// Adds pp(i, j). A negative ordinal picks the next free one in the column.
    SignalId add_and(int i, int j, int ordinal = -1);
    /// Returns (sum, carry).
    std::pair<SignalId, SignalId> add_compressor(CompressorKind kind, int column,
                                                 std::span<const SignalId> inputs,
                                                 int sum_ordinal = -1, int carry_ordinal = -1);
    void set_outputs(std::vector<SignalId> outputs);

    /// Validates name uniqueness and output count; throws ValidationError.
    MultiplierNetlist build() &&;

private:
    SignalId add_signal(SignalKind kind, int column, int ordinal);
    void check_existing(SignalId id) const;

    MultiplierNetlist net_;
    std::vector<std::vector<int>> next_ordinal_;  // [kind][column]
};

/// Row-ripple array multiplier: row i of partial products is added into the
/// running sum by a chain of HA/FA cells. Throws ConfigError unless 2 <= B <= 16.
MultiplierNetlist build_array_multiplier(int bitwidth);

/// Scalar evaluation honoring constant-0 overrides.
std::uint64_t simulate(const MultiplierNetlist& net, std::uint64_t w, std::uint64_t x);

/// Bit-parallel evaluation of arbitrary input pairs; equal to simulate element-wise.
std::vector<std::uint64_t> simulate_batch(const MultiplierNetlist& net,
                                          std::span<const std::pair<std::uint64_t, std::uint64_t>> pairs);

/// Outputs for every pair, indexed by (W << B) | X. Requires B <= 8.
std::vector<std::uint64_t> simulate_exhaustive(const MultiplierNetlist& net);

/// Reusable scratch for repeated exhaustive simulation of one netlist shape.
class ExhaustiveSimulator {
public:
    explicit ExhaustiveSimulator(const MultiplierNetlist& net);
    /// Re-simulates `net` (same shape as at construction) into `out`.
    void run(const MultiplierNetlist& net, std::vector<std::uint64_t>& out);

private:
    std::vector<std::uint64_t> words_;
};

enum class CensusMode { kRaw, kEffective };

/// Counts per column. kEffective counts what survives constant propagation of
/// the forced-zero set (see simplify).
ComponentCensus census(const MultiplierNetlist& net, CensusMode mode = CensusMode::kRaw);

/// Structural simplification of the forced-zero set: consumers of forced
/// signals read constant 0, FA/HA cells with constant inputs degrade, dead
/// logic is dropped. The result has an empty forced-zero set and the same
/// function as the input.
MultiplierNetlist simplify(const MultiplierNetlist& net);

/// S_c = sum_i w_i * x_{c-i}: the exact column population.
int column_sum(std::uint64_t w, std::uint64_t x, int column);

}  // namespace axm
