/// @file emitter.hpp
/// @brief Structural Verilog and canonical JSON serialization of multiplier
///        netlists, plus a small interpreter for the emitted Verilog subset.
///
/// JSON netlist schema (all fields required):
///
///     {
///       "bitwidth": B,
///       "gates":       [{"i": 0, "j": 2, "out": "pp_c2_0"}, ...],
///       "compressors": [{"kind": "FA", "column": 2,
///                        "inputs": ["s_c2_0", "pp_c2_1", "co_c2_0"],
///                        "sum": "s_c2_1", "carry": "co_c3_1"}, ...],
///       "outputs":     ["pp_c0_0", "s_c1_0", ..., 2B names],
///       "forced_zero": ["s_c3_0", ...]
///     }
///
/// Signal names: w<i>, x<j> (operand bits), zero (constant 0), and
/// pp_c<col>_<n>, s_c<col>_<n>, co_c<col>_<n> for partial products, sums and
/// carries. Gates and compressors must appear in topological order.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "axm/circuit.hpp"

namespace axm {

enum class VerilogStyle {
    kAssign,  // sum = a ^ b [^ c], carry = and/majority
    kCells,   // HA / FA instances for users with a cell library
};

/// Throws ValidationError if `module_name` is not a legal Verilog identifier.
std::string emit_verilog(const MultiplierNetlist& net, std::string_view module_name,
                         VerilogStyle style = VerilogStyle::kAssign);

std::string emit_json(const MultiplierNetlist& net);
/// Throws ValidationError naming the offending field.
MultiplierNetlist load_json(std::string_view text);

nlohmann::json netlist_to_json(const MultiplierNetlist& net);
MultiplierNetlist netlist_from_json(const nlohmann::json& doc);

bool is_verilog_identifier(std::string_view name);

/// Interprets the Verilog subset produced by emit_verilog: one module with
/// ports w, x, y; wire declarations; continuous assignments over & ^ | ~ and
/// parentheses; HA/FA instances with named ports.
class VerilogEvaluator {
public:
    static VerilogEvaluator parse(std::string_view text);

    const std::string& module_name() const { return module_; }
    int bitwidth() const { return bits_; }
    std::uint64_t evaluate(std::uint64_t w, std::uint64_t x) const;
    /// All pairs indexed by (W << B) | X; B <= 8.
    std::vector<std::uint64_t> evaluate_exhaustive() const;

private:
    struct Node {
        enum class Op { kConst0, kConst1, kInputW, kInputX, kRef, kNot, kAnd, kOr, kXor } op = Op::kConst0;
        int operand = 0;  // bit index or referenced statement
        int lhs = -1;     // child node indices
        int rhs = -1;
    };
    struct Statement {
        std::string target;
        int root = -1;
    };

    void eval_block(std::vector<std::uint64_t>& values, const std::vector<std::uint64_t>& w_words,
                    const std::vector<std::uint64_t>& x_words) const;
    std::uint64_t eval_node(int node, const std::vector<std::uint64_t>& values,
                            const std::vector<std::uint64_t>& w_words,
                            const std::vector<std::uint64_t>& x_words) const;

    friend class VerilogParser;
    std::string module_;
    int bits_ = 0;
    std::vector<Node> nodes_;
    std::vector<Statement> statements_;  // in evaluation order
    std::vector<int> outputs_;           // statement index per y bit
};

}  // namespace axm
