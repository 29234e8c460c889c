/// @file emitter.cpp

#include "axm/emitter.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_map>
#include <fmt/format.h>

#include "axm/error.hpp"

namespace axm {

namespace {

constexpr std::array<std::string_view, 24> kReservedWords = {
    "module", "endmodule", "input",  "output", "inout",  "wire",  "reg",    "assign",
    "always", "begin",     "end",    "if",     "else",   "case",  "endcase", "for",
    "initial", "integer",  "parameter", "localparam", "function", "task", "and", "or",
};

// Verilog operand for a signal: w[i], x[j], 1'b0 or the wire name.
std::string operand(const MultiplierNetlist& net, SignalId id) {
    const auto& s = net.signal(id);
    switch (s.kind) {
    case SignalKind::kInputW: return fmt::format("w[{}]", s.column);
    case SignalKind::kInputX: return fmt::format("x[{}]", s.column);
    case SignalKind::kConstZero: return "1'b0";
    default: return net.signal_name(id);
    }
}

std::string json_path(std::string_view section, std::size_t index, std::string_view field) {
    return fmt::format("{}[{}].{}", section, index, field);
}

}  // namespace

bool is_verilog_identifier(std::string_view name) {
    if (name.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
    for (char ch : name) {
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '$')) return false;
    }
    return std::find(kReservedWords.begin(), kReservedWords.end(), name) == kReservedWords.end();
}

// ---------------------------------------------------------------------------
// Verilog

std::string emit_verilog(const MultiplierNetlist& net, std::string_view module_name, VerilogStyle style) {
    if (!is_verilog_identifier(module_name)) {
        throw ValidationError(fmt::format("'{}' is not a valid Verilog module name", module_name));
    }
    const int b = net.bitwidth();
    std::string out;
    auto emit = [&out](std::string_view line) {
        out.append(line);
        out.push_back('\n');
    };

    emit(fmt::format("// {}-bit unsigned array multiplier, {} constant-0 overrides", b, net.forced_count()));
    if (style == VerilogStyle::kCells) emit("// HA(a, b -> s, co) and FA(a, b, ci -> s, co) cells come from the target library");
    emit(fmt::format("module {} (", module_name));
    emit(fmt::format("    input  wire [{}:0] w,", b - 1));
    emit(fmt::format("    input  wire [{}:0] x,", b - 1));
    emit(fmt::format("    output wire [{}:0] y", 2 * b - 1));
    emit(");");

    for (const auto& g : net.gates()) emit(fmt::format("    wire {};", net.signal_name(g.out)));
    for (const auto& c : net.compressors()) {
        emit(fmt::format("    wire {};", net.signal_name(c.sum)));
        emit(fmt::format("    wire {};", net.signal_name(c.carry)));
    }
    emit("");

    for (const auto& g : net.gates()) {
        if (net.is_forced(g.out)) {
            emit(fmt::format("    assign {} = 1'b0;", net.signal_name(g.out)));
        } else {
            emit(fmt::format("    assign {} = w[{}] & x[{}];", net.signal_name(g.out), g.i, g.j));
        }
    }

    for (const auto& c : net.compressors()) {
        const bool full = c.kind == CompressorKind::kFullAdder;
        const std::string a = operand(net, c.inputs[0]);
        const std::string bb = operand(net, c.inputs[1]);
        const std::string ci = full ? operand(net, c.inputs[2]) : std::string();
        const std::string s = net.signal_name(c.sum);
        const std::string co = net.signal_name(c.carry);
        const bool s_forced = net.is_forced(c.sum);
        const bool co_forced = net.is_forced(c.carry);

        if (style == VerilogStyle::kCells) {
            const std::string s_port = s_forced ? "" : s;
            const std::string co_port = co_forced ? "" : co;
            if (full) {
                emit(fmt::format("    FA u_{} (.a({}), .b({}), .ci({}), .s({}), .co({}));", s, a, bb, ci, s_port, co_port));
            } else {
                emit(fmt::format("    HA u_{} (.a({}), .b({}), .s({}), .co({}));", s, a, bb, s_port, co_port));
            }
            if (s_forced) emit(fmt::format("    assign {} = 1'b0;", s));
            if (co_forced) emit(fmt::format("    assign {} = 1'b0;", co));
            continue;
        }

        emit(fmt::format("    // {} column {}", full ? "FA" : "HA", c.column));
        if (s_forced) emit(fmt::format("    assign {} = 1'b0;", s));
        else if (full) emit(fmt::format("    assign {} = {} ^ {} ^ {};", s, a, bb, ci));
        else emit(fmt::format("    assign {} = {} ^ {};", s, a, bb));
        if (co_forced) emit(fmt::format("    assign {} = 1'b0;", co));
        else if (full) emit(fmt::format("    assign {} = ({} & {}) | ({} & {}) | ({} & {});", co, a, bb, a, ci, bb, ci));
        else emit(fmt::format("    assign {} = {} & {};", co, a, bb));
    }
    emit("");

    const auto outs = net.outputs();
    for (std::size_t k = 0; k < outs.size(); ++k) emit(fmt::format("    assign y[{}] = {};", k, operand(net, outs[k])));
    emit("endmodule");
    return out;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json netlist_to_json(const MultiplierNetlist& net) {
    nlohmann::json gates = nlohmann::json::array();
    for (const auto& g : net.gates()) gates.push_back({{"i", g.i}, {"j", g.j}, {"out", net.signal_name(g.out)}});
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : net.compressors()) {
        nlohmann::json inputs = nlohmann::json::array();
        for (const auto in : c.input_span()) inputs.push_back(net.signal_name(in));
        comps.push_back({{"kind", c.kind == CompressorKind::kFullAdder ? "FA" : "HA"},
                         {"column", c.column},
                         {"inputs", std::move(inputs)},
                         {"sum", net.signal_name(c.sum)},
                         {"carry", net.signal_name(c.carry)}});
    }
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto o : net.outputs()) outputs.push_back(net.signal_name(o));
    nlohmann::json forced = nlohmann::json::array();
    for (const auto f : net.forced_zero()) forced.push_back(net.signal_name(f));
    return {{"bitwidth", net.bitwidth()},
            {"gates", std::move(gates)},
            {"compressors", std::move(comps)},
            {"outputs", std::move(outputs)},
            {"forced_zero", std::move(forced)}};
}

std::string emit_json(const MultiplierNetlist& net) { return netlist_to_json(net).dump(2) + "\n"; }

namespace {

struct ParsedName {
    SignalKind kind;
    int column;
    int ordinal;
};

// Parses pp_c<col>_<n> / s_c<col>_<n> / co_c<col>_<n>.
std::optional<ParsedName> parse_internal_name(std::string_view name) {
    const auto us = name.find("_c");
    if (us == std::string_view::npos) return std::nullopt;
    ParsedName p{};
    const auto prefix = name.substr(0, us);
    if (prefix == "pp") p.kind = SignalKind::kPartialProduct;
    else if (prefix == "s") p.kind = SignalKind::kSum;
    else if (prefix == "co") p.kind = SignalKind::kCarry;
    else return std::nullopt;
    const auto rest = std::string(name.substr(us + 2));
    const auto us2 = rest.find('_');
    if (us2 == std::string::npos) return std::nullopt;
    try {
        std::size_t pos = 0;
        p.column = std::stoi(rest.substr(0, us2), &pos);
        if (pos != us2) return std::nullopt;
        const auto tail = rest.substr(us2 + 1);
        p.ordinal = std::stoi(tail, &pos);
        if (pos != tail.size() || p.ordinal < 0) return std::nullopt;
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return p;
}

const nlohmann::json& require(const nlohmann::json& obj, const char* field, const std::string& where) {
    if (!obj.is_object() || !obj.contains(field)) {
        throw ValidationError(fmt::format("{}: missing field '{}'", where, field));
    }
    return obj[field];
}

int require_int(const nlohmann::json& obj, const char* field, const std::string& where) {
    const auto& v = require(obj, field, where);
    if (!v.is_number_integer()) throw ValidationError(fmt::format("{}.{}: expected an integer", where, field));
    return v.get<int>();
}

std::string require_string(const nlohmann::json& v, const std::string& where) {
    if (!v.is_string()) throw ValidationError(fmt::format("{}: expected a signal name string", where));
    return v.get<std::string>();
}

void check_fields(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(fmt::format("{}: expected an object", where));
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ValidationError(fmt::format("{}: unknown field '{}'", where, key));
        }
    }
}

}  // namespace

MultiplierNetlist netlist_from_json(const nlohmann::json& doc) {
    check_fields(doc, {"bitwidth", "gates", "compressors", "outputs", "forced_zero"}, "netlist");
    for (const char* field : {"gates", "compressors", "outputs", "forced_zero"}) {
        if (!require(doc, field, "netlist").is_array()) {
            throw ValidationError(fmt::format("netlist.{}: expected a list", field));
        }
    }
    const int b = require_int(doc, "bitwidth", "netlist");
    NetlistBuilder nb(b);
    std::unordered_map<std::string, SignalId> names;
    for (int i = 0; i < b; ++i) {
        names.emplace(fmt::format("w{}", i), nb.w(i));
        names.emplace(fmt::format("x{}", i), nb.x(i));
    }
    names.emplace("zero", nb.zero());
    const auto lookup = [&](const std::string& name, const std::string& where) {
        const auto it = names.find(name);
        if (it == names.end()) throw ValidationError(fmt::format("{}: unknown or not yet defined signal '{}'", where, name));
        return it->second;
    };
    const auto define = [&](const std::string& name, SignalId id, const std::string& where) {
        if (!names.emplace(name, id).second) throw ValidationError(fmt::format("{}: signal '{}' driven twice", where, name));
    };

    const auto& gates = doc["gates"];
    for (std::size_t k = 0; k < gates.size(); ++k) {
        const auto where = fmt::format("gates[{}]", k);
        check_fields(gates[k], {"i", "j", "out"}, where);
        const int i = require_int(gates[k], "i", where);
        const int j = require_int(gates[k], "j", where);
        const auto out = require_string(require(gates[k], "out", where), json_path("gates", k, "out"));
        const auto parsed = parse_internal_name(out);
        if (!parsed || parsed->kind != SignalKind::kPartialProduct || parsed->column != i + j) {
            throw ValidationError(fmt::format("{}.out: '{}' is not a partial product name for column {}", where, out, i + j));
        }
        if (i < 0 || i >= b || j < 0 || j >= b) throw ValidationError(fmt::format("{}: operand bit out of range", where));
        define(out, nb.add_and(i, j, parsed->ordinal), where);
    }

    const auto& comps = doc["compressors"];
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const auto where = fmt::format("compressors[{}]", k);
        const auto& c = comps[k];
        check_fields(c, {"kind", "column", "inputs", "sum", "carry"}, where);
        const auto kind_text = require_string(require(c, "kind", where), where + ".kind");
        CompressorKind kind;
        if (kind_text == "HA") kind = CompressorKind::kHalfAdder;
        else if (kind_text == "FA") kind = CompressorKind::kFullAdder;
        else throw ValidationError(fmt::format("{}.kind: expected HA or FA, got '{}'", where, kind_text));
        const int column = require_int(c, "column", where);
        const auto& inputs = require(c, "inputs", where);
        if (!inputs.is_array()) throw ValidationError(fmt::format("{}.inputs: expected a list", where));
        std::vector<SignalId> in;
        for (std::size_t t = 0; t < inputs.size(); ++t) {
            const auto field = fmt::format("{}.inputs[{}]", where, t);
            in.push_back(lookup(require_string(inputs[t], field), field));
        }
        const auto sum = require_string(require(c, "sum", where), where + ".sum");
        const auto carry = require_string(require(c, "carry", where), where + ".carry");
        const auto ps = parse_internal_name(sum);
        const auto pc = parse_internal_name(carry);
        if (!ps || ps->kind != SignalKind::kSum || ps->column != column) {
            throw ValidationError(fmt::format("{}.sum: '{}' is not a sum name for column {}", where, sum, column));
        }
        if (!pc || pc->kind != SignalKind::kCarry || pc->column != column + 1) {
            throw ValidationError(fmt::format("{}.carry: '{}' is not a carry name for column {}", where, carry, column + 1));
        }
        try {
            const auto [s, co] = nb.add_compressor(kind, column, in, ps->ordinal, pc->ordinal);
            define(sum, s, where);
            define(carry, co, where);
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("{}: {}", where, e.what()));
        }
    }

    const auto& outputs = doc["outputs"];
    std::vector<SignalId> outs;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        const auto field = fmt::format("outputs[{}]", k);
        outs.push_back(lookup(require_string(outputs[k], field), field));
    }
    nb.set_outputs(std::move(outs));
    MultiplierNetlist net = std::move(nb).build();

    const auto& forced = doc["forced_zero"];
    for (std::size_t k = 0; k < forced.size(); ++k) {
        const auto field = fmt::format("forced_zero[{}]", k);
        const auto id = lookup(require_string(forced[k], field), field);
        try {
            net.force_zero(id);
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("{}: {}", field, e.what()));
        }
    }
    return net;
}

MultiplierNetlist load_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(fmt::format("netlist JSON: {}", e.what()));
    }
    return netlist_from_json(doc);
}

// ---------------------------------------------------------------------------
// Verilog interpreter

class VerilogParser {
public:
    explicit VerilogParser(std::string_view text) : text_(text) { tokenize(); }

    VerilogEvaluator run() {
        expect("module");
        ev_.module_ = identifier();
        expect("(");
        int w_bits = -1, x_bits = -1, y_bits = -1;
        while (true) {
            const auto dir = take();
            if (dir != "input" && dir != "output") fail(fmt::format("expected port direction, got '{}'", dir));
            if (peek() == "wire") take();
            int width = 1;
            if (peek() == "[") {
                take();
                width = number() + 1;
                expect(":");
                if (number() != 0) fail("port ranges must end at 0");
                expect("]");
            }
            const auto name = identifier();
            if (name == "w" && dir == "input") w_bits = width;
            else if (name == "x" && dir == "input") x_bits = width;
            else if (name == "y" && dir == "output") y_bits = width;
            else fail(fmt::format("unexpected port '{}'", name));
            if (peek() == ",") {
                take();
                continue;
            }
            expect(")");
            expect(";");
            break;
        }
        if (w_bits < 1 || w_bits != x_bits || y_bits != 2 * w_bits) fail("ports must be w[B-1:0], x[B-1:0], y[2B-1:0]");
        ev_.bits_ = w_bits;
        ev_.outputs_.assign(y_bits, -1);

        while (peek() != "endmodule") {
            const auto tok = take();
            if (tok == "wire") {
                do {
                    identifier();
                } while (accept(","));
                expect(";");
            } else if (tok == "assign") {
                std::string target = identifier();
                int y_bit = -1;
                if (target == "y") {
                    expect("[");
                    y_bit = number();
                    expect("]");
                    target = fmt::format("y[{}]", y_bit);
                }
                expect("=");
                const int root = parse_or();
                expect(";");
                const int st = add_statement(target, root);
                if (y_bit >= 0) {
                    if (y_bit >= y_bits) fail(fmt::format("output bit y[{}] out of range", y_bit));
                    ev_.outputs_[y_bit] = st;
                }
            } else if (tok == "HA" || tok == "FA") {
                parse_cell(tok == "FA");
            } else {
                fail(fmt::format("unsupported construct '{}'", tok));
            }
        }
        take();
        for (std::size_t k = 0; k < ev_.outputs_.size(); ++k) {
            if (ev_.outputs_[k] < 0) fail(fmt::format("output y[{}] is never assigned", k));
        }
        return std::move(ev_);
    }

private:
    using Node = VerilogEvaluator::Node;

    void tokenize() {
        std::size_t i = 0;
        while (i < text_.size()) {
            const char ch = text_[i];
            if (std::isspace(static_cast<unsigned char>(ch))) {
                ++i;
            } else if (text_.substr(i, 2) == "//") {
                while (i < text_.size() && text_[i] != '\n') ++i;
            } else if (text_.substr(i, 2) == "/*") {
                const auto end = text_.find("*/", i + 2);
                i = end == std::string_view::npos ? text_.size() : end + 2;
            } else if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
                std::size_t j = i;
                while (j < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_' || text_[j] == '$')) ++j;
                tokens_.emplace_back(text_.substr(i, j - i));
                i = j;
            } else if (std::isdigit(static_cast<unsigned char>(ch))) {
                std::size_t j = i;
                while (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) ++j;
                if (j + 2 < text_.size() + 0 && text_[j] == '\'' && (text_[j + 1] == 'b' || text_[j + 1] == 'B')) {
                    j += 2;
                    while (j < text_.size() && (text_[j] == '0' || text_[j] == '1')) ++j;
                }
                tokens_.emplace_back(text_.substr(i, j - i));
                i = j;
            } else {
                tokens_.emplace_back(text_.substr(i, 1));
                ++i;
            }
        }
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ValidationError(fmt::format("verilog (token {}): {}", pos_, msg));
    }
    std::string_view peek() const { return pos_ < tokens_.size() ? std::string_view(tokens_[pos_]) : std::string_view(); }
    std::string take() {
        if (pos_ >= tokens_.size()) fail("unexpected end of input");
        return tokens_[pos_++];
    }
    bool accept(std::string_view tok) {
        if (peek() != tok) return false;
        ++pos_;
        return true;
    }
    void expect(std::string_view tok) {
        if (!accept(tok)) fail(fmt::format("expected '{}', got '{}'", tok, peek()));
    }
    std::string identifier() {
        auto t = take();
        if (!(std::isalpha(static_cast<unsigned char>(t[0])) || t[0] == '_')) fail(fmt::format("expected identifier, got '{}'", t));
        return t;
    }
    int number() {
        const auto t = take();
        if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            fail(fmt::format("expected number, got '{}'", t));
        }
        return std::stoi(t);
    }

    int add_node(Node n) {
        ev_.nodes_.push_back(n);
        return static_cast<int>(ev_.nodes_.size() - 1);
    }
    int add_statement(const std::string& target, int root) {
        if (defined_.count(target)) fail(fmt::format("'{}' assigned twice", target));
        ev_.statements_.push_back({target, root});
        const int idx = static_cast<int>(ev_.statements_.size() - 1);
        defined_.emplace(target, idx);
        return idx;
    }

    // Operand: w[i], x[i], 1'b0, 1'b1, or a defined wire.
    int parse_operand() {
        const auto tok = take();
        if (tok == "1'b0") return add_node({Node::Op::kConst0});
        if (tok == "1'b1") return add_node({Node::Op::kConst1});
        if (tok == "w" || tok == "x") {
            expect("[");
            const int bit = number();
            expect("]");
            if (bit >= ev_.bits_) fail(fmt::format("{}[{}] out of range", tok, bit));
            return add_node({tok == "w" ? Node::Op::kInputW : Node::Op::kInputX, bit});
        }
        const auto it = defined_.find(tok);
        if (it == defined_.end()) fail(fmt::format("use of undefined signal '{}'", tok));
        return add_node({Node::Op::kRef, it->second});
    }
    int parse_primary() {
        if (accept("~")) return add_node({Node::Op::kNot, 0, parse_primary()});
        if (accept("(")) {
            const int n = parse_or();
            expect(")");
            return n;
        }
        return parse_operand();
    }
    int parse_and() {
        int lhs = parse_primary();
        while (accept("&")) lhs = add_node({Node::Op::kAnd, 0, lhs, parse_primary()});
        return lhs;
    }
    int parse_xor() {
        int lhs = parse_and();
        while (accept("^")) lhs = add_node({Node::Op::kXor, 0, lhs, parse_and()});
        return lhs;
    }
    int parse_or() {
        int lhs = parse_xor();
        while (accept("|")) lhs = add_node({Node::Op::kOr, 0, lhs, parse_xor()});
        return lhs;
    }

    void parse_cell(bool full) {
        identifier();  // instance name
        expect("(");
        std::map<std::string, std::string> ports;
        std::map<std::string, int> port_nodes;
        do {
            expect(".");
            const auto port = identifier();
            expect("(");
            if (peek() == ")") {
                ports[port] = "";
            } else if (port == "s" || port == "co") {
                ports[port] = identifier();
            } else {
                port_nodes[port] = parse_operand();
                ports[port] = "<in>";
            }
            expect(")");
        } while (accept(","));
        expect(")");
        expect(";");
        const std::vector<std::string> need = full ? std::vector<std::string>{"a", "b", "ci", "s", "co"}
                                                   : std::vector<std::string>{"a", "b", "s", "co"};
        if (ports.size() != need.size()) fail("cell port list does not match HA/FA");
        for (const auto& p : need) {
            if (!ports.count(p)) fail(fmt::format("cell is missing port '{}'", p));
        }
        const int a = port_nodes.at("a");
        const int b = port_nodes.at("b");
        int sum = add_node({Node::Op::kXor, 0, a, b});
        int carry = add_node({Node::Op::kAnd, 0, a, b});
        if (full) {
            const int c = port_nodes.at("ci");
            sum = add_node({Node::Op::kXor, 0, sum, c});
            const int ac = add_node({Node::Op::kAnd, 0, a, c});
            const int bc = add_node({Node::Op::kAnd, 0, b, c});
            carry = add_node({Node::Op::kOr, 0, add_node({Node::Op::kOr, 0, carry, ac}), bc});
        }
        if (!ports["s"].empty()) add_statement(ports["s"], sum);
        if (!ports["co"].empty()) add_statement(ports["co"], carry);
    }

    std::string_view text_;
    std::vector<std::string> tokens_;
    std::size_t pos_ = 0;
    VerilogEvaluator ev_;
    std::unordered_map<std::string, int> defined_;
};

VerilogEvaluator VerilogEvaluator::parse(std::string_view text) { return VerilogParser(text).run(); }

std::uint64_t VerilogEvaluator::eval_node(int node, const std::vector<std::uint64_t>& values,
                                          const std::vector<std::uint64_t>& w_words,
                                          const std::vector<std::uint64_t>& x_words) const {
    const Node& n = nodes_[node];
    switch (n.op) {
    case Node::Op::kConst0: return 0;
    case Node::Op::kConst1: return ~0ULL;
    case Node::Op::kInputW: return w_words[n.operand];
    case Node::Op::kInputX: return x_words[n.operand];
    case Node::Op::kRef: return values[n.operand];
    case Node::Op::kNot: return ~eval_node(n.lhs, values, w_words, x_words);
    case Node::Op::kAnd: return eval_node(n.lhs, values, w_words, x_words) & eval_node(n.rhs, values, w_words, x_words);
    case Node::Op::kOr: return eval_node(n.lhs, values, w_words, x_words) | eval_node(n.rhs, values, w_words, x_words);
    case Node::Op::kXor: return eval_node(n.lhs, values, w_words, x_words) ^ eval_node(n.rhs, values, w_words, x_words);
    }
    return 0;
}

void VerilogEvaluator::eval_block(std::vector<std::uint64_t>& values, const std::vector<std::uint64_t>& w_words,
                                  const std::vector<std::uint64_t>& x_words) const {
    values.resize(statements_.size());
    for (std::size_t s = 0; s < statements_.size(); ++s) values[s] = eval_node(statements_[s].root, values, w_words, x_words);
}

std::uint64_t VerilogEvaluator::evaluate(std::uint64_t w, std::uint64_t x) const {
    std::vector<std::uint64_t> ww(bits_), xw(bits_), values;
    for (int b = 0; b < bits_; ++b) {
        ww[b] = (w >> b) & 1;
        xw[b] = (x >> b) & 1;
    }
    eval_block(values, ww, xw);
    std::uint64_t y = 0;
    for (std::size_t k = 0; k < outputs_.size(); ++k) y |= (values[outputs_[k]] & 1ULL) << k;
    return y;
}

std::vector<std::uint64_t> VerilogEvaluator::evaluate_exhaustive() const {
    if (bits_ > kMaxExhaustiveBitwidth) throw ConfigError("exhaustive Verilog evaluation needs B <= 8");
    const std::size_t total = std::size_t{1} << (2 * bits_);
    std::vector<std::uint64_t> out(total, 0);
    std::vector<std::uint64_t> ww(bits_), xw(bits_), values;
    for (std::size_t base = 0; base < total; base += 64) {
        const std::size_t count = std::min<std::size_t>(64, total - base);
        for (int b = 0; b < bits_; ++b) {
            ww[b] = 0;
            xw[b] = 0;
            for (std::size_t p = 0; p < count; ++p) {
                const std::size_t idx = base + p;
                ww[b] |= static_cast<std::uint64_t>(((idx >> bits_) >> b) & 1) << p;
                xw[b] |= static_cast<std::uint64_t>((idx >> b) & 1) << p;
            }
        }
        eval_block(values, ww, xw);
        for (std::size_t k = 0; k < outputs_.size(); ++k) {
            const std::uint64_t word = values[outputs_[k]];
            for (std::size_t p = 0; p < count; ++p) out[base + p] |= ((word >> p) & 1ULL) << k;
        }
    }
    return out;
}

}  // namespace axm
