/// @file circuit.cpp
/// @brief Array multiplier construction, simulation, census and simplification.

#include "axm/circuit.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fmt/format.h>

#include "axm/error.hpp"

namespace axm {

namespace {

constexpr int kNumKinds = 6;

const char* kind_prefix(SignalKind kind) {
    switch (kind) {
    case SignalKind::kInputW: return "w";
    case SignalKind::kInputX: return "x";
    case SignalKind::kConstZero: return "zero";
    case SignalKind::kPartialProduct: return "pp";
    case SignalKind::kSum: return "s";
    case SignalKind::kCarry: return "co";
    }
    return "?";
}

std::optional<int> parse_int(std::string_view text) {
    int value = 0;
    if (text.empty()) return std::nullopt;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

std::uint64_t full_mask(std::size_t n) { return n >= 64 ? ~0ULL : ((1ULL << n) - 1); }

// Evaluates one 64-pattern block. `words` holds one word per signal; input
// words must be filled by the caller.
void eval_block(const MultiplierNetlist& net, std::vector<std::uint64_t>& words) {
    const auto forced = [&](SignalId id) { return net.is_forced(id); };
    words[net.zero().index()] = 0;
    for (const auto& g : net.gates()) {
        words[g.out.index()] = forced(g.out)
                                   ? 0
                                   : words[net.input_w(g.i).index()] & words[net.input_x(g.j).index()];
    }
    for (const auto& c : net.compressors()) {
        const std::uint64_t a = words[c.inputs[0].index()];
        const std::uint64_t b = words[c.inputs[1].index()];
        std::uint64_t s = 0;
        std::uint64_t co = 0;
        if (c.kind == CompressorKind::kFullAdder) {
            const std::uint64_t d = words[c.inputs[2].index()];
            s = a ^ b ^ d;
            co = (a & b) | (a & d) | (b & d);
        } else {
            s = a ^ b;
            co = a & b;
        }
        words[c.sum.index()] = forced(c.sum) ? 0 : s;
        words[c.carry.index()] = forced(c.carry) ? 0 : co;
    }
}

// Accumulates output bits of a block into `out[base .. base+count)`.
void gather_outputs(const MultiplierNetlist& net, const std::vector<std::uint64_t>& words,
                    std::uint64_t* out, std::size_t count) {
    std::fill(out, out + count, 0);
    const auto outs = net.outputs();
    for (std::size_t k = 0; k < outs.size(); ++k) {
        std::uint64_t word = words[outs[k].index()];
        while (word != 0) {
            const int p = __builtin_ctzll(word);
            if (static_cast<std::size_t>(p) < count) out[p] |= 1ULL << k;
            word &= word - 1;
        }
    }
}

}  // namespace

ColumnCensus ComponentCensus::total() const {
    ColumnCensus t;
    for (const auto& c : columns) {
        t.and_gates += c.and_gates;
        t.half_adders += c.half_adders;
        t.full_adders += c.full_adders;
    }
    return t;
}

// ---------------------------------------------------------------------------
// MultiplierNetlist

std::string MultiplierNetlist::signal_name(SignalId id) const {
    const Signal& s = signal(id);
    switch (s.kind) {
    case SignalKind::kInputW:
    case SignalKind::kInputX: return fmt::format("{}{}", kind_prefix(s.kind), s.column);
    case SignalKind::kConstZero: return "zero";
    default: return fmt::format("{}_c{}_{}", kind_prefix(s.kind), s.column, s.ordinal);
    }
}

std::optional<SignalId> MultiplierNetlist::find_signal(std::string_view name) const {
    Signal want;
    if (name == "zero") {
        return zero();
    } else if (!name.empty() && (name[0] == 'w' || name[0] == 'x') && name.size() > 1 &&
               std::isdigit(static_cast<unsigned char>(name[1]))) {
        auto bit = parse_int(name.substr(1));
        if (!bit || *bit < 0 || *bit >= bitwidth_) return std::nullopt;
        return name[0] == 'w' ? input_w(*bit) : input_x(*bit);
    } else {
        const auto us = name.find("_c");
        if (us == std::string_view::npos) return std::nullopt;
        const auto prefix = name.substr(0, us);
        if (prefix == "pp") want.kind = SignalKind::kPartialProduct;
        else if (prefix == "s") want.kind = SignalKind::kSum;
        else if (prefix == "co") want.kind = SignalKind::kCarry;
        else return std::nullopt;
        const auto rest = name.substr(us + 2);
        const auto us2 = rest.find('_');
        if (us2 == std::string_view::npos) return std::nullopt;
        auto col = parse_int(rest.substr(0, us2));
        auto ord = parse_int(rest.substr(us2 + 1));
        if (!col || !ord) return std::nullopt;
        want.column = *col;
        want.ordinal = *ord;
    }
    const auto it = std::find(signals_.begin(), signals_.end(), want);
    if (it == signals_.end()) return std::nullopt;
    return SignalId{static_cast<std::uint32_t>(it - signals_.begin())};
}

void MultiplierNetlist::force_zero(SignalId id) {
    const auto kind = signal(id).kind;
    if (kind == SignalKind::kInputW || kind == SignalKind::kInputX || kind == SignalKind::kConstZero) {
        throw ValidationError(fmt::format("signal '{}' cannot be forced to zero", signal_name(id)));
    }
    if (!forced_[id.index()]) {
        forced_[id.index()] = 1;
        ++forced_count_;
    }
}

void MultiplierNetlist::release(SignalId id) {
    if (forced_.at(id.index())) {
        forced_[id.index()] = 0;
        --forced_count_;
    }
}

std::vector<SignalId> MultiplierNetlist::forced_zero() const {
    std::vector<SignalId> out;
    out.reserve(forced_count_);
    for (std::size_t i = 0; i < forced_.size(); ++i) {
        if (forced_[i]) out.push_back(SignalId{static_cast<std::uint32_t>(i)});
    }
    return out;
}

void MultiplierNetlist::clear_forced() {
    std::fill(forced_.begin(), forced_.end(), 0);
    forced_count_ = 0;
}

// ---------------------------------------------------------------------------
// NetlistBuilder

NetlistBuilder::NetlistBuilder(int bitwidth) {
    if (bitwidth < kMinBitwidth || bitwidth > kMaxBitwidth) {
        throw ConfigError(fmt::format("bitwidth {} outside supported range [{}, {}]", bitwidth,
                                      kMinBitwidth, kMaxBitwidth));
    }
    net_.bitwidth_ = bitwidth;
    next_ordinal_.assign(kNumKinds, std::vector<int>(2 * bitwidth + 1, 0));
    for (int b = 0; b < bitwidth; ++b) net_.signals_.push_back({SignalKind::kInputW, b, 0});
    for (int b = 0; b < bitwidth; ++b) net_.signals_.push_back({SignalKind::kInputX, b, 0});
    net_.signals_.push_back({SignalKind::kConstZero, 0, 0});
}

SignalId NetlistBuilder::w(int bit) const {
    if (bit < 0 || bit >= net_.bitwidth_) throw ValidationError(fmt::format("w bit {} out of range", bit));
    return net_.input_w(bit);
}

SignalId NetlistBuilder::x(int bit) const {
    if (bit < 0 || bit >= net_.bitwidth_) throw ValidationError(fmt::format("x bit {} out of range", bit));
    return net_.input_x(bit);
}

SignalId NetlistBuilder::zero() const { return net_.zero(); }

SignalId NetlistBuilder::add_signal(SignalKind kind, int column, int ordinal) {
    if (column < 0 || column >= net_.num_columns()) {
        throw ValidationError(fmt::format("column {} out of range for {}-bit multiplier", column, net_.bitwidth_));
    }
    auto& next = next_ordinal_[static_cast<int>(kind)][column];
    if (ordinal < 0) ordinal = next;
    next = std::max(next, ordinal + 1);
    net_.signals_.push_back({kind, column, ordinal});
    return SignalId{static_cast<std::uint32_t>(net_.signals_.size() - 1)};
}

void NetlistBuilder::check_existing(SignalId id) const {
    if (id.index() >= net_.signals_.size()) {
        throw ValidationError(fmt::format("reference to undefined signal id {}", id.value));
    }
}

SignalId NetlistBuilder::add_and(int i, int j, int ordinal) {
    w(i);
    x(j);
    const SignalId out = add_signal(SignalKind::kPartialProduct, i + j, ordinal);
    net_.gates_.push_back({i, j, out});
    return out;
}

std::pair<SignalId, SignalId> NetlistBuilder::add_compressor(CompressorKind kind, int column,
                                                             std::span<const SignalId> inputs,
                                                             int sum_ordinal, int carry_ordinal) {
    const std::size_t arity = kind == CompressorKind::kFullAdder ? 3 : 2;
    if (inputs.size() != arity) {
        throw ValidationError(fmt::format("{} in column {} needs {} inputs, got {}",
                                          kind == CompressorKind::kFullAdder ? "FA" : "HA", column, arity,
                                          inputs.size()));
    }
    if (column + 1 >= net_.num_columns()) {
        throw ValidationError(fmt::format("compressor in column {} has its carry outside the multiplier", column));
    }
    Compressor c;
    c.kind = kind;
    c.column = column;
    for (std::size_t k = 0; k < arity; ++k) {
        check_existing(inputs[k]);
        c.inputs[k] = inputs[k];
    }
    c.sum = add_signal(SignalKind::kSum, column, sum_ordinal);
    c.carry = add_signal(SignalKind::kCarry, column + 1, carry_ordinal);
    net_.compressors_.push_back(c);
    return {c.sum, c.carry};
}

void NetlistBuilder::set_outputs(std::vector<SignalId> outputs) {
    for (const auto id : outputs) check_existing(id);
    net_.outputs_ = std::move(outputs);
}

MultiplierNetlist NetlistBuilder::build() && {
    if (net_.outputs_.size() != static_cast<std::size_t>(net_.num_columns())) {
        throw ValidationError(fmt::format("netlist needs {} outputs, got {}", net_.num_columns(), net_.outputs_.size()));
    }
    std::vector<Signal> sorted = net_.signals_;
    std::sort(sorted.begin(), sorted.end(), [](const Signal& a, const Signal& b) {
        return std::tie(a.kind, a.column, a.ordinal) < std::tie(b.kind, b.column, b.ordinal);
    });
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) {
        throw ValidationError(fmt::format("duplicate signal {}_c{}_{}", kind_prefix(dup->kind), dup->column, dup->ordinal));
    }
    net_.forced_.assign(net_.signals_.size(), 0);
    net_.forced_count_ = 0;
    return std::move(net_);
}

// ---------------------------------------------------------------------------
// Construction

MultiplierNetlist build_array_multiplier(int bitwidth) {
    NetlistBuilder nb(bitwidth);
    const int n = bitwidth;
    std::vector<std::vector<SignalId>> pp(n, std::vector<SignalId>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) pp[i][j] = nb.add_and(i, j);
    }

    std::vector<std::optional<SignalId>> running(2 * n);
    std::vector<SignalId> outputs(2 * n);
    for (int j = 0; j < n; ++j) running[j] = pp[0][j];
    outputs[0] = *running[0];

    for (int i = 1; i < n; ++i) {
        std::optional<SignalId> carry;
        for (int j = 0; j < n; ++j) {
            const int c = i + j;
            std::vector<SignalId> in;
            if (running[c]) in.push_back(*running[c]);
            in.push_back(pp[i][j]);
            if (carry) in.push_back(*carry);
            const auto kind = in.size() == 3 ? CompressorKind::kFullAdder : CompressorKind::kHalfAdder;
            auto [s, co] = nb.add_compressor(kind, c, in);
            running[c] = s;
            carry = co;
        }
        running[i + n] = carry;
        outputs[i] = *running[i];
    }
    for (int c = n; c < 2 * n; ++c) outputs[c] = *running[c];
    nb.set_outputs(std::move(outputs));
    return std::move(nb).build();
}

// ---------------------------------------------------------------------------
// Simulation

std::uint64_t simulate(const MultiplierNetlist& net, std::uint64_t w, std::uint64_t x) {
    std::vector<std::uint8_t> v(net.signals().size(), 0);
    const int n = net.bitwidth();
    for (int b = 0; b < n; ++b) {
        v[net.input_w(b).index()] = (w >> b) & 1;
        v[net.input_x(b).index()] = (x >> b) & 1;
    }
    for (const auto& g : net.gates()) {
        v[g.out.index()] = net.is_forced(g.out) ? 0 : (v[net.input_w(g.i).index()] & v[net.input_x(g.j).index()]);
    }
    for (const auto& c : net.compressors()) {
        int total = 0;
        for (const auto in : c.input_span()) total += v[in.index()];
        v[c.sum.index()] = net.is_forced(c.sum) ? 0 : (total & 1);
        v[c.carry.index()] = net.is_forced(c.carry) ? 0 : (total >> 1);
    }
    std::uint64_t y = 0;
    const auto outs = net.outputs();
    for (std::size_t k = 0; k < outs.size(); ++k) y |= static_cast<std::uint64_t>(v[outs[k].index()]) << k;
    return y;
}

std::vector<std::uint64_t> simulate_batch(const MultiplierNetlist& net,
                                          std::span<const std::pair<std::uint64_t, std::uint64_t>> pairs) {
    std::vector<std::uint64_t> result(pairs.size());
    std::vector<std::uint64_t> words(net.signals().size(), 0);
    const int n = net.bitwidth();
    for (std::size_t base = 0; base < pairs.size(); base += 64) {
        const std::size_t count = std::min<std::size_t>(64, pairs.size() - base);
        for (int b = 0; b < n; ++b) {
            std::uint64_t ww = 0;
            std::uint64_t xw = 0;
            for (std::size_t p = 0; p < count; ++p) {
                ww |= ((pairs[base + p].first >> b) & 1ULL) << p;
                xw |= ((pairs[base + p].second >> b) & 1ULL) << p;
            }
            words[net.input_w(b).index()] = ww;
            words[net.input_x(b).index()] = xw;
        }
        eval_block(net, words);
        gather_outputs(net, words, result.data() + base, count);
    }
    return result;
}

ExhaustiveSimulator::ExhaustiveSimulator(const MultiplierNetlist& net) {
    if (net.bitwidth() > kMaxExhaustiveBitwidth) {
        throw ConfigError(fmt::format("exhaustive simulation supports B <= {}, got {}", kMaxExhaustiveBitwidth,
                                      net.bitwidth()));
    }
    words_.assign(net.signals().size(), 0);
}

void ExhaustiveSimulator::run(const MultiplierNetlist& net, std::vector<std::uint64_t>& out) {
    const int n = net.bitwidth();
    const std::size_t total = std::size_t{1} << (2 * n);
    out.resize(total);
    words_.resize(net.signals().size());
    // Pattern index p = (W << B) | X; input bit t of p is x_t for t < B, w_{t-B} otherwise.
    static constexpr std::uint64_t kLowBitMasks[6] = {
        0xAAAAAAAAAAAAAAAAULL, 0xCCCCCCCCCCCCCCCCULL, 0xF0F0F0F0F0F0F0F0ULL,
        0xFF00FF00FF00FF00ULL, 0xFFFF0000FFFF0000ULL, 0xFFFFFFFF00000000ULL,
    };
    const std::uint64_t valid = full_mask(std::min<std::size_t>(64, total));
    for (std::size_t base = 0; base < total; base += 64) {
        for (int t = 0; t < 2 * n; ++t) {
            const std::uint64_t word = t < 6 ? kLowBitMasks[t] : (((base >> t) & 1) ? ~0ULL : 0ULL);
            const SignalId id = t < n ? net.input_x(t) : net.input_w(t - n);
            words_[id.index()] = word & valid;
        }
        eval_block(net, words_);
        gather_outputs(net, words_, out.data() + base, std::min<std::size_t>(64, total - base));
    }
}

std::vector<std::uint64_t> simulate_exhaustive(const MultiplierNetlist& net) {
    ExhaustiveSimulator sim(net);
    std::vector<std::uint64_t> out;
    sim.run(net, out);
    return out;
}

int column_sum(std::uint64_t w, std::uint64_t x, int column) {
    int s = 0;
    for (int i = 0; i <= column && i < 64; ++i) s += static_cast<int>(((w >> i) & 1) & ((x >> (column - i)) & 1));
    return s;
}

// ---------------------------------------------------------------------------
// Census and simplification

ComponentCensus census(const MultiplierNetlist& net, CensusMode mode) {
    if (mode == CensusMode::kEffective && net.forced_count() > 0) return census(simplify(net), CensusMode::kRaw);
    ComponentCensus out;
    out.columns.resize(net.num_columns());
    for (const auto& g : net.gates()) ++out.columns[g.i + g.j].and_gates;
    for (const auto& c : net.compressors()) {
        auto& col = out.columns[c.column];
        (c.kind == CompressorKind::kFullAdder ? col.full_adders : col.half_adders) += 1;
    }
    return out;
}

MultiplierNetlist simplify(const MultiplierNetlist& net) {
    const std::size_t ns = net.signals().size();
    const SignalId zero = net.zero();
    // alias[s]: the signal that carries s's value after rewriting.
    std::vector<SignalId> alias(ns);
    for (std::size_t i = 0; i < ns; ++i) alias[i] = SignalId{static_cast<std::uint32_t>(i)};
    const auto resolve = [&](SignalId s) { return net.is_forced(s) ? zero : alias[s.index()]; };

    struct Kept {
        CompressorKind kind;
        int column;
        std::vector<SignalId> inputs;  // original ids, already resolved
        SignalId sum;
        SignalId carry;
    };
    std::vector<Kept> kept;
    for (const auto& c : net.compressors()) {
        std::vector<SignalId> live;
        for (const auto in : c.input_span()) {
            const SignalId r = resolve(in);
            if (r != zero) live.push_back(r);
        }
        if (live.size() <= 1) {
            alias[c.sum.index()] = live.empty() ? zero : live.front();
            alias[c.carry.index()] = zero;
            continue;
        }
        kept.push_back({live.size() == 3 ? CompressorKind::kFullAdder : CompressorKind::kHalfAdder, c.column,
                        std::move(live), c.sum, c.carry});
    }
    std::vector<SignalId> outputs;
    for (const auto o : net.outputs()) outputs.push_back(resolve(o));

    // Dead-logic sweep in reverse topological order. Forced outputs were
    // already rewritten at every consumer, so they read as unused here.
    std::vector<std::uint8_t> used(ns, 0);
    for (const auto o : outputs) used[o.index()] = 1;
    std::vector<std::uint8_t> keep_comp(kept.size(), 0);
    for (std::size_t k = kept.size(); k-- > 0;) {
        const auto& c = kept[k];
        if (used[c.sum.index()] || used[c.carry.index()]) {
            keep_comp[k] = 1;
            for (const auto in : c.inputs) used[in.index()] = 1;
        }
    }

    NetlistBuilder nb(net.bitwidth());
    std::vector<SignalId> remap(ns);
    remap[zero.index()] = nb.zero();
    for (int b = 0; b < net.bitwidth(); ++b) {
        remap[net.input_w(b).index()] = nb.w(b);
        remap[net.input_x(b).index()] = nb.x(b);
    }
    for (const auto& g : net.gates()) {
        if (!used[g.out.index()]) continue;
        remap[g.out.index()] = nb.add_and(g.i, g.j, net.signal(g.out).ordinal);
    }
    for (std::size_t k = 0; k < kept.size(); ++k) {
        if (!keep_comp[k]) continue;
        const auto& c = kept[k];
        std::vector<SignalId> in;
        for (const auto s : c.inputs) in.push_back(remap[s.index()]);
        auto [s, co] = nb.add_compressor(c.kind, c.column, in, net.signal(c.sum).ordinal, net.signal(c.carry).ordinal);
        remap[c.sum.index()] = s;
        remap[c.carry.index()] = co;
    }
    std::vector<SignalId> new_outputs;
    for (const auto o : outputs) new_outputs.push_back(remap[o.index()]);
    nb.set_outputs(std::move(new_outputs));
    return std::move(nb).build();
}

}  // namespace axm
