#include "doctest.h"

#include <random>

#include "axm/circuit.hpp"
#include "axm/error.hpp"

using namespace axm;

namespace {

// Independent population count of column c, written without the library helper.
int oracle_column_population(unsigned w, unsigned x, int c, int bits) {
    int s = 0;
    for (int i = 0; i < bits; ++i) {
        const int j = c - i;
        if (j < 0 || j >= bits) continue;
        s += ((w >> i) & 1u) * ((x >> j) & 1u);
    }
    return s;
}

void force_column_pps(MultiplierNetlist& net, int column) {
    for (const auto& g : net.gates()) {
        if (g.i + g.j == column) net.force_zero(g.out);
    }
}

}  // namespace

TEST_CASE("array multiplier is exact for B = 2..8") {
    for (int b = 2; b <= 8; ++b) {
        const auto net = build_array_multiplier(b);
        const auto table = simulate_exhaustive(net);
        const std::uint64_t n = 1ULL << b;
        bool all_ok = true;
        for (std::uint64_t w = 0; w < n; ++w) {
            for (std::uint64_t x = 0; x < n; ++x) all_ok &= table[(w << b) | x] == w * x;
        }
        CHECK_MESSAGE(all_ok, "B = " << b);
    }
}

TEST_CASE("scalar simulate small cases") {
    CHECK(simulate(build_array_multiplier(2), 3, 3) == 9);
    CHECK(simulate(build_array_multiplier(4), 15, 15) == 225);
    CHECK(simulate(build_array_multiplier(16), 65535, 65535) == 65535ULL * 65535ULL);
    CHECK(simulate(build_array_multiplier(12), 1234, 4000) == 1234ULL * 4000ULL);
}

TEST_CASE("bitwidth range is enforced") {
    CHECK_THROWS_AS(build_array_multiplier(1), ConfigError);
    CHECK_THROWS_AS(build_array_multiplier(17), ConfigError);
    CHECK_NOTHROW(build_array_multiplier(16));
    CHECK_THROWS_AS(simulate_exhaustive(build_array_multiplier(9)), ConfigError);
}

TEST_CASE("construction is deterministic") {
    CHECK(build_array_multiplier(6) == build_array_multiplier(6));
    CHECK_FALSE(build_array_multiplier(6) == build_array_multiplier(5));
}

TEST_CASE("4-bit census: column 2 holds 3 AND, 1 HA, 1 FA") {
    const auto c = census(build_array_multiplier(4));
    REQUIRE(c.columns.size() == 8);
    CHECK(c.columns[2] == ColumnCensus{3, 1, 1});
    CHECK(c.columns[0] == ColumnCensus{1, 0, 0});
    CHECK(c.columns[7] == ColumnCensus{0, 0, 0});
}

TEST_CASE("census totals match the row-ripple array recount") {
    for (int b = 2; b <= 8; ++b) {
        const auto net = build_array_multiplier(b);
        const auto t = census(net).total();
        CHECK(t.and_gates == b * b);
        // B-1 rows of B cells; each row starts with an HA, and row 1 also ends with one.
        CHECK(t.half_adders + t.full_adders == (b - 1) * b);
        CHECK(t.half_adders == b);
        CHECK(t.full_adders == b * (b - 2));
        // independent recount by signal kind
        int sums = 0;
        int carries = 0;
        for (const auto& s : net.signals()) {
            sums += s.kind == SignalKind::kSum;
            carries += s.kind == SignalKind::kCarry;
        }
        CHECK(sums == (b - 1) * b);
        CHECK(carries == sums);
    }
}

TEST_CASE("partial product column index is i + j") {
    const auto net = build_array_multiplier(5);
    for (const auto& g : net.gates()) CHECK(net.signal(g.out).column == g.i + g.j);
    for (const auto& c : net.compressors()) {
        CHECK(net.signal(c.sum).column == c.column);
        CHECK(net.signal(c.carry).column == c.column + 1);
    }
}

TEST_CASE("forcing column 0 partial products: 3 x 3 -> 8") {
    auto net = build_array_multiplier(4);
    force_column_pps(net, 0);
    CHECK(simulate(net, 3, 3) == 8);
}

TEST_CASE("column removal subtracts exactly S_c * 2^c") {
    for (int b = 2; b <= 6; ++b) {
        for (int c = 0; c < 2 * b - 1; ++c) {
            auto net = build_array_multiplier(b);
            force_column_pps(net, c);
            const auto table = simulate_exhaustive(net);
            bool ok = true;
            for (unsigned w = 0; w < (1u << b); ++w) {
                for (unsigned x = 0; x < (1u << b); ++x) {
                    const long long expect =
                        static_cast<long long>(w) * x - (static_cast<long long>(oracle_column_population(w, x, c, b)) << c);
                    ok &= static_cast<long long>(table[(w << b) | x]) == expect;
                }
            }
            CHECK_MESSAGE(ok, "B = " << b << " column " << c);
        }
    }
}

TEST_CASE("column_sum agrees with the oracle") {
    for (unsigned w = 0; w < 64; ++w) {
        for (unsigned x = 0; x < 64; ++x) {
            for (int c = 0; c < 12; ++c) REQUIRE(column_sum(w, x, c) == oracle_column_population(w, x, c, 6));
        }
    }
}

TEST_CASE("simulate_batch: 2-bit times table and empty input") {
    const auto net = build_array_multiplier(2);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
    for (std::uint64_t w = 0; w < 4; ++w) {
        for (std::uint64_t x = 0; x < 4; ++x) pairs.emplace_back(w, x);
    }
    const std::vector<std::uint64_t> expect{0, 0, 0, 0, 0, 1, 2, 3, 0, 2, 4, 6, 0, 3, 6, 9};
    CHECK(simulate_batch(net, pairs) == expect);
    CHECK(simulate_batch(net, {}).empty());
}

TEST_CASE("simulate_batch equals scalar simulate on random pairs with overrides") {
    std::mt19937_64 rng(7);
    auto net = build_array_multiplier(8);
    // sprinkle some overrides so the comparison is not only against W*X
    const auto comps = net.compressors();
    for (std::size_t k = 0; k < comps.size(); k += 5) net.force_zero(k % 2 ? comps[k].sum : comps[k].carry);
    for (std::size_t k = 0; k < net.gates().size(); k += 7) net.force_zero(net.gates()[k].out);

    std::uniform_int_distribution<std::uint64_t> d(0, 255);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs(1000);
    for (auto& p : pairs) p = {d(rng), d(rng)};
    const auto batch = simulate_batch(net, pairs);
    const auto exhaustive = simulate_exhaustive(net);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto scalar = simulate(net, pairs[k].first, pairs[k].second);
        REQUIRE(batch[k] == scalar);
        REQUIRE(exhaustive[(pairs[k].first << 8) | pairs[k].second] == scalar);
    }
}

TEST_CASE("forced-zero set: apply, undo, and rejection of primary inputs") {
    auto net = build_array_multiplier(3);
    const auto target = net.compressors()[0].sum;
    net.force_zero(target);
    net.force_zero(target);
    CHECK(net.forced_count() == 1);
    CHECK(net.is_forced(target));
    net.release(target);
    CHECK(net.forced_count() == 0);
    CHECK(net == build_array_multiplier(3));
    CHECK_THROWS_AS(net.force_zero(net.input_w(0)), ValidationError);
    CHECK_THROWS_AS(net.force_zero(net.zero()), ValidationError);
}

TEST_CASE("signal names round-trip through find_signal") {
    const auto net = build_array_multiplier(4);
    for (std::size_t i = 0; i < net.signals().size(); ++i) {
        const SignalId id{static_cast<std::uint32_t>(i)};
        const auto found = net.find_signal(net.signal_name(id));
        REQUIRE(found.has_value());
        CHECK(*found == id);
    }
    CHECK_FALSE(net.find_signal("pp_c9_9").has_value());
    CHECK_FALSE(net.find_signal("bogus").has_value());
    CHECK_FALSE(net.find_signal("w7").has_value());
}

TEST_CASE("simplify: identity without overrides") {
    const auto net = build_array_multiplier(5);
    CHECK(simplify(net) == net);
}

TEST_CASE("simplify: zeroed FA input degrades FA to HA") {
    auto net = build_array_multiplier(4);
    // the FA in column 2 has inputs (running sum, pp(1,1), carry from column 1)
    const Compressor* fa = nullptr;
    for (const auto& c : net.compressors()) {
        if (c.column == 2 && c.kind == CompressorKind::kFullAdder) fa = &c;
    }
    REQUIRE(fa != nullptr);
    net.force_zero(fa->inputs[1]);
    const auto before = census(build_array_multiplier(4));
    const auto after = census(net, CensusMode::kEffective);
    CHECK(after.columns[2].full_adders == before.columns[2].full_adders - 1);
    CHECK(after.columns[2].half_adders == before.columns[2].half_adders + 1);
    CHECK(after.columns[2].and_gates == before.columns[2].and_gates - 1);
    CHECK(simulate_exhaustive(simplify(net)) == simulate_exhaustive(net));
    CHECK(census(net, CensusMode::kRaw).columns[2] == before.columns[2]);
}

TEST_CASE("simplify preserves function under random overrides") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const int b = 2 + trial % 6;
        auto net = build_array_multiplier(b);
        std::bernoulli_distribution pick(0.2);
        for (std::size_t i = 2 * b + 1; i < net.signals().size(); ++i) {
            if (pick(rng)) net.force_zero(SignalId{static_cast<std::uint32_t>(i)});
        }
        const auto simple = simplify(net);
        CHECK(simple.forced_count() == 0);
        CHECK(simulate_exhaustive(simple) == simulate_exhaustive(net));
        const auto t0 = census(build_array_multiplier(b)).total();
        const auto t1 = census(simple).total();
        CHECK(t1.and_gates <= t0.and_gates);
        CHECK(t1.half_adders + t1.full_adders <= t0.half_adders + t0.full_adders);
    }
}

TEST_CASE("all outputs forced: everything is dead") {
    auto net = build_array_multiplier(3);
    for (const auto o : net.outputs()) net.force_zero(o);
    const auto simple = simplify(net);
    CHECK(simple.gates().empty());
    CHECK(simple.compressors().empty());
    for (const auto o : simple.outputs()) CHECK(o == simple.zero());
}
