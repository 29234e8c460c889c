#include "doctest.h"

#include <random>

#include "axm/axsim.hpp"
#include "axm/error.hpp"
#include "axm/mapper.hpp"

using namespace axm;

namespace {

// Initial MSE of the accurate circuit against the reference, by brute force
// over every pair with its own column-population loop.
double brute_force_initial_mse(int bits, const std::vector<double>& theta) {
    const unsigned n = 1u << bits;
    double acc = 0;
    for (unsigned w = 0; w < n; ++w) {
        for (unsigned x = 0; x < n; ++x) {
            double err = 0;
            for (std::size_t c = 0; c < theta.size(); ++c) {
                int s = 0;
                for (int i = 0; i < bits; ++i) {
                    const int j = static_cast<int>(c) - i;
                    if (j >= 0 && j < bits) s += ((w >> i) & 1) & ((x >> j) & 1);
                }
                err += theta[c] * s * static_cast<double>(1u << c);
            }
            acc += err * err;
        }
    }
    return acc / (static_cast<double>(n) * n);
}

void check_trace_invariants(const MappingTrace& trace) {
    double last = trace.initial_mse;
    for (const auto& s : trace.steps) {
        CHECK(s.mse_before == last);
        if (s.accepted) {
            CHECK(s.mse_after < s.mse_before);
            last = s.mse_after;
        }
    }
    CHECK(trace.final_mse == last);
    CHECK(trace.final_mse <= trace.initial_mse);
}

}  // namespace

TEST_CASE("reference outputs") {
    const auto zero = reference_outputs(4, std::vector<double>(8, 0.0));
    for (unsigned w = 0; w < 16; ++w) {
        for (unsigned x = 0; x < 16; ++x) CHECK(zero[(w << 4) | x] == w * x);
    }
    const auto one = reference_outputs(4, std::vector<double>{1, 0, 0});
    CHECK(one[(15u << 4) | 15u] == 224.0);
    CHECK_THROWS_AS(reference_outputs(9, std::vector<double>{}), ConfigError);
    CHECK_THROWS_AS(reference_outputs(4, std::vector<double>{1.2}), ValidationError);
    CHECK_THROWS_AS(reference_outputs(2, std::vector<double>(5, 0.0)), ValidationError);
}

TEST_CASE("reference outputs agree with axm_forward on every input (B = 8)") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> theta(8);
    for (auto& t : theta) t = u(rng);
    const auto ref = reference_outputs(8, theta);
    bool ok = true;
    for (std::uint32_t w = 0; w < 256; ++w) {
        for (std::uint32_t x = 0; x < 256; ++x) ok &= ref[(w << 8) | x] == axm_forward(w, x, theta);
    }
    CHECK(ok);
}

TEST_CASE("theta = 0 maps to the accurate multiplier") {
    const auto acc = build_array_multiplier(6);
    const auto r = map_structure(acc, std::vector<double>(8, 0.0));
    CHECK(r.trace.initial_mse == 0.0);
    CHECK(r.trace.final_mse == 0.0);
    for (const auto& s : r.trace.steps) CHECK_FALSE(s.accepted);
    CHECK(r.netlist.forced_count() == 0);
    CHECK(simulate_exhaustive(r.netlist) == simulate_exhaustive(acc));
}

TEST_CASE("theta = 1 below P zeroes every partial product there") {
    const auto acc = build_array_multiplier(5);
    const int p = 4;
    const auto r = map_structure(acc, std::vector<double>(p, 1.0));
    CHECK(r.trace.final_mse == 0.0);
    for (const auto& g : r.netlist.gates()) CHECK(r.netlist.is_forced(g.out) == (g.i + g.j < p));
    check_trace_invariants(r.trace);
}

TEST_CASE("B = 4, theta = [0.5, 0, 0]: initial MSE 0.0625") {
    const std::vector<double> theta{0.5, 0, 0};
    const double oracle = brute_force_initial_mse(4, theta);
    CHECK(oracle == 0.0625);
    const auto r = map_structure(build_array_multiplier(4), theta);
    CHECK(r.trace.initial_mse == doctest::Approx(oracle).epsilon(1e-15));
    CHECK(r.trace.final_mse <= 0.0625);
    check_trace_invariants(r.trace);
}

TEST_CASE("initial MSE matches brute force on random theta") {
    std::mt19937_64 rng(30);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> theta(5);
        for (auto& t : theta) t = u(rng);
        const auto r = map_structure(build_array_multiplier(4), theta);
        CHECK(r.trace.initial_mse == doctest::Approx(brute_force_initial_mse(4, theta)).epsilon(1e-12));
    }
}

TEST_CASE("greedy trace invariants on random theta") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const int bits = 3 + trial % 4;
        std::vector<double> theta(std::min(8, 2 * bits));
        for (auto& t : theta) t = u(rng);
        const auto r = map_structure(build_array_multiplier(bits), theta);
        check_trace_invariants(r.trace);
        // total function over every input
        const auto table = simulate_exhaustive(r.netlist);
        CHECK(table.size() == (std::size_t{1} << (2 * bits)));
        const auto ref = reference_outputs(bits, theta);
        CHECK(weighted_mse(table, ref, InputDistribution::uniform(bits)) == doctest::Approx(r.trace.final_mse));
    }
}

TEST_CASE("candidate order: pp first by increasing i, then compressor outputs") {
    const auto r = map_structure(build_array_multiplier(4), std::vector<double>{0.3, 0.6, 0.2});
    std::vector<std::string> col2;
    for (const auto& s : r.trace.steps) {
        if (s.column == 2) col2.push_back(s.signal);
    }
    // column 2 of the 4-bit array: pp(0,2), pp(1,1), pp(2,0), FA (row 1), HA (row 2)
    REQUIRE(col2.size() == 7);
    CHECK(col2[0].rfind("pp_c2_", 0) == 0);
    CHECK(col2[1].rfind("pp_c2_", 0) == 0);
    CHECK(col2[2].rfind("pp_c2_", 0) == 0);
    CHECK(col2[3].rfind("s_c2_", 0) == 0);
    CHECK(col2[4].rfind("co_c3_", 0) == 0);
    CHECK(col2[5].rfind("s_c2_", 0) == 0);
    CHECK(col2[6].rfind("co_c3_", 0) == 0);
    CHECK(r.trace.order_policy == "pp-first");

    MappingConfig cfg;
    cfg.order = OrderPolicy::kCompressorsFirst;
    const auto r2 = map_structure(build_array_multiplier(4), std::vector<double>{0.3, 0.6, 0.2}, cfg);
    std::vector<std::string> col2b;
    for (const auto& s : r2.trace.steps) {
        if (s.column == 2) col2b.push_back(s.signal);
    }
    REQUIRE(col2b.size() == 7);
    CHECK(col2b[0].rfind("s_c2_", 0) == 0);
    CHECK(col2b[6].rfind("pp_c2_", 0) == 0);
}

TEST_CASE("compressor-only candidates") {
    MappingConfig cfg;
    cfg.candidates = CandidateSet::parse("sum,carry");
    const auto r = map_structure(build_array_multiplier(5), std::vector<double>{1, 1, 0.7, 0.2}, cfg);
    for (const auto& s : r.trace.steps) CHECK(s.signal.rfind("pp_", 0) != 0);
    for (const auto& g : r.netlist.gates()) CHECK_FALSE(r.netlist.is_forced(g.out));
    check_trace_invariants(r.trace);
}

TEST_CASE("mapping is deterministic") {
    const std::vector<double> theta{0.9, 0.4, 0.7, 0.1, 0.5, 0.3};
    const auto a = map_structure(build_array_multiplier(6), theta);
    const auto b = map_structure(build_array_multiplier(6), theta);
    CHECK(a.netlist == b.netlist);
    CHECK(to_json(a.trace) == to_json(b.trace));
}

TEST_CASE("empirical weighting changes what the mapper sees") {
    // all mass on odd x: column 0 errors are always possible
    std::vector<double> wh(16, 1.0), xh(16, 0.0);
    for (int x = 1; x < 16; x += 2) xh[x] = 1.0;
    MappingConfig cfg;
    cfg.distribution = InputDistribution::factored(4, wh, xh);
    const std::vector<double> theta{0.5};
    const auto r = map_structure(build_array_multiplier(4), theta, cfg);
    // S_0 = w0 when x is odd: initial MSE = 0.25 * P(w0 = 1) = 0.125
    CHECK(r.trace.initial_mse == doctest::Approx(0.125));
    check_trace_invariants(r.trace);
}

TEST_CASE("mapping preconditions") {
    auto net = build_array_multiplier(4);
    net.force_zero(net.gates()[0].out);
    CHECK_THROWS_AS(map_structure(net, std::vector<double>{0.5}), ValidationError);
    CHECK_THROWS_AS(map_structure(build_array_multiplier(9), std::vector<double>{0.5}), ConfigError);
    MappingConfig none;
    none.candidates = {false, false, false};
    CHECK_THROWS_AS(map_structure(build_array_multiplier(4), std::vector<double>{0.5}, none), ValidationError);
}

TEST_CASE("candidate set parsing") {
    const auto all = CandidateSet::parse("pp,sum,carry");
    CHECK(all.partial_products);
    CHECK(all.sums);
    CHECK(all.carries);
    CHECK(all.to_string() == "pp,sum,carry");
    CHECK(CandidateSet::parse("carry").to_string() == "carry");
    CHECK_THROWS_AS(CandidateSet::parse("pp,xor"), ValidationError);
    CHECK_THROWS_AS(CandidateSet::parse(""), ValidationError);
}

TEST_CASE("finalize: identity without overrides") {
    const auto net = build_array_multiplier(6);
    CHECK(finalize(net) == net);
}

TEST_CASE("finalize preserves function on mapped netlists") {
    std::mt19937_64 rng(40);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        const int bits = 3 + trial % 4;
        std::vector<double> theta(std::min(8, 2 * bits));
        for (auto& t : theta) t = u(rng);
        const auto mapped = map_structure(build_array_multiplier(bits), theta).netlist;
        const auto fin = finalize(mapped);
        CHECK(fin.forced_count() == 0);
        CHECK(simulate_exhaustive(fin) == simulate_exhaustive(mapped));
        CHECK(census(fin).total().and_gates == census(mapped, CensusMode::kEffective).total().and_gates);
    }
}

TEST_CASE("trace json round trip") {
    const auto r = map_structure(build_array_multiplier(4), std::vector<double>{0.5, 0.2});
    const auto j = to_json(r.trace);
    CHECK(to_json(trace_from_json(j)) == j);
    CHECK_THROWS_AS(trace_from_json(nlohmann::json::parse(R"({"steps": []})")), ValidationError);
}
