// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "axm/axsim.hpp"
#include "axm/emitter.hpp"
#include "axm/mapper.hpp"
#include "axm/metrics.hpp"
#include "axm/pipeline.hpp"
#include "axm/power.hpp"
#include "axm/trainer.hpp"

using namespace axm;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr double kExactnessSeconds = 5.0;       // 1
constexpr double kColumnPowerAnchor = 8.0;      // 2
constexpr int kEquivalenceMaxBits = 6;          // 4
constexpr double kPowerGradTol = 1e-8;          // 5
constexpr double kObjectiveGradTol = 1e-4;      // 5
constexpr int kMonotonicityTrials = 50;         // 6
constexpr double kMappingAnchor = 0.0625;       // 7
constexpr double kAnchorTol = 1e-15;            // 7
constexpr int kFinalizeTrials = 20;             // 8
constexpr int kTradeoffSeeds = 3;               // 10
constexpr double kTradeoffHighLambda = 100.0;   // 10
constexpr double kAccuracySlack = 0.02;         // 10
constexpr double kSweepSeconds = 600.0;         // 10

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Outcome c1_exactness() {
    const auto t0 = Clock::now();
    bool ok = true;
    for (int b = 2; b <= 8; ++b) {
        const auto out = simulate_exhaustive(build_array_multiplier(b));
        for (std::uint64_t w = 0; w < (1u << b); ++w) {
            for (std::uint64_t x = 0; x < (1u << b); ++x) ok &= out[(w << b) | x] == w * x;
        }
    }
    const double s = seconds_since(t0);
    return {ok && s < kExactnessSeconds, fmt::format("B=2..8 exhaustive exact={}, {:.3f}s (limit {}s)", ok, s, kExactnessSeconds)};
}

Outcome c2_census() {
    const auto net = build_array_multiplier(4);
    const auto col = census(net).columns.at(2);
    const double p = column_power(net, default_cost_table(), 2);
    const bool ok = col.and_gates == 3 && col.half_adders == 1 && col.full_adders == 1 && p == kColumnPowerAnchor;
    return {ok, fmt::format("column 2: {} AND, {} HA, {} FA, power {}", col.and_gates, col.half_adders, col.full_adders, p)};
}

Outcome c3_table_row() {
    const auto r = evaluate(build_array_multiplier(8), InputDistribution::uniform(8));
    const bool ok = r.er == 0.0 && r.nmed == 0.0 && r.maxed == 0;
    return {ok, fmt::format("ER={} NMED={:.3f} MaxED={}", r.er, r.nmed, r.maxed)};
}

Outcome c4_equivalence() {
    std::size_t cases = 0, mismatches = 0;
    for (int b = 2; b <= kEquivalenceMaxBits; ++b) {
        const auto acc = build_array_multiplier(b);
        for (int p = 1; p <= 2 * b; ++p) {
            for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
                std::vector<double> theta(p);
                auto net = acc;
                for (int c = 0; c < p; ++c) theta[c] = (mask >> c) & 1;
                for (const auto& g : net.gates()) {
                    if (g.i + g.j < p && theta[g.i + g.j] == 1.0) net.force_zero(g.out);
                }
                const auto out = simulate_exhaustive(net);
                for (std::uint32_t w = 0; w < (1u << b); ++w) {
                    for (std::uint32_t x = 0; x < (1u << b); ++x) {
                        mismatches += axm_forward(w, x, theta) != static_cast<double>(out[(w << b) | x]) ? 1 : 0;
                    }
                }
                ++cases;
            }
        }
    }
    return {mismatches == 0, fmt::format("{} binary theta vectors over B=2..{}, {} mismatches", cases, kEquivalenceMaxBits, mismatches)};
}

Outcome c5_gradients() {
    // power term, closed form
    const auto acc = build_array_multiplier(8);
    const PowerModel power(acc, default_cost_table());
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    std::uniform_int_distribution<std::uint64_t> mults(1, 100000);
    double worst_power = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int layers = 1 + trial % 4;
        std::vector<LayerProfile> prof;
        std::vector<std::vector<double>> th(layers, std::vector<double>(8));
        for (int l = 0; l < layers; ++l) {
            prof.push_back({l, mults(rng)});
            for (auto& v : th[l]) v = u(rng);
        }
        const auto g = power.grad_power_loss(prof, th);
        double num = 0, den = 0;
        for (int l = 0; l < layers; ++l) {
            for (int c = 0; c < 8; ++c) {
                const double keep = th[l][c], h = 1e-3;
                th[l][c] = keep + h;
                const double up = power.power_loss(prof, th);
                th[l][c] = keep - h;
                const double down = power.power_loss(prof, th);
                th[l][c] = keep;
                const double fd = (up - down) / (2 * h);
                num += (fd - g[l][c]) * (fd - g[l][c]);
                den += g[l][c] * g[l][c];
            }
        }
        worst_power = std::max(worst_power, std::sqrt(num / den));
    }

    // full objective on a frozen batch, double precision throughout
    const auto data = make_blobs(BlobSpec{}, 11);
    const ColumnSumTable sums(8, 8);
    double worst_obj = 0.0;
    const auto check = [&](TrainState& s, const TrainConfig& cfg, std::size_t slot) {
        std::vector<double> x(data.train.features.begin(), data.train.features.begin() + 64 * 8);
        std::vector<int> y(data.train.labels.begin(), data.train.labels.begin() + 64);
        std::vector<std::vector<double>> g;
        objective(s, x, y, cfg, power, sums, &g);
        double num = 0, den = 0;
        for (std::size_t c = 0; c < s.theta[slot].size(); ++c) {
            const double keep = s.theta[slot][c], h = 1e-6;
            s.theta[slot][c] = keep + h;
            const double up = objective(s, x, y, cfg, power, sums).total;
            s.theta[slot][c] = keep - h;
            const double down = objective(s, x, y, cfg, power, sums).total;
            s.theta[slot][c] = keep;
            const double fd = (up - down) / (2 * h);
            num += (fd - g[slot][c]) * (fd - g[slot][c]);
            den += g[slot][c] * g[slot][c];
        }
        worst_obj = std::max(worst_obj, std::sqrt(num / den));
    };
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        TrainConfig cfg;
        cfg.epochs_pretrain = 5;
        cfg.lambda = 0.5 * static_cast<double>(seed);
        cfg.seed = seed;
        std::uniform_real_distribution<double> mid(0.1, 0.9);
        // fully instrumented: last-layer theta
        TrainState full = init_state(TinyModel::mlp(8, {16}, 4, 8, seed), cfg);
        pretrain(full, data.train, cfg);
        for (auto& t : full.theta) {
            for (auto& v : t) v = mid(rng);
        }
        check(full, cfg, 1);
        // only the first layer instrumented
        TrainState first = full;
        first.model.layers[1].instrumented = false;
        check(first, cfg, 0);
    }
    const bool ok = worst_power < kPowerGradTol && worst_obj < kObjectiveGradTol;
    return {ok, fmt::format("power rel err {:.2e} (< {:.0e}), objective rel err {:.2e} (< {:.0e})", worst_power, kPowerGradTol,
                            worst_obj, kObjectiveGradTol)};
}

Outcome c6_monotonicity() {
    const auto acc = build_array_multiplier(8);
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t violations = 0, steps = 0;
    for (int trial = 0; trial < kMonotonicityTrials; ++trial) {
        std::vector<double> theta(8);
        for (auto& t : theta) t = u(rng);
        const auto r = map_structure(acc, theta);
        double last = r.trace.initial_mse;
        for (const auto& s : r.trace.steps) {
            ++steps;
            if (s.mse_before != last) ++violations;
            if (s.accepted) {
                if (!(s.mse_after < s.mse_before)) ++violations;
                last = s.mse_after;
            }
        }
        if (r.trace.final_mse != last || r.trace.final_mse > r.trace.initial_mse) ++violations;
        if (simulate_exhaustive(r.netlist).size() != (std::size_t{1} << 16)) ++violations;
    }
    const auto zero = map_structure(acc, std::vector<double>(8, 0.0));
    const bool accurate = simulate_exhaustive(zero.netlist) == simulate_exhaustive(acc);
    return {violations == 0 && accurate,
            fmt::format("{} random theta at B=8, {} steps, {} violations; theta=0 accurate={}", kMonotonicityTrials, steps,
                        violations, accurate)};
}

Outcome c7_anchor() {
    // brute-force oracle with its own loops
    double acc = 0;
    for (int w = 0; w < 16; ++w) {
        for (int x = 0; x < 16; ++x) {
            const double err = 0.5 * ((w & 1) & (x & 1));
            acc += err * err;
        }
    }
    const double oracle = acc / 256.0;
    const auto r = map_structure(build_array_multiplier(4), std::vector<double>{0.5, 0, 0});
    const bool ok = oracle == kMappingAnchor && std::abs(r.trace.initial_mse - oracle) <= kAnchorTol &&
                    r.trace.final_mse <= kMappingAnchor;
    return {ok, fmt::format("oracle {}, mapper initial {}, final {}", oracle, r.trace.initial_mse, r.trace.final_mse)};
}

Outcome c8_finalize() {
    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int equal = 0;
    for (int trial = 0; trial < kFinalizeTrials; ++trial) {
        const int b = 3 + trial % 6;
        std::vector<double> theta(std::min(2 * b, 8));
        for (auto& t : theta) t = u(rng);
        const auto mapped = map_structure(build_array_multiplier(b), theta).netlist;
        equal += simulate_exhaustive(finalize(mapped)) == simulate_exhaustive(mapped) ? 1 : 0;
    }
    return {equal == kFinalizeTrials, fmt::format("{}/{} netlists (B=3..8) equal after finalize", equal, kFinalizeTrials)};
}

Outcome c9_verilog() {
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int ok = 0, total = 0;
    for (int b = 2; b <= 8; ++b) {
        std::vector<double> theta(std::min(2 * b, 8));
        for (auto& t : theta) t = u(rng);
        const auto mapped = map_structure(build_array_multiplier(b), theta).netlist;
        for (const auto& net : {build_array_multiplier(b), mapped, finalize(mapped)}) {
            for (auto style : {VerilogStyle::kAssign, VerilogStyle::kCells}) {
                ++total;
                ok += VerilogEvaluator::parse(emit_verilog(net, "m", style)).evaluate_exhaustive() == simulate_exhaustive(net) ? 1 : 0;
            }
        }
    }
    const auto golden = read_text(fs::path(AXM_TEST_DATA_DIR) / "golden" / "mult2.v");
    const bool golden_ok = emit_verilog(build_array_multiplier(2), "mult2") == golden;
    return {ok == total && golden_ok, fmt::format("{}/{} emitted modules match simulation; B=2 golden stable={}", ok, total, golden_ok)};
}

Outcome c10_tradeoff() {
    const auto t0 = Clock::now();
    const RunSpec spec;
    double pow0 = 0, pow1 = 0, acc0 = 0, acc1 = 0;
    for (std::uint64_t seed = 1; seed <= kTradeoffSeeds; ++seed) {
        const auto low = run_pipeline(spec, 0.0, seed);
        const auto high = run_pipeline(spec, kTradeoffHighLambda, seed);
        pow0 += low.l_power / kTradeoffSeeds;
        pow1 += high.l_power / kTradeoffSeeds;
        acc0 += low.accuracy_final / kTradeoffSeeds;
        acc1 += high.accuracy_final / kTradeoffSeeds;
    }
    const double s = seconds_since(t0);
    const bool ok = pow1 < pow0 && acc0 >= acc1 - kAccuracySlack && s < kSweepSeconds;
    return {ok, fmt::format("mean L_power {:.4f} (lambda=0) vs {:.4f} (lambda={}); mean accuracy {:.4f} vs {:.4f}; {:.1f}s",
                            pow0, pow1, kTradeoffHighLambda, acc0, acc1, s)};
}

Outcome c11_reproducibility() {
    RunSpec spec;
    const auto a = fs::temp_directory_path() / "axm_accept_a";
    const auto b = fs::temp_directory_path() / "axm_accept_b";
    fs::remove_all(a);
    fs::remove_all(b);
    write_pipeline_artifacts(run_pipeline(spec, 25.0, 7), a);
    write_pipeline_artifacts(run_pipeline(spec, 25.0, 7), b);
    int same = 0;
    for (const char* f : {"theta.json", "netlist.json", "trace.json", "axm.v"}) same += read_text(a / f) == read_text(b / f) ? 1 : 0;
    return {same == 4, fmt::format("{}/4 artifacts byte-identical", same)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"AccMul exactness", c1_exactness},
        {"4-bit column-2 census and power", c2_census},
        {"accurate 8-bit error metrics", c3_table_row},
        {"closed form equals zeroed-column circuit", c4_equivalence},
        {"gradient checks", c5_gradients},
        {"mapping monotonicity and feasibility", c6_monotonicity},
        {"mapping MSE anchor", c7_anchor},
        {"finalize preserves function", c8_finalize},
        {"Verilog fidelity", c9_verilog},
        {"lambda trade-off direction", c10_tradeoff},
        {"artifact reproducibility", c11_reproducibility},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        failed += o.pass ? 0 : 1;
        fmt::print("criterion {:2}: {} {}: {}\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail);
        std::fflush(stdout);
    }
    fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
