/// @file mapper.cpp

#include "axm/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <fmt/format.h>

#include "axm/error.hpp"

namespace axm {

namespace {

struct Candidate {
    SignalId signal;
    int column;
};

std::vector<Candidate> column_candidates(const MultiplierNetlist& net, int column, const MappingConfig& cfg) {
    std::vector<Candidate> pps;
    std::vector<Candidate> comps;
    if (cfg.candidates.partial_products) {
        std::vector<AndGate> gates;
        for (const auto& g : net.gates()) {
            if (g.i + g.j == column) gates.push_back(g);
        }
        std::stable_sort(gates.begin(), gates.end(), [](const AndGate& a, const AndGate& b) { return a.i < b.i; });
        for (const auto& g : gates) pps.push_back({g.out, column});
    }
    for (const auto& c : net.compressors()) {
        if (c.column != column) continue;
        if (cfg.candidates.sums) comps.push_back({c.sum, column});
        if (cfg.candidates.carries) comps.push_back({c.carry, column});
    }
    auto& first = cfg.order == OrderPolicy::kPartialProductsFirst ? pps : comps;
    auto& second = cfg.order == OrderPolicy::kPartialProductsFirst ? comps : pps;
    first.insert(first.end(), second.begin(), second.end());
    return first;
}

const char* policy_name(OrderPolicy p) {
    return p == OrderPolicy::kPartialProductsFirst ? "pp-first" : "compressors-first";
}

}  // namespace

CandidateSet CandidateSet::parse(std::string_view text) {
    CandidateSet set{false, false, false};
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find(',', start), text.size());
        const auto item = text.substr(start, end - start);
        if (item == "pp") set.partial_products = true;
        else if (item == "sum") set.sums = true;
        else if (item == "carry") set.carries = true;
        else throw ValidationError(fmt::format("unknown candidate class '{}' (expected pp, sum, carry)", item));
        start = end + 1;
    }
    if (!set.any()) throw ValidationError("at least one candidate class is required");
    return set;
}

std::string CandidateSet::to_string() const {
    std::vector<std::string> parts;
    if (partial_products) parts.emplace_back("pp");
    if (sums) parts.emplace_back("sum");
    if (carries) parts.emplace_back("carry");
    return fmt::format("{}", fmt::join(parts, ","));
}

std::vector<double> reference_outputs(int bits, std::span<const double> theta) {
    if (bits < kMinBitwidth || bits > kMaxExhaustiveBitwidth) {
        throw ConfigError(fmt::format("reference table needs 2 <= B <= {}, got {}", kMaxExhaustiveBitwidth, bits));
    }
    if (theta.size() > static_cast<std::size_t>(2 * bits)) {
        throw ValidationError(fmt::format("theta has {} entries; at most {} columns exist", theta.size(), 2 * bits));
    }
    for (std::size_t c = 0; c < theta.size(); ++c) {
        if (!(theta[c] >= 0.0 && theta[c] <= 1.0)) {
            throw ValidationError(fmt::format("theta[{}] = {} outside [0, 1]", c, theta[c]));
        }
    }
    const std::size_t n = std::size_t{1} << bits;
    std::vector<double> ref(n * n);
    for (std::size_t w = 0; w < n; ++w) {
        for (std::size_t x = 0; x < n; ++x) {
            double y = static_cast<double>(w * x);
            for (std::size_t c = 0; c < theta.size(); ++c) {
                y -= std::ldexp(theta[c], static_cast<int>(c)) * column_sum(w, x, static_cast<int>(c));
            }
            ref[(w << bits) | x] = y;
        }
    }
    return ref;
}

MappingResult map_structure(const MultiplierNetlist& accurate, std::span<const double> theta,
                            const MappingConfig& cfg) {
    if (accurate.forced_count() != 0) throw ValidationError("mapping must start from a netlist without overrides");
    if (!cfg.candidates.any()) throw ValidationError("at least one candidate class is required");
    const int bits = accurate.bitwidth();
    const auto ref = reference_outputs(bits, theta);
    const InputDistribution dist = cfg.distribution ? *cfg.distribution : InputDistribution::uniform(bits);
    if (dist.bitwidth() != bits) throw ValidationError("mapping distribution bitwidth differs from the netlist");

    MappingResult result{accurate, {}};
    auto& net = result.netlist;
    auto& trace = result.trace;
    trace.order_policy = policy_name(cfg.order);
    trace.candidates = cfg.candidates.to_string();

    ExhaustiveSimulator sim(net);
    std::vector<std::uint64_t> outputs;
    sim.run(net, outputs);
    double current = weighted_mse(outputs, ref, dist);
    trace.initial_mse = current;

    for (int column = 0; column < static_cast<int>(theta.size()); ++column) {
        for (const auto& cand : column_candidates(net, column, cfg)) {
            net.force_zero(cand.signal);
            sim.run(net, outputs);
            const double trial = weighted_mse(outputs, ref, dist);
            MappingStep step{net.signal_name(cand.signal), cand.column, current, trial, trial < current};
            if (step.accepted) {
                current = trial;
            } else {
                net.release(cand.signal);
            }
            trace.steps.push_back(std::move(step));
        }
    }
    trace.final_mse = current;
    return result;
}

MultiplierNetlist finalize(const MultiplierNetlist& mapped) {
    MultiplierNetlist out = simplify(mapped);
    if (mapped.bitwidth() <= kMaxExhaustiveBitwidth) {
        if (simulate_exhaustive(out) != simulate_exhaustive(mapped)) {
            throw InternalError("finalize changed the multiplier function");
        }
    } else {
        std::mt19937_64 rng(0x5eed);
        std::uniform_int_distribution<std::uint64_t> d(0, (1ULL << mapped.bitwidth()) - 1);
        std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs(1 << 14);
        for (auto& p : pairs) p = {d(rng), d(rng)};
        if (simulate_batch(out, pairs) != simulate_batch(mapped, pairs)) {
            throw InternalError("finalize changed the multiplier function");
        }
    }
    return out;
}

nlohmann::json to_json(const MappingTrace& trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : trace.steps) {
        steps.push_back({{"signal", s.signal},
                         {"column", s.column},
                         {"mse_before", s.mse_before},
                         {"mse_after", s.mse_after},
                         {"accepted", s.accepted}});
    }
    return {{"order_policy", trace.order_policy},
            {"candidates", trace.candidates},
            {"initial_mse", trace.initial_mse},
            {"final_mse", trace.final_mse},
            {"steps", std::move(steps)}};
}

MappingTrace trace_from_json(const nlohmann::json& doc) {
    MappingTrace t;
    try {
        t.order_policy = doc.at("order_policy").get<std::string>();
        t.candidates = doc.at("candidates").get<std::string>();
        t.initial_mse = doc.at("initial_mse").get<double>();
        t.final_mse = doc.at("final_mse").get<double>();
        for (const auto& s : doc.at("steps")) {
            t.steps.push_back({s.at("signal").get<std::string>(), s.at("column").get<int>(),
                               s.at("mse_before").get<double>(), s.at("mse_after").get<double>(),
                               s.at("accepted").get<bool>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("bad mapping trace: {}", e.what()));
    }
    return t;
}

}  // namespace axm
