/// @file metrics.cpp

#include "axm/metrics.hpp"

#include <cmath>
#include <fstream>
#include <fmt/format.h>

#include "axm/error.hpp"

namespace axm {

namespace {

void check_bitwidth(int bitwidth) {
    if (bitwidth < kMinBitwidth || bitwidth > kMaxExhaustiveBitwidth) {
        throw ConfigError(fmt::format("unsupported bitwidth {} for exhaustive metrics (need {}..{})", bitwidth,
                                      kMinBitwidth, kMaxExhaustiveBitwidth));
    }
}

void check_weight(double p) {
    if (!std::isfinite(p) || p < 0.0) throw ValidationError(fmt::format("invalid probability {}", p));
}

std::vector<double> parse_histogram(const nlohmann::json& node, int bitwidth, const char* field) {
    if (!node.is_object()) throw ValidationError(fmt::format("'{}' must be an object of value -> weight", field));
    const std::size_t n = std::size_t{1} << bitwidth;
    std::vector<double> hist(n, 0.0);
    for (const auto& [key, value] : node.items()) {
        std::size_t pos = 0;
        long long v = -1;
        try {
            v = std::stoll(key, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != key.size() || v < 0 || static_cast<std::size_t>(v) >= n) {
            throw ValidationError(fmt::format("'{}': operand value '{}' outside [0, {}]", field, key, n - 1));
        }
        if (!value.is_number()) throw ValidationError(fmt::format("'{}[{}]' must be a number", field, key));
        const double p = value.get<double>();
        check_weight(p);
        hist[static_cast<std::size_t>(v)] += p;
    }
    return hist;
}

}  // namespace

InputDistribution InputDistribution::uniform(int bitwidth) {
    check_bitwidth(bitwidth);
    InputDistribution d;
    d.bitwidth_ = bitwidth;
    d.kind_ = DistributionKind::kUniform;
    const std::size_t n = std::size_t{1} << (2 * bitwidth);
    d.probs_.assign(n, 1.0 / static_cast<double>(n));
    return d;
}

InputDistribution InputDistribution::factored(int bitwidth, std::span<const double> w_hist,
                                              std::span<const double> x_hist) {
    check_bitwidth(bitwidth);
    const std::size_t n = std::size_t{1} << bitwidth;
    if (w_hist.size() != n || x_hist.size() != n) {
        throw ValidationError(fmt::format("per-operand histograms need {} entries", n));
    }
    double w_mass = 0.0;
    double x_mass = 0.0;
    for (double p : w_hist) check_weight(p), w_mass += p;
    for (double p : x_hist) check_weight(p), x_mass += p;
    if (w_mass <= 0.0 || x_mass <= 0.0) throw ValidationError("histogram has zero total mass");
    InputDistribution d;
    d.bitwidth_ = bitwidth;
    d.kind_ = DistributionKind::kEmpirical;
    d.probs_.resize(n * n);
    for (std::size_t w = 0; w < n; ++w) {
        for (std::size_t x = 0; x < n; ++x) d.probs_[(w << bitwidth) | x] = (w_hist[w] / w_mass) * (x_hist[x] / x_mass);
    }
    d.normalize();
    // per-operand rescaling is the meaningful event for the caller
    d.raw_mass_ = w_mass * x_mass;
    d.renormalized_ = std::abs(w_mass - 1.0) > 1e-9 || std::abs(x_mass - 1.0) > 1e-9;
    return d;
}

InputDistribution InputDistribution::joint(int bitwidth, std::vector<double> weights) {
    check_bitwidth(bitwidth);
    if (weights.size() != std::size_t{1} << (2 * bitwidth)) {
        throw ValidationError(fmt::format("joint histogram needs {} entries", std::size_t{1} << (2 * bitwidth)));
    }
    for (double p : weights) check_weight(p);
    InputDistribution d;
    d.bitwidth_ = bitwidth;
    d.kind_ = DistributionKind::kEmpirical;
    d.probs_ = std::move(weights);
    d.normalize();
    return d;
}

void InputDistribution::normalize() {
    long double mass = 0.0L;
    for (double p : probs_) mass += p;
    if (!(mass > 0.0L)) throw ValidationError("distribution has zero total mass");
    raw_mass_ = static_cast<double>(mass);
    renormalized_ = std::abs(static_cast<double>(mass) - 1.0) > 1e-9;
    for (double& p : probs_) p = static_cast<double>(p / mass);
}

ErrorReport evaluate_outputs(std::span<const std::uint64_t> outputs, const InputDistribution& dist,
                             MaxEdScope scope) {
    const int b = dist.bitwidth();
    const std::size_t n = std::size_t{1} << (2 * b);
    if (outputs.size() != n) throw ValidationError("output table size does not match the distribution");
    long double er = 0.0L;
    long double med = 0.0L;
    long double mse = 0.0L;
    std::uint64_t maxed = 0;
    for (std::size_t idx = 0; idx < n; ++idx) {
        const std::uint64_t exact = (idx >> b) * (idx & ((std::size_t{1} << b) - 1));
        const std::uint64_t y = outputs[idx];
        const std::uint64_t ed = y > exact ? y - exact : exact - y;
        const double p = dist.probability(idx);
        if (ed != 0 && (p > 0.0 || scope == MaxEdScope::kFullRange)) maxed = std::max(maxed, ed);
        if (ed == 0 || p == 0.0) continue;
        er += p;
        med += static_cast<long double>(ed) * p;
        mse += static_cast<long double>(ed) * static_cast<long double>(ed) * p;
    }
    ErrorReport r;
    r.er = static_cast<double>(er);
    r.nmed = static_cast<double>(med / static_cast<long double>(n - 1));
    r.maxed = maxed;
    r.mse = static_cast<double>(mse);
    return r;
}

ErrorReport evaluate(const MultiplierNetlist& net, const InputDistribution& dist, MaxEdScope scope) {
    check_bitwidth(net.bitwidth());
    if (net.bitwidth() != dist.bitwidth()) {
        throw ValidationError(fmt::format("distribution is for B = {} but netlist has B = {}", dist.bitwidth(),
                                          net.bitwidth()));
    }
    return evaluate_outputs(simulate_exhaustive(net), dist, scope);
}

double weighted_mse(std::span<const std::uint64_t> outputs, std::span<const double> reference,
                    const InputDistribution& dist) {
    if (outputs.size() != reference.size() || outputs.size() != dist.probabilities().size()) {
        throw ValidationError("weighted_mse: table sizes differ");
    }
    long double acc = 0.0L;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        const long double d = static_cast<long double>(outputs[i]) - reference[i];
        acc += d * d * dist.probability(i);
    }
    return static_cast<double>(acc);
}

InputDistribution parse_distribution(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ValidationError("distribution file must hold a JSON object");
    for (const auto& [key, _] : doc.items()) {
        if (key != "bitwidth" && key != "kind" && key != "w_hist" && key != "x_hist" && key != "joint") {
            throw ValidationError(fmt::format("distribution: unknown field '{}'", key));
        }
    }
    if (!doc.contains("bitwidth") || !doc["bitwidth"].is_number_integer()) {
        throw ValidationError("distribution: missing integer field 'bitwidth'");
    }
    const int b = doc["bitwidth"].get<int>();
    check_bitwidth(b);
    const std::string kind = doc.value("kind", std::string("uniform"));
    InputDistribution dist = InputDistribution::uniform(b);
    if (kind == "uniform") {
        return dist;
    } else if (kind != "empirical") {
        throw ValidationError(fmt::format("distribution: unknown kind '{}'", kind));
    }

    if (doc.contains("joint")) {
        const auto& joint = doc["joint"];
        if (!joint.is_array()) throw ValidationError("distribution: 'joint' must be a list of [w, x, p]");
        const std::size_t n = std::size_t{1} << b;
        std::vector<double> weights(n * n, 0.0);
        for (const auto& entry : joint) {
            if (!entry.is_array() || entry.size() != 3 || !entry[0].is_number_integer() ||
                !entry[1].is_number_integer() || !entry[2].is_number()) {
                throw ValidationError("distribution: 'joint' entries must be [w, x, p]");
            }
            const auto w = entry[0].get<long long>();
            const auto x = entry[1].get<long long>();
            if (w < 0 || x < 0 || static_cast<std::size_t>(w) >= n || static_cast<std::size_t>(x) >= n) {
                throw ValidationError(fmt::format("distribution: joint entry ({}, {}) outside operand range", w, x));
            }
            const double p = entry[2].get<double>();
            check_weight(p);
            weights[(static_cast<std::size_t>(w) << b) | static_cast<std::size_t>(x)] += p;
        }
        dist = InputDistribution::joint(b, std::move(weights));
    } else {
        const std::size_t n = std::size_t{1} << b;
        const std::vector<double> flat(n, 1.0 / static_cast<double>(n));
        const auto w_hist = doc.contains("w_hist") ? parse_histogram(doc["w_hist"], b, "w_hist") : flat;
        const auto x_hist = doc.contains("x_hist") ? parse_histogram(doc["x_hist"], b, "x_hist") : flat;
        dist = InputDistribution::factored(b, w_hist, x_hist);
    }
    if (dist.renormalized()) {
        fmt::print(stderr, "warning: distribution mass {} renormalized to 1\n", dist.raw_mass());
    }
    return dist;
}

InputDistribution load_distribution(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open distribution file '{}'", path.string()));
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return parse_distribution(doc);
}

nlohmann::json to_json(const ErrorReport& report) {
    return {{"er", report.er}, {"nmed", report.nmed}, {"maxed", report.maxed}, {"mse", report.mse}};
}

std::string csv_header() { return "er,nmed,maxed,mse"; }

std::string to_csv_row(const ErrorReport& report) {
    return fmt::format("{},{},{},{}", report.er, report.nmed, report.maxed, report.mse);
}

}  // namespace axm
