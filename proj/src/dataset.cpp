/// @file dataset.cpp

#include "axm/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <fmt/format.h>

#include "axm/error.hpp"

namespace axm {

namespace {

Dataset draw_blobs(const BlobSpec& spec, const std::vector<double>& centers, std::size_t n, std::mt19937_64& rng) {
    Dataset d;
    d.dim = spec.dim;
    d.classes = spec.classes;
    d.features.resize(n * spec.dim);
    d.labels.resize(n);
    std::normal_distribution<double> noise(0.0, spec.noise);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % spec.classes);
        d.labels[i] = label;
        for (std::size_t k = 0; k < spec.dim; ++k) {
            d.features[i * spec.dim + k] = centers[label * spec.dim + k] + noise(rng);
        }
    }
    return d;
}

bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
    Dataset d;
    d.dim = data.dim;
    d.classes = data.classes;
    for (std::size_t k = begin; k < end; ++k) {
        const double* r = data.row(idx[k]);
        d.features.insert(d.features.end(), r, r + data.dim);
        d.labels.push_back(data.labels[idx[k]]);
    }
    return d;
}

}  // namespace

DatasetSplit make_blobs(const BlobSpec& spec, std::uint64_t seed) {
    if (spec.dim == 0 || spec.classes < 2 || spec.n_train == 0 || spec.n_test == 0) {
        throw ValidationError("blob dataset needs dim >= 1, classes >= 2 and nonempty splits");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> center(0.0, spec.center_spread);
    std::vector<double> centers(spec.classes * spec.dim);
    for (auto& c : centers) c = center(rng);
    DatasetSplit s;
    s.train = draw_blobs(spec, centers, spec.n_train, rng);
    s.test = draw_blobs(spec, centers, spec.n_test, rng);
    return s;
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open dataset '{}'", path.string()));
    Dataset d;
    std::string line;
    std::size_t line_no = 0;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        double first = 0;
        if (d.labels.empty() && d.dim == 0 && !parse_double(fields[0], first)) continue;  // header
        if (fields.size() < 2) throw ValidationError(fmt::format("{}:{}: need at least one feature and a label", path.string(), line_no));
        const std::size_t dim = fields.size() - 1;
        if (d.dim == 0) d.dim = dim;
        if (dim != d.dim) {
            throw ValidationError(fmt::format("{}:{}: expected {} features, got {}", path.string(), line_no, d.dim, dim));
        }
        for (std::size_t k = 0; k < dim; ++k) {
            double v = 0;
            if (!parse_double(fields[k], v)) {
                throw ValidationError(fmt::format("{}:{}: field {} is not a finite number", path.string(), line_no, k + 1));
            }
            d.features.push_back(v);
        }
        double label = 0;
        if (!parse_double(fields.back(), label) || label < 0 || label != std::floor(label)) {
            throw ValidationError(fmt::format("{}:{}: label must be a nonnegative integer", path.string(), line_no));
        }
        d.labels.push_back(static_cast<int>(label));
        max_label = std::max(max_label, static_cast<int>(label));
    }
    if (d.labels.empty()) throw ValidationError(fmt::format("dataset '{}' is empty", path.string()));
    d.classes = static_cast<std::size_t>(std::max(2, max_label + 1));
    return d;
}

DatasetSplit split(const Dataset& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test fraction must be in (0, 1)");
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(data.size())));
    if (n_test == 0 || n_test >= data.size()) throw ValidationError("dataset too small to split");
    return {subset(data, idx, n_test, idx.size()), subset(data, idx, 0, n_test)};
}

Dataset randomize_labels(const Dataset& data, std::uint64_t seed) {
    Dataset d = data;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(data.classes) - 1);
    for (auto& l : d.labels) l = pick(rng);
    return d;
}

}  // namespace axm
