/// @file dataset.hpp
/// @brief Small classification datasets: a seeded Gaussian-blob generator and
///        a CSV loader (features..., label).
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace axm {

struct Dataset {
    std::size_t dim = 0;
    std::size_t classes = 0;
    std::vector<double> features;  // row-major, size() x dim
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    const double* row(std::size_t i) const { return features.data() + i * dim; }
};

struct DatasetSplit {
    Dataset train;
    Dataset test;
};

struct BlobSpec {
    std::size_t dim = 8;
    std::size_t classes = 4;
    std::size_t n_train = 1024;
    std::size_t n_test = 512;
    double center_spread = 2.0;  // std-dev of the class centers
    double noise = 1.5;          // std-dev around each center
};

/// Same seed, same bytes.
DatasetSplit make_blobs(const BlobSpec& spec, std::uint64_t seed);

/// One sample per line: numeric features then an integer label in [0, classes).
/// A header line is skipped when its first field is not numeric.
/// Throws ValidationError with the offending line number.
Dataset load_csv(const std::filesystem::path& path);

/// Shuffled split; test gets round(n * test_fraction) samples.
DatasetSplit split(const Dataset& data, double test_fraction, std::uint64_t seed);

/// Labels replaced by uniform draws, features untouched.
Dataset randomize_labels(const Dataset& data, std::uint64_t seed);

}  // namespace axm
