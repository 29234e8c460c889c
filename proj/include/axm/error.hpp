/// @file error.hpp
/// @brief Exception types shared by all axmsynth modules.
#pragma once

#include <stdexcept>
#include <string>

namespace axm {

/// Bad user input: out-of-range parameters, malformed files, schema violations.
/// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A configuration value outside the supported range (e.g. bitwidth).
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Broken internal invariant. The CLI maps this to exit code 1.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace axm
