#pragma once

#include <stdexcept>
#include <string>

namespace confound {

// Error taxonomy mirrored by the CLI exit codes (see README):
//   SchemaError     -> exit 2   malformed input, bad column roles, contract violations
//   NumericError    -> exit 3   degenerate computations (singular fits, zero-spread nulls)
//   InfeasibleError -> exit 4   requests the data cannot satisfy (splits, subsamples)

class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace confound
