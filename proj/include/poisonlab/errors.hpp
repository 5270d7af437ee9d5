#pragma once

#include <stdexcept>

namespace poisonlab {

// Invalid inputs: bad specs, mismatched datasets, malformed configs.
struct validation_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Training diverged or produced non-finite values.
struct training_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operation not defined for this model family or dimensionality.
struct unsupported_error : std::logic_error {
    using std::logic_error::logic_error;
};

// File not found, parse failure, write failure.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace poisonlab
