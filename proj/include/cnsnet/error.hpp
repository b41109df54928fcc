#pragma once

#include <stdexcept>
#include <string>

namespace cnsnet {

// Error taxonomy. The CLI maps these onto exit codes:
// config/usage -> 1, data -> 2, broken internal invariant -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A caller handed an operation a value that violates its precondition.
struct InvalidInput : Error {
    using Error::Error;
};

// A configuration object cannot be realized (bad dimensions, bad flags).
struct InvalidConfig : Error {
    using Error::Error;
};

// An internal invariant failed; indicates a bug, not bad user input.
struct ContractViolation : Error {
    using Error::Error;
};

// Structured text input did not parse.
struct ParseError : Error {
    using Error::Error;
};

// Binary input carried a wrong magic/version/layout.
struct FormatError : Error {
    using Error::Error;
};

// A metric was requested over an empty population.
struct UndefinedMetric : Error {
    using Error::Error;
};

// A dataset cannot be partitioned as requested.
struct SplitError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace cnsnet
