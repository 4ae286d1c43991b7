#pragma once

#include <stdexcept>
#include <string>

namespace natadv {

// Bad user-supplied configuration (CLI maps this to exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller violated a function precondition (dimension mismatch, empty input, ...).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NotFoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CorruptionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training diverged or produced non-finite numbers; the run is aborted.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace natadv
