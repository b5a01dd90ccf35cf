#ifndef LC3NET_ERROR_HPP
#define LC3NET_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lc3 {

// Base class for all lc3net failures so callers can catch one type at the CLI
// boundary while tests can still distinguish categories.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid layer/model/loss configuration (bad kernel size, channel mismatch, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Violated structural contract (missing pyramid level, shape mismatch, ...).
struct StructureError : Error {
    using Error::Error;
};

// Dataset / image file problems.
struct DataError : Error {
    using Error::Error;
};

// Checkpoint format or name/shape mismatch problems.
struct CheckpointError : Error {
    using Error::Error;
};

// Runtime training failures (non-finite loss, ...).
struct TrainingError : Error {
    using Error::Error;
};

}  // namespace lc3

#endif  // LC3NET_ERROR_HPP
