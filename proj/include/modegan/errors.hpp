#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace modegan {

// Mismatched shapes passed to a numeric routine.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// API called in the wrong state (missing forward cache, unfrozen encoder, ...).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Invalid configuration or parameters supplied by the user.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite value where a finite one is required.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem or format problem while reading/writing artifacts.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Training diverged; carries the step (or epoch) at which it happened.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, std::size_t at)
        : std::runtime_error(what), at_(at) {}

    std::size_t at() const noexcept { return at_; }

private:
    std::size_t at_;
};

}  // namespace modegan
