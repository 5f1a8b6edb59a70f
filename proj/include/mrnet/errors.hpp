#pragma once

#include <stdexcept>
#include <string>

namespace mrnet {

/// Argument outside the domain of an operation (z outside [0,1], x below the mean, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Rate allocation with zero total rate.
class DegenerateAllocationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Offered load at or above service capacity (theta * E[X] >= 1).
class UnstableQueueError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iteration failed to converge.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Truncation lost more probability mass than the caller tolerates.
class PrecisionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration document or distribution specification.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Output file could not be written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mrnet
