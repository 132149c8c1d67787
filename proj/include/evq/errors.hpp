#pragma once

#include <stdexcept>
#include <string>

namespace evq {

// Invalid argument to a model operation (negative SOC, zero turbine count, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (CSV rows, arrival logs, snapshots).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (non-canonical state, infeasible action).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace evq
