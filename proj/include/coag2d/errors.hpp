#pragma once

#include <stdexcept>
#include <string>

namespace coag2d {

/// Invalid argument to a model function (non-finite, non-positive, wrong regime).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A particle left the admissible shape region {a >= c0 v^{2/3}} by more than the
/// projection tolerance, or a value left the representable working range.
class RegionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// ODE integration failed (step-size underflow or too many rejected steps).
class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration, series, or file contents.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace coag2d
