#pragma once

#include <stdexcept>
#include <string>

namespace capmin {

// Input data fails a structural invariant (bad dimensions, rows not
// normalized, negative probabilities, malformed files).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// The sequence space |S|^|B| exceeds the configured memory budget.
class BudgetError : public std::runtime_error {
public:
    explicit BudgetError(const std::string& what) : std::runtime_error(what) {}
};

// An iterative routine failed to reach its tolerance, or a floating-point
// computation overflowed.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// File could not be read or written.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace capmin
