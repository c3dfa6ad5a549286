#ifndef QLINK_ERRORS_HPP
#define QLINK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qlink {

/// Base class for all qlink errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad inputs: precondition violations, malformed configs, dimension mismatches.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// State support exceeds the Fock truncation it is being squeezed into.
class TruncationError : public ValidationError {
public:
    explicit TruncationError(const std::string& msg) : ValidationError(msg) {}
};

/// The requested pulse cannot be realized within the calibrated pump range.
class InfeasiblePulseError : public Error {
public:
    explicit InfeasiblePulseError(const std::string& msg) : Error(msg) {}
};

/// Numerical failure: non-convergence, unstable integration, rank deficiency.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

} // namespace qlink

#endif
