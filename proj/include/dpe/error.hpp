#pragma once

#include <stdexcept>
#include <string>

namespace dpe {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed objects: length mismatches, grids that violate their invariants.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// A caller-side precondition does not hold (e.g. lambda <= 0, M0 not positive).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A model broke one of the positivity / sign assumptions it promised.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Evaluating U or B failed during a recursion; the message names (n, tau).
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Problem too large for an algorithm with an enforced size cap.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Invalid or unknown configuration entries.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace dpe
