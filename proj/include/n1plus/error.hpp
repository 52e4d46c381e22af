#pragma once

#include <stdexcept>
#include <string>

namespace n1plus {

/// Malformed input document (syntax or schema).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a model invariant or precondition.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not deliver a result within its accuracy contract.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Too many near-equal eigenvalue gaps for a first-order spectral update.
class DegeneracyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Cross-entropy iteration found no sample at or above the current level.
class EmptyEliteError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace n1plus
