#pragma once

#include <stdexcept>
#include <string>

namespace qmask {

// Base for every library error. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input failed validation (bad labels, bad probabilities, malformed specs).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Requested dimension exceeds the configured cap.
class DimensionLimitError : public Error {
public:
    using Error::Error;
};

// An iterative routine failed to converge or produced an unusable result.
class NumericalError : public Error {
public:
    using Error::Error;
};

class LabelError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ShapeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class SymmetryError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class PositivityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ProbabilityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class CompletenessError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class PurityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConstraintError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EmbeddingError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConditioningError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace qmask
