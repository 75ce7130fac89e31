#pragma once

#include <stdexcept>
#include <string>

namespace aac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Array dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the mathematical domain of an operation
/// (log of a zero probability, negative epsilon, alpha == 0 where division
/// by alpha is required, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// epsilon beyond 1/alpha without the extrapolation flag.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Singular linear system or a failed internal cross-check.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A caller violated a documented precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration or model file.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A network produced NaN/Inf or an environment misbehaved during training.
class TrainingFault : public Error {
public:
    using Error::Error;
};

}  // namespace aac
