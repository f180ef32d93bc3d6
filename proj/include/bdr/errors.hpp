#pragma once

#include <stdexcept>
#include <string>

namespace bdr {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model was asked for an operation it does not advertise.
class UnsupportedCapability : public Error {
public:
    using Error::Error;
};

/// An input point lies outside the support of the model's densities.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A matrix expected to be symmetric is not (beyond tolerance).
class NotSymmetricError : public Error {
public:
    using Error::Error;
};

/// A matrix expected to be positive (semi-)definite has negative eigenvalues.
class IndefiniteError : public Error {
public:
    using Error::Error;
};

/// An iterative solver exceeded its iteration cap.
class NoConvergenceError : public Error {
public:
    using Error::Error;
};

/// Shape mismatch or an index/dimension out of its legal range.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Configuration file problems; carries aggregated, line-numbered messages.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A chain is too short for the requested diagnostic.
class ChainError : public Error {
public:
    using Error::Error;
};

}  // namespace bdr
