#pragma once

#include <stdexcept>
#include <string>

namespace mtlprune {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes or dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A configuration, schema or usage problem (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A structural operation on the model was rejected (unknown filter, floor breach, ...).
class PruneError : public Error {
public:
    using Error::Error;
};

/// Reading or writing an on-disk artifact failed.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace mtlprune
