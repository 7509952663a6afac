#pragma once

#include <stdexcept>
#include <string>

namespace cfn {

// Base of every error the library raises. The CLI maps `is_input_error()`
// to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual bool is_input_error() const { return false; }
};

class InputError : public Error {
public:
    using Error::Error;
    bool is_input_error() const override { return true; }
};

class ParameterError : public InputError {
public:
    using InputError::InputError;
};

class SchemaError : public InputError {
public:
    using InputError::InputError;
};

class ParseError : public InputError {
public:
    using InputError::InputError;
};

class ValidationError : public InputError {
public:
    using InputError::InputError;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// Raised when a metric is mathematically undefined for the given input
// (e.g. AP with no positive labels).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

}  // namespace cfn
