#pragma once

#include <stdexcept>
#include <string>

namespace zsol {

/// Base for runtime failures raised by the toolkit. Precondition violations
/// on arguments (shape mismatch, bad window size) use std::invalid_argument.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unreadable input data (file headers, manifests, configs).
class DataError : public Error {
public:
    using Error::Error;
};

/// Non-finite values reached an optimizer or loss.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace zsol
