#ifndef GLUCOLENS_ERRORS_HPP
#define GLUCOLENS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace glucolens {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition or argument violation.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Design matrix without full column rank.
class SingularMatrixError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Filesystem failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// A file was read but its contents are malformed (bad header, truncation, schema).
class FormatError : public IoError {
public:
    using IoError::IoError;
};

/// NaN or infinity encountered during training.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace glucolens

#endif // GLUCOLENS_ERRORS_HPP
