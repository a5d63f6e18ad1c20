// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace exvis {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid dimensions, counts or ranges handed to an operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class TaskMismatchError : public Error {
public:
    using Error::Error;
};

class UnknownColorError : public Error {
public:
    using Error::Error;
};

class UnknownCategoryError : public Error {
public:
    using Error::Error;
};

class UnknownIdError : public Error {
public:
    using Error::Error;
};

class OversizeError : public Error {
public:
    using Error::Error;
};

class ChainMismatchError : public Error {
public:
    using Error::Error;
};

class NoOutputTokenError : public Error {
public:
    using Error::Error;
};

class NonFiniteError : public Error {
public:
    using Error::Error;
};

class EmptyDatasetError : public Error {
public:
    using Error::Error;
};

/// Checkpoint or serialized-sequence corruption (bad magic, truncation, bad header).
class CorruptionError : public Error {
public:
    using Error::Error;
};

/// Configuration that fails validation. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Missing or unreadable input data. The CLI maps this to exit code 3.
class DataError : public Error {
public:
    using Error::Error;
};

/// Token sequence that does not follow the layout grammar.
class MalformedSequenceError : public Error {
public:
    MalformedSequenceError(std::size_t position, const std::string& what)
        : Error("malformed sequence at position " + std::to_string(position) + ": " + what),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

}  // namespace exvis
