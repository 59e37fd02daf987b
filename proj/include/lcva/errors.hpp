#pragma once

#include <stdexcept>
#include <string>

namespace lcva {

// Error taxonomy shared by the library and the CLI exit-code mapping.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Array/layer dimensions do not line up.
struct ShapeError : Error {
    using Error::Error;
};

// Input outside the mathematical domain of an operation (e.g. sigma <= 0).
struct DomainError : Error {
    using Error::Error;
};

// A computation produced or received a non-finite value.
struct NumericError : Error {
    using Error::Error;
};

// The caller violated a usage contract (empty input, bad configuration).
struct UsageError : Error {
    using Error::Error;
};

// Malformed file content; message carries path and line where possible.
struct ParseError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// A trained model is unusable (non-finite parameters, wrong checkpoint kind).
struct ModelError : Error {
    using Error::Error;
};

}  // namespace lcva
