#pragma once

#include <stdexcept>
#include <string>

namespace wsipat {

// Root of every error thrown by the toolkit. Module headers derive the
// specific conditions they document.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / OS level failure (unreadable file, broken pipe, ...).
struct IoError : Error {
    using Error::Error;
};

// Malformed input data: bad CSV row, bad JSON shape, bad config value.
struct FormatError : Error {
    using Error::Error;
};

// Two aligned sequences were expected to have the same length.
struct LengthMismatch : Error {
    using Error::Error;
};

} // namespace wsipat
