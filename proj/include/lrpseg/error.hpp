#pragma once

#include <stdexcept>
#include <string>

namespace lrpseg {

// Base of every domain error raised by the engine. The CLI maps these to
// exit status 1; anything else is a bug.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor or map dimensions that do not fit the operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed weight container, manifest, image or dump file.
class FormatError : public Error {
public:
    using Error::Error;
};

// Invalid configuration: rule assignments, training settings, bounds.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Data cannot support the requested fit (too few pixels, degenerate EM).
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace lrpseg
