#pragma once

#include <stdexcept>
#include <string>

namespace eovseg {

// Base class for every failure raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape, label, or extent contract violated by a caller.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed or unreadable file (tensor, manifest, config, vocabulary).
class FormatError : public Error {
public:
    using Error::Error;
};

// Invalid configuration value or parameter bound.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A pipeline stage failed; the message is prefixed with the stage name.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace eovseg
