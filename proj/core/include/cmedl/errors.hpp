#pragma once

#include <stdexcept>
#include <string>

namespace cmedl {

// Every failure raised by the library derives from Error so callers can
// catch one type; the subclasses carry the category the CLI maps to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& what)
        : Error(what + ": " + path), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

class NonFiniteLossError : public Error {
public:
    explicit NonFiniteLossError(const std::string& term)
        : Error("non-finite loss term: " + term), term_(term) {}
    const std::string& term() const noexcept { return term_; }

private:
    std::string term_;
};

}  // namespace cmedl
