#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpgrpo {

// Base for every error the library raises on purpose. The CLI maps the
// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A record, config or generated artifact violated one of its invariants.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed line in a line-delimited record file.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t step, const std::string& what);
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class GeneratorUnavailable : public Error {
public:
    using Error::Error;
};

}  // namespace dpgrpo
