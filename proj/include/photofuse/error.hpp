#pragma once

#include <stdexcept>
#include <string>

namespace photofuse {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or unreadable input: malformed files, invalid arguments, degenerate geometry
/// supplied by the caller. The CLI maps these to exit code 1.
class InputError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to produce a finite answer. The CLI maps these to
/// exit code 2.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Parse failure with the offending line (or row) number, 1-based.
class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t line)
        : InputError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace photofuse
