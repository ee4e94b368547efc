#pragma once
// Error types shared across the library. Everything throws; nothing returns
// half-built state.

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kglm {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file or payload. Carries a 1-based line number when the
// source is line-oriented (0 when it is not).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Remote endpoint failure: connection, non-2xx status, or malformed body.
class RemoteError : public Error {
public:
    using Error::Error;
};

// Dimension disagreement between tensors or between a label list and its
// position matrix.
class ShapeError : public Error {
public:
    using Error::Error;
};

}  // namespace kglm
