#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dncnn {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A size is out of range (overflowing allocation, image smaller than a patch, ...).
class SizeError : public Error {
public:
    using Error::Error;
};

/// A scalar argument is outside its domain.
class RangeError : public Error {
public:
    using Error::Error;
};

/// An object was used outside its contract (stale tape, infer-mode cache, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

/// An invalid network description.
class SpecError : public Error {
public:
    using Error::Error;
};

/// Train-mode batch normalization over a single value per channel.
class DegenerateBatchError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents. Carries the byte offset where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

/// Invalid run configuration. Line 0 means the problem is not tied to a line.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Training produced a non-finite loss.
class DivergedError : public Error {
public:
    DivergedError(const std::string& what, std::uint64_t step) : Error(what), step_(step) {}

    std::uint64_t step() const noexcept { return step_; }

private:
    std::uint64_t step_;
};

}  // namespace dncnn
