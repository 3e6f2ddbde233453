#pragma once

#include <stdexcept>
#include <string>

namespace rmplate {

/// Precondition violated by a caller-supplied argument.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Request is well-formed but outside what the toolkit discretizes (e.g. d != 1 thin meshes).
class UnsupportedConfiguration : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Boundary-condition family whose thin-thickness limit is not a standard biharmonic problem.
class UnsupportedLimit : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AssemblyError : public std::runtime_error {
public:
    AssemblyError(const std::string& what, long element)
        : std::runtime_error(what + " (element " + std::to_string(element) + ")"), element_(element) {}
    long element() const noexcept { return element_; }

private:
    long element_;
};

/// Factorization of a system or shifted pencil failed.
class SingularSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rmplate
