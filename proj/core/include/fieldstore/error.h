#pragma once

#include <stdexcept>
#include <string>

namespace fieldstore {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller passed something that violates an operation's precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    SchemaError(const std::string& what, int line = 0)
        : Error(line > 0 ? "schema line " + std::to_string(line) + ": " + what : what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

/// A system call failed. Carries errno.
class IoError : public Error {
public:
    IoError(const std::string& what, int err);

    int code() const noexcept { return code_; }

private:
    int code_;
};

/// On-disk catalogue structures failed to parse or checksum.
class CorruptCatalogue : public Error {
public:
    using Error::Error;
};

class EngineError : public Error {
public:
    using Error::Error;
};

/// Raised by the engine fault-injection hooks in place of the operation.
class InjectedFault : public EngineError {
public:
    using EngineError::EngineError;
};

}  // namespace fieldstore
