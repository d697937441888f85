#pragma once

#include <stdexcept>
#include <string>

namespace autofeedback {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Documentation file violates the documentation schema. `path()` is a
/// JSON-pointer-like location of the offending element.
class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& message)
        : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class EmptyDocument : public Error {
public:
    EmptyDocument() : Error("API documentation contains no APIs") {}
};

class UnknownTruthApi : public Error {
public:
    explicit UnknownTruthApi(const std::string& name)
        : Error("ground-truth API '" + name + "' is not in the documentation") {}
};

class NoError : public Error {
public:
    NoError() : Error("cannot render feedback for a finding without an error") {}
};

/// Network failure that persisted through all retry attempts.
class TransportError : public Error {
public:
    using Error::Error;
};

/// Peer answered, but with a body we cannot interpret.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    explicit EmptyInput(const std::string& what) : Error(what + ": input is empty") {}
};

class ZeroAccuracy : public Error {
public:
    ZeroAccuracy() : Error("overhead is undefined when accuracy is zero") {}
};

class LengthMismatch : public Error {
public:
    LengthMismatch() : Error("input sequences differ in length") {}
};

class TooShort : public Error {
public:
    TooShort() : Error("rank correlation needs at least two observations") {}
};

class MissingGroundTruth : public Error {
public:
    explicit MissingGroundTruth(const std::string& task_id)
        : Error("task '" + task_id + "' has no ground-truth request sequence") {}
};

class EmptyDataset : public Error {
public:
    EmptyDataset() : Error("dataset contains no tasks") {}
};

class DatasetError : public Error {
public:
    DatasetError(std::size_t line, const std::string& message)
        : Error("dataset line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace autofeedback
