#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace feddtg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or parameter shapes that do not line up.
class DimensionError : public Error {
public:
    DimensionError(const std::string& what, std::size_t expected, std::size_t found)
        : Error(what + ": expected " + std::to_string(expected) + ", found " + std::to_string(found)),
          expected_(expected), found_(found) {}

    std::size_t expected() const noexcept { return expected_; }
    std::size_t found() const noexcept { return found_; }

private:
    std::size_t expected_;
    std::size_t found_;
};

/// An argument outside its documented domain (temperature <= 0, label out of range, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Malformed binary input (IDX files, checkpoints).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Truncated binary input.
class LengthError : public FormatError {
public:
    LengthError(const std::string& what, std::size_t expected, std::size_t found)
        : FormatError(what + ": need " + std::to_string(expected) + " bytes, have " + std::to_string(found)),
          expected_(expected), found_(found) {}

    std::size_t expected() const noexcept { return expected_; }
    std::size_t found() const noexcept { return found_; }

private:
    std::size_t expected_;
    std::size_t found_;
};

/// Violations of the federated message/aggregation contract.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Configuration validation; carries every violated field, not just the first.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& problems) {
        std::string out = "invalid configuration";
        for (const auto& p : problems) {
            out += "\n  - " + p;
        }
        return out;
    }

    std::vector<std::string> problems_;
};

/// Wraps an inner failure with the protocol stage that raised it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& inner)
        : Error("stage '" + stage + "' failed: " + inner), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace feddtg
