#pragma once

#include <stdexcept>
#include <string>

namespace bmt {

// Validation failures (bad input data, contract violations). CLI maps these
// to exit code 1.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string stage, std::string message, std::string context = "")
        : std::runtime_error(format(stage, message, context)),
          stage_(std::move(stage)) {}

    const std::string& stage() const { return stage_; }

private:
    static std::string format(const std::string& stage, const std::string& message,
                              const std::string& context) {
        std::string s = stage + ": " + message;
        if (!context.empty()) s += ": " + context;
        return s;
    }
    std::string stage_;
};

// Filesystem / IO failures. CLI maps these to exit code 2.
class IoError : public std::runtime_error {
public:
    IoError(std::string stage, std::string message, std::string context = "")
        : std::runtime_error(format(stage, message, context)),
          stage_(std::move(stage)) {}

    const std::string& stage() const { return stage_; }

private:
    static std::string format(const std::string& stage, const std::string& message,
                              const std::string& context) {
        std::string s = stage + ": " + message;
        if (!context.empty()) s += ": " + context;
        return s;
    }
    std::string stage_;
};

}  // namespace bmt
