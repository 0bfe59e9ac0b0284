#pragma once

#include <stdexcept>
#include <string>

namespace filippov {

// Base error carrying a stable machine-readable kind next to the human
// message; the CLI serializes both into its error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t offset,
               std::string expected = {})
        : Error("parse-error", message), offset_(offset),
          expected_(std::move(expected)) {}

    std::size_t offset() const { return offset_; }
    const std::string& expected() const { return expected_; }

private:
    std::size_t offset_;
    std::string expected_;
};

class EvalError : public Error {
public:
    explicit EvalError(const std::string& message) : Error("eval-error", message) {}
};

class DerivativeError : public Error {
public:
    explicit DerivativeError(const std::string& message)
        : Error("derivative-error", message) {}
};

class ScenarioError : public Error {
public:
    explicit ScenarioError(const std::string& message)
        : Error("scenario-error", message) {}
};

class OnSurfaceError : public Error {
public:
    explicit OnSurfaceError(const std::string& message)
        : Error("on-surface-error", message) {}
};

class OffSurfaceError : public Error {
public:
    explicit OffSurfaceError(const std::string& message)
        : Error("off-surface-error", message) {}
};

class OrderOverflowError : public Error {
public:
    explicit OrderOverflowError(const std::string& message)
        : Error("order-overflow-error", message) {}
};

class WrongRegionError : public Error {
public:
    explicit WrongRegionError(const std::string& message)
        : Error("wrong-region-error", message) {}
};

class DegenerateSlidingError : public Error {
public:
    explicit DegenerateSlidingError(const std::string& message)
        : Error("degenerate-sliding-error", message) {}
};

class FlowError : public Error {
public:
    FlowError(std::string kind, const std::string& message)
        : Error(std::move(kind), message) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error("usage-error", message) {}
};

}  // namespace filippov
