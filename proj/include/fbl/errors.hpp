#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fbl {

/// Input outside the closed rectangle (or outside the state interval).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Bad problem data or configuration. Carries the offending key and line
/// when it comes from a config file.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, std::string key = {}, std::size_t line = 0)
        : std::runtime_error(what), key_(std::move(key)), line_(line) {}

    const std::string& key() const noexcept { return key_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string key_;
    std::size_t line_;
};

/// A numerical stage did not converge or produced unusable output.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& stage, const std::string& what, double worst = 0.0)
        : std::runtime_error(stage + ": " + what), stage_(stage), worst_(worst) {}

    const std::string& stage() const noexcept { return stage_; }
    double worst_residual() const noexcept { return worst_; }

private:
    std::string stage_;
    double worst_;
};

/// The extracted boundary left the rectangle, or a slice had no contact set.
class BoundaryEscape : public NumericalFailure {
public:
    BoundaryEscape(const std::string& what, std::size_t slice)
        : NumericalFailure("extract_boundary", what), slice_(slice) {}

    std::size_t slice() const noexcept { return slice_; }

private:
    std::size_t slice_;
};

}  // namespace fbl
