#pragma once

#include <stdexcept>
#include <string>

namespace degdiff {

// Argument outside the domain where an operation is defined.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A hypothesis on p or on the model cannot be satisfied.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite input or output in a numeric kernel.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Model construction with invalid parameters.
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Matrix is singular where a positive-definite one is required.
class SingularError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Scale function from 0 is only defined for r < 1/2.
class ClassificationOnlyError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A structural hypothesis of the general-domain setting fails (e.g. g <= 0).
class HypothesisViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Backtracking could not return a step into the closed domain.
class StepRejection : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid experiment configuration; `key` names the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace degdiff
