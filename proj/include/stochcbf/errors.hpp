#pragma once

#include <stdexcept>
#include <string>

namespace stochcbf {

/// Thrown when an input violates an operation's contract (dimension or
/// parameter-range mismatch).
class ContractViolation : public std::invalid_argument {
public:
    explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

/// Lambda = 0.5*Sigma^{-1} + A_s failed the positive-definiteness test, so the
/// exponential-moment closed form does not exist for this barrier/noise pair.
/// Callers must reduce the barrier scale or reject the barrier.
class LambdaNotPd : public std::runtime_error {
public:
    explicit LambdaNotPd(const std::string& what) : std::runtime_error(what) {}
};

/// The barrier does not have the shape a condition family requires
/// (e.g. the squared-transform family needs h(x) = x'Ax + c with B = c).
class UnsupportedBarrierForm : public std::runtime_error {
public:
    explicit UnsupportedBarrierForm(const std::string& what) : std::runtime_error(what) {}
};

/// The zeroing-rate alpha derived from the barrier falls outside (0,1).
class AlphaOutOfRange : public std::runtime_error {
public:
    explicit AlphaOutOfRange(const std::string& what) : std::runtime_error(what) {}
};

/// No input satisfies the condition residual at the queried state.
class Infeasible : public std::runtime_error {
public:
    explicit Infeasible(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative solver hit its iteration cap before reaching tolerance.
class NoConvergence : public std::runtime_error {
public:
    explicit NoConvergence(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stochcbf
