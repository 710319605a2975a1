#pragma once

#include <stdexcept>
#include <string>

namespace aloha {

// Root of every error raised by the library. Callers that only need to
// report a failure can catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

// p = exp(-lambda_hat / p) has no real root (lambda_hat > 1/e).
class NoStablePoint : public Error {
public:
  explicit NoStablePoint(double lambda_hat)
      : Error("no stable point: aggregate rate " + std::to_string(lambda_hat) +
              " exceeds 1/e"),
        lambda_hat_(lambda_hat) {}

  double lambda_hat() const noexcept { return lambda_hat_; }

private:
  double lambda_hat_;
};

// Mean service time is infinite (unbounded K with q <= 1 - p).
class DivergentMean : public Error {
public:
  using Error::Error;
};

// A closed form was requested for a cutoff phase it does not cover.
class UnsupportedK : public Error {
public:
  using Error::Error;
};

// A closed form was requested for a policy it does not cover (for example
// integer or user-supplied windows where only W_i = 2/q^i - 1 applies).
class UnsupportedPolicy : public Error {
public:
  using Error::Error;
};

// Malformed configuration (CLI flags, experiment files).
class ConfigError : public Error {
public:
  using Error::Error;
};

// A simulator monitor observed a state that the model forbids.
class InvariantViolation : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace aloha
