#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mindiff {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a function (e.g. x outside [a,b]).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition (e.g. kappa below kappa0).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (bad law file, invalid measure).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed to meet its accuracy target.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::vector<double> profile = {})
      : Error(what), profile_(std::move(profile)) {}

  /// Residual (or other diagnostic) profile attached by the failing routine.
  const std::vector<double>& profile() const { return profile_; }

 private:
  std::vector<double> profile_;
};

/// A statistical check did not pass.
class VerificationError : public Error {
 public:
  using Error::Error;
};

}  // namespace mindiff
