#ifndef SSDE_ERRORS_HPP
#define SSDE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ssde {

/// Base class for all library errors. The CLI maps each subclass to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: dimension mismatch, non-SPD matrix, bad rate matrix, malformed file.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical blow-up (non-finite filter or path state, degenerate filter).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File-system or parse failure on external data.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssde

#endif  // SSDE_ERRORS_HPP
