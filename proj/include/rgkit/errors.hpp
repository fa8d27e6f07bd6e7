#pragma once

#include <stdexcept>
#include <string>

namespace rgkit {

/// Coarse error category; maps onto CLI exit codes and C API status codes.
enum class ErrorKind {
  Input = 2,    ///< malformed or inconsistent input data
  Math = 3,     ///< the derivation itself cannot proceed
  Numeric = 4,  ///< an iterative numeric procedure did not converge
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

class MathError : public Error {
 public:
  explicit MathError(const std::string& what) : Error(ErrorKind::Math, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::Numeric, what) {}
};

// Operands live over different state dimensions or frequency bases.
class BasisMismatch : public MathError {
 public:
  explicit BasisMismatch(const std::string& what) : MathError(what) {}
};

// Antiderivative requested for a function with a nonzero time average.
class MeanNotZero : public MathError {
 public:
  explicit MeanNotZero(const std::string& what) : MathError(what) {}
};

// A nonzero lattice vector k evaluates to the frequency 0, so the declared
// basis is rationally dependent on the support that was actually generated.
class ZeroFrequencyCollision : public MathError {
 public:
  explicit ZeroFrequencyCollision(const std::string& what) : MathError(what) {}
};

}  // namespace rgkit
