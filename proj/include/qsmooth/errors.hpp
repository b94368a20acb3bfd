#pragma once

#include <stdexcept>
#include <string>

namespace qsmooth {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree (square-ness, matching dims, tensor factorization).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates a domain invariant. `field()` names the offending
/// configuration path when one is known (e.g. "system.H").
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message, std::string field = {})
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed configuration or record file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in an integrator step.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The density-form smoother needs L normal and [H, L] = 0.
class QndRequired : public Error {
 public:
  QndRequired(double normality_defect, double commutator_norm);

  double normality_defect() const noexcept { return normality_defect_; }
  double commutator_norm() const noexcept { return commutator_norm_; }

 private:
  double normality_defect_;
  double commutator_norm_;
};

/// Joint oracle dimension dim * 2^n exceeds the configured cap.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace qsmooth
