#pragma once

// Dense finite-dimensional operator algebra: adjoints, brackets, the quantum
// expectation and the two pre-inner products used by the least-mean-square
// estimates.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qsmooth/errors.hpp"

namespace qsmooth {

using complex_t = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

/// Numerical slack used when validating density operators and Hermitian inputs.
struct Tolerances {
  double herm = 1e-9;
  double trace = 1e-9;
  double psd = 1e-9;
};

enum class BracketSign { plus, minus };

Operator adjoint(const Operator& a);

/// [A, B]_+ = AB + BA, [A, B]_- = AB - BA.
Operator bracket(const Operator& a, const Operator& b, BracketSign sign);

inline Operator commutator(const Operator& a, const Operator& b) {
  return bracket(a, b, BracketSign::minus);
}
inline Operator anticommutator(const Operator& a, const Operator& b) {
  return bracket(a, b, BracketSign::plus);
}

Operator tensor(const Operator& a, const Operator& b);

/// Partial trace of `a` (acting on the tensor product of factors of sizes
/// `dims`, first factor most significant) keeping the factors listed in `keep`
/// in their original order.
Operator partial_trace(const Operator& a, std::span<const std::size_t> dims,
                       std::span<const std::size_t> keep);

double max_abs(const Operator& a);
double hermiticity_defect(const Operator& a);       // max |A - A^dag|
double anti_hermiticity_defect(const Operator& a);  // max |A + A^dag|
Operator hermitian_part(const Operator& a);         // (A + A^dag)/2
Operator anti_hermitian_part(const Operator& a);    // (A - A^dag)/2

/// Smallest eigenvalue of the Hermitian part of `a`.
double min_eigenvalue(const Operator& a);

bool is_square(const Operator& a) noexcept;

/// A validated density operator: Hermitian, unit trace, positive semidefinite
/// (each within the given tolerances). Immutable once constructed.
class DensityOperator {
 public:
  explicit DensityOperator(Operator op, const Tolerances& tol = {});

  const Operator& op() const noexcept { return op_; }
  Eigen::Index dim() const noexcept { return op_.rows(); }

  /// Hermitian symmetrization, clipping of negative eigenvalues and trace
  /// renormalization. Throws ValidationError when nothing positive remains.
  static DensityOperator project(const Operator& raw, const Tolerances& tol = {});

 private:
  Operator op_;
};

/// Tr(rho X).
complex_t expect(const DensityOperator& rho, const Operator& x);
complex_t expect(const Operator& rho, const Operator& x);

/// <X, Y>_rho = Tr(rho X^dag Y).
complex_t inner(const DensityOperator& rho, const Operator& x, const Operator& y);
/// <<X, Y>>_rho = Tr(rho (X^dag Y + Y X^dag)) / 2.
complex_t sym_inner(const DensityOperator& rho, const Operator& x, const Operator& y);

namespace ops {

Operator identity(Eigen::Index dim);
Operator pauli_x();
Operator pauli_y();
Operator pauli_z();
/// sigma_- = |1><0| with sigma_z|0> = |0>.
Operator lowering();
Operator raising();
/// |k><k| in dimension `dim`.
Operator basis_projector(Eigen::Index dim, Eigen::Index k);
/// |psi><psi| for a (not necessarily normalized) vector; normalizes first.
Operator pure_state(const StateVector& psi);

}  // namespace ops

}  // namespace qsmooth
