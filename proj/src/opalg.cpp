#include "qsmooth/opalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

namespace qsmooth {

QndRequired::QndRequired(double normality_defect, double commutator_norm)
    : Error(fmt::format("QND condition violated: ||[L, L^dag]|| = {:.6g}, ||[H, L]|| = {:.6g}",
                        normality_defect, commutator_norm)),
      normality_defect_(normality_defect),
      commutator_norm_(commutator_norm) {}

namespace {

void require_same_dim(const Operator& a, const Operator& b, const char* what) {
  if (!is_square(a) || !is_square(b) || a.rows() != b.rows()) {
    throw DimensionError(std::string(what) + ": operands must be square with equal dimension (got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

}  // namespace

bool is_square(const Operator& a) noexcept { return a.rows() == a.cols(); }

Operator adjoint(const Operator& a) { return a.adjoint(); }

Operator bracket(const Operator& a, const Operator& b, BracketSign sign) {
  require_same_dim(a, b, "bracket");
  Operator ab = a * b;
  Operator ba = b * a;
  return sign == BracketSign::plus ? Operator(ab + ba) : Operator(ab - ba);
}

Operator tensor(const Operator& a, const Operator& b) {
  Operator out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Operator partial_trace(const Operator& a, std::span<const std::size_t> dims,
                       std::span<const std::size_t> keep) {
  if (!is_square(a)) throw DimensionError("partial_trace: operator must be square");
  const std::size_t total =
      std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  if (dims.empty() || total != static_cast<std::size_t>(a.rows())) {
    throw DimensionError("partial_trace: factor dimensions multiply to " + std::to_string(total) +
                         " but operator has dimension " + std::to_string(a.rows()));
  }
  std::vector<bool> kept(dims.size(), false);
  for (std::size_t k : keep) {
    if (k >= dims.size() || kept[k]) {
      throw DimensionError("partial_trace: invalid or repeated factor index " + std::to_string(k));
    }
    kept[k] = true;
  }
  std::vector<std::size_t> keep_sorted(keep.begin(), keep.end());
  std::sort(keep_sorted.begin(), keep_sorted.end());

  std::size_t kept_dim = 1;
  for (std::size_t k : keep_sorted) kept_dim *= dims[k];

  // Row-major strides of the full index.
  std::vector<std::size_t> stride(dims.size(), 1);
  for (std::size_t f = dims.size() - 1; f-- > 0;) stride[f] = stride[f + 1] * dims[f + 1];

  auto kept_index = [&](std::size_t full) {
    std::size_t idx = 0;
    for (std::size_t k : keep_sorted) idx = idx * dims[k] + (full / stride[k]) % dims[k];
    return idx;
  };
  auto traced_index = [&](std::size_t full) {
    std::size_t idx = 0;
    for (std::size_t f = 0; f < dims.size(); ++f) {
      if (!kept[f]) idx = idx * dims[f] + (full / stride[f]) % dims[f];
    }
    return idx;
  };

  Operator out = Operator::Zero(static_cast<Eigen::Index>(kept_dim), static_cast<Eigen::Index>(kept_dim));
  for (std::size_t r = 0; r < total; ++r) {
    const std::size_t tr = traced_index(r);
    const std::size_t kr = kept_index(r);
    for (std::size_t c = 0; c < total; ++c) {
      if (traced_index(c) != tr) continue;
      out(static_cast<Eigen::Index>(kr), static_cast<Eigen::Index>(kept_index(c))) +=
          a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  return out;
}

double max_abs(const Operator& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double hermiticity_defect(const Operator& a) {
  if (!is_square(a)) return INFINITY;
  return max_abs(a - a.adjoint());
}

double anti_hermiticity_defect(const Operator& a) {
  if (!is_square(a)) return INFINITY;
  return max_abs(a + a.adjoint());
}

Operator hermitian_part(const Operator& a) { return 0.5 * (a + a.adjoint()); }
Operator anti_hermitian_part(const Operator& a) { return 0.5 * (a - a.adjoint()); }

double min_eigenvalue(const Operator& a) {
  if (!is_square(a)) throw DimensionError("min_eigenvalue: operator must be square");
  Eigen::SelfAdjointEigenSolver<Operator> es(hermitian_part(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

DensityOperator::DensityOperator(Operator op, const Tolerances& tol) : op_(std::move(op)) {
  if (!is_square(op_) || op_.rows() == 0) {
    throw ValidationError("density operator must be a non-empty square matrix");
  }
  if (!op_.allFinite()) throw ValidationError("density operator has non-finite entries");
  const double herm = hermiticity_defect(op_);
  if (herm > tol.herm) {
    throw ValidationError(fmt::format("density operator not Hermitian (defect {:.3g})", herm));
  }
  const complex_t tr = op_.trace();
  if (std::abs(tr - 1.0) > tol.trace) {
    throw ValidationError(fmt::format("density operator trace {:.12g}{:+.3g}i != 1", tr.real(), tr.imag()));
  }
  const double lmin = min_eigenvalue(op_);
  if (lmin < -tol.psd) {
    throw ValidationError(
        fmt::format("density operator not positive semidefinite (min eigenvalue {:.3g})", lmin));
  }
}

DensityOperator DensityOperator::project(const Operator& raw, const Tolerances& tol) {
  if (!is_square(raw)) throw DimensionError("project: operator must be square");
  if (!raw.allFinite()) throw NumericalError("project: non-finite entries");
  const Operator herm = hermitian_part(raw);
  Eigen::SelfAdjointEigenSolver<Operator> es(herm);
  if (es.eigenvalues().minCoeff() >= 0.0) {
    const double tr = herm.trace().real();
    if (!(tr > 0.0)) throw ValidationError("project: no positive spectral weight left");
    return DensityOperator(herm / tr, tol);
  }
  Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
  const double total = lambda.sum();
  if (!(total > 0.0)) throw ValidationError("project: no positive spectral weight left");
  lambda /= total;
  Operator out = es.eigenvectors() * lambda.cast<complex_t>().asDiagonal() * es.eigenvectors().adjoint();
  out = hermitian_part(out);
  // Re-centre the trace after the reconstruction round-off.
  out /= out.trace().real();
  return DensityOperator(std::move(out), tol);
}

complex_t expect(const Operator& rho, const Operator& x) {
  require_same_dim(rho, x, "expect");
  // Tr(rho X) without forming the product.
  return (rho.transpose().cwiseProduct(x)).sum();
}

complex_t expect(const DensityOperator& rho, const Operator& x) { return expect(rho.op(), x); }

complex_t inner(const DensityOperator& rho, const Operator& x, const Operator& y) {
  require_same_dim(rho.op(), x, "inner");
  require_same_dim(x, y, "inner");
  return expect(rho.op(), Operator(x.adjoint() * y));
}

complex_t sym_inner(const DensityOperator& rho, const Operator& x, const Operator& y) {
  require_same_dim(rho.op(), x, "sym_inner");
  require_same_dim(x, y, "sym_inner");
  return 0.5 * expect(rho.op(), Operator(x.adjoint() * y + y * x.adjoint()));
}

namespace ops {

Operator identity(Eigen::Index dim) { return Operator::Identity(dim, dim); }

Operator pauli_x() {
  Operator m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Operator pauli_y() {
  const complex_t i{0.0, 1.0};
  Operator m(2, 2);
  m << 0, -i, i, 0;
  return m;
}

Operator pauli_z() {
  Operator m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Operator lowering() {
  Operator m = Operator::Zero(2, 2);
  m(1, 0) = 1.0;
  return m;
}

Operator raising() { return lowering().adjoint(); }

Operator basis_projector(Eigen::Index dim, Eigen::Index k) {
  Operator m = Operator::Zero(dim, dim);
  m(k, k) = 1.0;
  return m;
}

Operator pure_state(const StateVector& psi) {
  const StateVector v = psi.normalized();
  return v * v.adjoint();
}

}  // namespace ops

}  // namespace qsmooth
