#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qsmooth/opalg.hpp"

namespace qsmooth {

/// Monitored system: Hamiltonian H (hbar = 1), coupling L and initial state.
struct SystemSpec {
  Eigen::Index dim = 0;
  Operator H;
  Operator L;
  DensityOperator rho0;

  /// M = L + L^dag, the operator whose mean drifts the homodyne record.
  Operator measured() const { return L + L.adjoint(); }
};

struct NamedObservable {
  std::string name;
  Operator op;
};

struct ExperimentSpec {
  double dt = 0.0;
  double t_final = 0.0;
  double tau = 0.0;
  std::uint64_t n_traj = 0;
  std::uint64_t seed = 0;
  std::vector<NamedObservable> observables;
  std::optional<DensityOperator> filter_rho0;

  std::size_t n_steps() const;
  std::size_t tau_step() const;
  const DensityOperator& filter_prior(const SystemSpec& sys) const {
    return filter_rho0 ? *filter_rho0 : sys.rho0;
  }
};

struct Spec {
  SystemSpec system;
  ExperimentSpec experiment;
};

/// Parses and validates a JSON config document. Throws ParseError on malformed
/// JSON or wrong shapes, ValidationError (with field path) on invariant
/// violations.
Spec parse_spec(std::string_view json_text, const Tolerances& tol = {});

/// Reads `path` and calls parse_spec. Missing/unreadable files raise
/// ValidationError naming the path.
Spec load_spec(const std::filesystem::path& path, const Tolerances& tol = {});

/// Checks the grid/tau/observable invariants of an experiment against a system.
void validate(const SystemSpec& sys, const ExperimentSpec& exp, const Tolerances& tol = {});

/// Builds a SystemSpec after checking shapes and Hermiticity of H.
SystemSpec make_system(Operator H, Operator L, DensityOperator rho0, const Tolerances& tol = {});

struct QndReport {
  double normality_defect = 0.0;  // max |[L, L^dag]|
  double commutator_norm = 0.0;   // max |[H, L]|
  bool satisfied = false;
};

QndReport qnd_report(const SystemSpec& sys, double tol = 1e-9);

/// True iff L is normal and commutes with H (within `tol`), the checkable
/// sufficient condition for L to commute with the interaction unitary.
inline bool qnd_check(const SystemSpec& sys, double tol = 1e-9) {
  return qnd_report(sys, tol).satisfied;
}

/// Named 2x2 presets plus "identity" (any dim) and "zero".
Operator operator_preset(std::string_view name, Eigen::Index dim);

}  // namespace qsmooth
