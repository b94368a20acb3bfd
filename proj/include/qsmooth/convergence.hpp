#pragma once

// Comparison of the SDE filter and smoother against the exact oracle on the
// binary-outcome records of the discrete model, mapped to increments
// dy_k = y_k sqrt(dt).

#include <optional>
#include <vector>

#include "qsmooth/oracle.hpp"

namespace qsmooth {

struct ConvergenceRow {
  double dt = 0.0;
  std::size_t n_steps = 0;
  /// max over records, grid times and observables of |Tr(rho_sde X) - Tr(rho_oracle X)|.
  double filter_error = 0.0;
  /// Same for the smoothed estimates; empty when the system is not QND.
  std::optional<double> smoother_plus_error;
  std::optional<double> smoother_minus_error;
  std::optional<double> max_trace_plus_error;  // max |Tr(rho_plus) - 1|
  std::optional<double> max_trace_minus;       // max |Tr(rho_minus)|
  /// Largest deviation between the smoother at t = tau and the filter at tau.
  std::optional<double> tau_consistency;

  std::optional<double> smoother_error() const;
};

/// Runs every record of length n_steps with tau = 0 (estimand step 0).
ConvergenceRow compare_with_oracle(const SystemSpec& sys, const std::vector<NamedObservable>& observables, double dt,
                                   std::size_t n_steps, std::size_t joint_cap = default_joint_cap());

/// Least-squares slope of log(error) against log(dt); empty with fewer than
/// two distinct dts or a non-positive error.
std::optional<double> fitted_order(const std::vector<double>& dts, const std::vector<double>& errors);

}  // namespace qsmooth
