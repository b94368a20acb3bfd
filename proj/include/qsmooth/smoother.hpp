#pragma once

// Fixed-point quantum smoother in density-operator form (valid under the QND
// condition). The pair (rho_plus, rho_minus) represents the symmetric and skew
// least-mean-square estimates of X at the fixed time tau given the record up
// to t >= tau:
//
//   Q+_t(X) = Tr(rho_plus X),   Q-_t(X) = Tr(rho_minus X).
//
// Both are driven by the filter innovation w = dy - Tr(M rho_t) dt with
// M = L + L^dag:
//
//   d rho_plus  = 1/2 ([rho_plus, M]_+ + [rho_minus, M]_- - 2 Tr(M rho_plus) rho_plus ) w
//   d rho_minus = 1/2 ([rho_plus, M]_- + [rho_minus, M]_+ - 2 Tr(M rho_plus) rho_minus) w
//
// where rho_t, the filter state, enters only through the innovation w. Under
// the QND condition Tr(M rho_plus) = Tr(M rho_t) exactly.

#include <string>
#include <vector>

#include "qsmooth/model.hpp"
#include "qsmooth/trajectory.hpp"

namespace qsmooth {

struct SmootherState {
  Operator rho_plus;   // Hermitian
  Operator rho_minus;  // anti-Hermitian
  double t = 0.0;
  /// Largest symmetry defect removed by the repair step so far.
  double max_repair = 0.0;
};

/// Split estimate q+ + q-. For Hermitian X, plus is real and minus is
/// purely imaginary.
struct SmoothedValue {
  complex_t plus;
  complex_t minus;

  complex_t total() const { return plus + minus; }
};

SmootherState smoother_init(const DensityOperator& rho_tau, double tau = 0.0);

/// One Euler-Maruyama step of the density-form smoother. Throws QndRequired
/// unless qnd_check(sys) holds.
SmootherState smoother_step(const SmootherState& state, const DensityOperator& rho_filter, double dy,
                            double dt, const SystemSpec& sys);

SmoothedValue smoothed_estimate(const SmootherState& state, const Operator& x);

struct SmoothedPath {
  std::size_t tau_step = 0;
  std::vector<std::string> names;
  /// values[j][k] is the estimate of observable j at grid index tau_step + k.
  std::vector<std::vector<SmoothedValue>> values;
  /// Tr(rho_plus) - 1 and Tr(rho_minus) along the run (max absolute value).
  double max_trace_plus_error = 0.0;
  double max_trace_minus = 0.0;
  double max_repair = 0.0;
  SmootherState final_state;
};

/// Initializes from the filter at tau_step and steps to the end of the record.
SmoothedPath smooth_trajectory(const TrajectoryRecord& record, const FilterPath& filter,
                               const SystemSpec& sys, std::size_t tau_step,
                               const std::vector<NamedObservable>& observables);

SmoothedPath smooth_trajectory(const TrajectoryRecord& record, const FilterPath& filter,
                               const SystemSpec& sys, const ExperimentSpec& exp);

}  // namespace qsmooth
