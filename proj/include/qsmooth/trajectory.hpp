#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qsmooth/model.hpp"
#include "qsmooth/rng.hpp"

namespace qsmooth {

/// Homodyne record: dy[k] is the increment over (t_k, t_{k+1}].
struct TrajectoryRecord {
  double dt = 0.0;
  std::vector<double> dy;
  std::uint64_t seed_used = 0;
  std::uint64_t stream = 0;

  std::size_t n_steps() const noexcept { return dy.size(); }
};

/// What the raw Euler-Maruyama update looked like before it was repaired.
struct StepDiagnostics {
  double trace_error = 0.0;      // |Tr(rho') - 1|
  double herm_defect = 0.0;      // max |rho' - rho'^dag|
  double min_eigenvalue = 0.0;   // of the symmetrized rho'
};

struct FilterDiagnostics {
  double max_trace_error = 0.0;
  double max_herm_defect = 0.0;
  double min_eigenvalue = 1.0;
  std::size_t clipped_steps = 0;  // steps whose raw state had a negative eigenvalue

  void absorb(const StepDiagnostics& s);
};

/// Filter output on the grid t_k = k dt, k = 0..n.
struct FilterPath {
  double dt = 0.0;
  std::vector<DensityOperator> rho;
  std::vector<std::string> names;
  std::vector<std::vector<complex_t>> estimates;  // [observable][k] = Tr(rho_k X)
  FilterDiagnostics diagnostics;
};

/// Raw Euler-Maruyama increment of the stochastic master equation, without
/// any repair:
///   rho + (-i[H,rho] + L rho L^dag - {L^dag L, rho}/2) dt
///       + (L rho + rho L^dag - Tr(M rho) rho)(dy - Tr(M rho) dt),  M = L + L^dag.
Operator sme_step_raw(const Operator& rho, double dy, double dt, const SystemSpec& sys);

/// sme_step_raw followed by Hermitian symmetrization, positive-part projection
/// and trace renormalization.
DensityOperator sme_step(const DensityOperator& rho, double dy, double dt, const SystemSpec& sys,
                         StepDiagnostics* diag = nullptr);

/// Simulates a homodyne record: dy_k = Tr(M rho_k) dt + dW_k with
/// dW_k ~ N(0, dt), rho_k the truth-side conditional state started from
/// sys.rho0. `truth_states`, if given, receives rho_0..rho_n.
TrajectoryRecord simulate_truth(const SystemSpec& sys, const ExperimentSpec& exp, CounterRng& rng,
                                std::vector<DensityOperator>* truth_states = nullptr);

/// Uses substream `stream` of exp.seed.
TrajectoryRecord simulate_truth(const SystemSpec& sys, const ExperimentSpec& exp, std::uint64_t stream,
                                std::vector<DensityOperator>* truth_states = nullptr);

/// Runs the filter from exp.filter_prior(sys) along `record`.
FilterPath filter_trajectory(const TrajectoryRecord& record, const SystemSpec& sys,
                             const ExperimentSpec& exp);

/// Same, from an explicit prior and observable list.
FilterPath filter_trajectory(const TrajectoryRecord& record, const SystemSpec& sys,
                             const DensityOperator& prior, const std::vector<NamedObservable>& observables);

}  // namespace qsmooth
