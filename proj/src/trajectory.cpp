#include "qsmooth/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace qsmooth {

void FilterDiagnostics::absorb(const StepDiagnostics& s) {
  max_trace_error = std::max(max_trace_error, s.trace_error);
  max_herm_defect = std::max(max_herm_defect, s.herm_defect);
  min_eigenvalue = std::min(min_eigenvalue, s.min_eigenvalue);
  if (s.min_eigenvalue < 0.0) ++clipped_steps;
}

Operator sme_step_raw(const Operator& rho, double dy, double dt, const SystemSpec& sys) {
  if (!std::isfinite(dy) || !std::isfinite(dt)) {
    throw NumericalError(fmt::format("sme_step: non-finite input (dy = {}, dt = {})", dy, dt));
  }
  if (rho.rows() != sys.dim || !is_square(rho)) {
    throw DimensionError("sme_step: state dimension does not match the system");
  }
  const complex_t i{0.0, 1.0};
  const Operator& L = sys.L;
  const Operator Ld = L.adjoint();
  const Operator LdL = Ld * L;
  const Operator L_rho = L * rho;
  const Operator rho_Ld = rho * Ld;

  const double mean = expect(rho, sys.measured()).real();
  const double innovation = dy - mean * dt;

  Operator drift = -i * (sys.H * rho - rho * sys.H) + L_rho * Ld - 0.5 * (LdL * rho + rho * LdL);
  Operator diffusion = L_rho + rho_Ld - mean * rho;
  Operator next = rho + drift * dt + diffusion * innovation;
  if (!next.allFinite()) throw NumericalError("sme_step: state became non-finite");
  return next;
}

DensityOperator sme_step(const DensityOperator& rho, double dy, double dt, const SystemSpec& sys,
                         StepDiagnostics* diag) {
  Operator raw = sme_step_raw(rho.op(), dy, dt, sys);
  if (diag) {
    diag->trace_error = std::abs(raw.trace() - 1.0);
    diag->herm_defect = hermiticity_defect(raw);
    diag->min_eigenvalue = min_eigenvalue(raw);
  }
  return DensityOperator::project(raw);
}

TrajectoryRecord simulate_truth(const SystemSpec& sys, const ExperimentSpec& exp, CounterRng& rng,
                                std::vector<DensityOperator>* truth_states) {
  const std::size_t n = exp.n_steps();
  const double dt = exp.dt;
  const double sqrt_dt = std::sqrt(dt);
  const Operator M = sys.measured();

  TrajectoryRecord record;
  record.dt = dt;
  record.seed_used = exp.seed;
  record.dy.reserve(n);
  if (truth_states) {
    truth_states->clear();
    truth_states->reserve(n + 1);
    truth_states->push_back(sys.rho0);
  }

  DensityOperator rho = sys.rho0;
  for (std::size_t k = 0; k < n; ++k) {
    const double mean = expect(rho, M).real();
    const double dy = mean * dt + sqrt_dt * rng.normal();
    record.dy.push_back(dy);
    rho = sme_step(rho, dy, dt, sys);
    if (truth_states) truth_states->push_back(rho);
  }
  return record;
}

TrajectoryRecord simulate_truth(const SystemSpec& sys, const ExperimentSpec& exp, std::uint64_t stream,
                                std::vector<DensityOperator>* truth_states) {
  CounterRng rng(exp.seed, stream);
  TrajectoryRecord record = simulate_truth(sys, exp, rng, truth_states);
  record.stream = stream;
  return record;
}

FilterPath filter_trajectory(const TrajectoryRecord& record, const SystemSpec& sys,
                             const DensityOperator& prior, const std::vector<NamedObservable>& observables) {
  if (prior.dim() != sys.dim) throw DimensionError("filter_trajectory: prior dimension mismatch");
  FilterPath path;
  path.dt = record.dt;
  const std::size_t n = record.n_steps();
  path.rho.reserve(n + 1);
  path.names.reserve(observables.size());
  path.estimates.assign(observables.size(), {});
  for (std::size_t j = 0; j < observables.size(); ++j) {
    path.names.push_back(observables[j].name);
    path.estimates[j].reserve(n + 1);
  }

  auto record_point = [&](const DensityOperator& rho) {
    for (std::size_t j = 0; j < observables.size(); ++j) {
      path.estimates[j].push_back(expect(rho, observables[j].op));
    }
    path.rho.push_back(rho);
  };

  DensityOperator rho = prior;
  record_point(rho);
  for (std::size_t k = 0; k < n; ++k) {
    StepDiagnostics step;
    rho = sme_step(rho, record.dy[k], record.dt, sys, &step);
    path.diagnostics.absorb(step);
    record_point(rho);
  }
  return path;
}

FilterPath filter_trajectory(const TrajectoryRecord& record, const SystemSpec& sys,
                             const ExperimentSpec& exp) {
  if (record.n_steps() != exp.n_steps()) {
    throw ValidationError(fmt::format("record has {} steps but the experiment grid has {}",
                                      record.n_steps(), exp.n_steps()),
                          "record");
  }
  if (std::abs(record.dt - exp.dt) > 1e-12) {
    throw ValidationError("record dt does not match experiment dt", "record");
  }
  return filter_trajectory(record, sys, exp.filter_prior(sys), exp.observables);
}

}  // namespace qsmooth
