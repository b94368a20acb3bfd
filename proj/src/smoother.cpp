#include "qsmooth/smoother.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace qsmooth {

namespace {

void require_qnd(const SystemSpec& sys) {
  const QndReport r = qnd_report(sys);
  if (!r.satisfied) throw QndRequired(r.normality_defect, r.commutator_norm);
}

}  // namespace

SmootherState smoother_init(const DensityOperator& rho_tau, double tau) {
  SmootherState s;
  s.rho_plus = rho_tau.op();
  s.rho_minus = Operator::Zero(rho_tau.dim(), rho_tau.dim());
  s.t = tau;
  return s;
}

SmootherState smoother_step(const SmootherState& state, const DensityOperator& rho_filter, double dy,
                            double dt, const SystemSpec& sys) {
  require_qnd(sys);
  if (!std::isfinite(dy) || !std::isfinite(dt)) {
    throw NumericalError(fmt::format("smoother_step: non-finite input (dy = {}, dt = {})", dy, dt));
  }
  if (state.rho_plus.rows() != sys.dim || rho_filter.dim() != sys.dim) {
    throw DimensionError("smoother_step: state dimension does not match the system");
  }
  const Operator M = sys.measured();
  const double w = dy - expect(rho_filter, M).real() * dt;
  // Under QND Tr(M rho_plus) equals the filtered mean of M; using it here
  // keeps Tr(rho_plus) = 1 a fixed point of the discrete update.
  const double mean = expect(state.rho_plus, M).real();

  const Operator& P = state.rho_plus;
  const Operator& N = state.rho_minus;
  const Operator PM = P * M, MP = M * P, NM = N * M, MN = M * N;

  Operator plus = P + 0.5 * ((PM + MP) + (NM - MN) - 2.0 * mean * P) * w;
  Operator minus = N + 0.5 * ((PM - MP) + (NM + MN) - 2.0 * mean * N) * w;
  if (!plus.allFinite() || !minus.allFinite()) {
    throw NumericalError("smoother_step: state became non-finite");
  }

  SmootherState next;
  const double repair = std::max(hermiticity_defect(plus), anti_hermiticity_defect(minus));
  next.rho_plus = hermitian_part(plus);
  next.rho_minus = anti_hermitian_part(minus);
  next.t = state.t + dt;
  next.max_repair = std::max(state.max_repair, repair);
  return next;
}

SmoothedValue smoothed_estimate(const SmootherState& state, const Operator& x) {
  return {expect(state.rho_plus, x), expect(state.rho_minus, x)};
}

SmoothedPath smooth_trajectory(const TrajectoryRecord& record, const FilterPath& filter,
                               const SystemSpec& sys, std::size_t tau_step,
                               const std::vector<NamedObservable>& observables) {
  require_qnd(sys);
  const std::size_t n = record.n_steps();
  if (filter.rho.size() != n + 1) {
    throw ValidationError(
        fmt::format("filter path has {} points but the record has {} steps", filter.rho.size(), n), "record");
  }
  if (tau_step > n) {
    throw ValidationError(fmt::format("tau step {} beyond the record end {}", tau_step, n), "experiment.tau");
  }

  SmoothedPath out;
  out.tau_step = tau_step;
  out.values.assign(observables.size(), {});
  for (const auto& obs : observables) out.names.push_back(obs.name);

  auto record_point = [&](const SmootherState& s) {
    for (std::size_t j = 0; j < observables.size(); ++j) {
      out.values[j].push_back(smoothed_estimate(s, observables[j].op));
    }
    out.max_trace_plus_error = std::max(out.max_trace_plus_error, std::abs(s.rho_plus.trace() - 1.0));
    out.max_trace_minus = std::max(out.max_trace_minus, std::abs(s.rho_minus.trace()));
  };

  SmootherState state = smoother_init(filter.rho[tau_step], static_cast<double>(tau_step) * record.dt);
  record_point(state);
  for (std::size_t k = tau_step; k < n; ++k) {
    state = smoother_step(state, filter.rho[k], record.dy[k], record.dt, sys);
    record_point(state);
  }
  out.max_repair = state.max_repair;
  out.final_state = std::move(state);
  return out;
}

SmoothedPath smooth_trajectory(const TrajectoryRecord& record, const FilterPath& filter,
                               const SystemSpec& sys, const ExperimentSpec& exp) {
  return smooth_trajectory(record, filter, sys, exp.tau_step(), exp.observables);
}

}  // namespace qsmooth
