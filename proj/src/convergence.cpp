#include "qsmooth/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qsmooth/smoother.hpp"
#include "qsmooth/trajectory.hpp"

namespace qsmooth {

std::optional<double> ConvergenceRow::smoother_error() const {
  if (!smoother_plus_error || !smoother_minus_error) return std::nullopt;
  return std::max(*smoother_plus_error, *smoother_minus_error);
}

ConvergenceRow compare_with_oracle(const SystemSpec& sys, const std::vector<NamedObservable>& observables, double dt,
                                   std::size_t n_steps, std::size_t joint_cap) {
  const DiscreteModel model = build_model(sys, n_steps, dt, joint_cap);
  const bool qnd = qnd_check(sys);

  // tables[k] holds records of length k; k = 0 is the prior.
  std::vector<BranchTable> tables;
  tables.reserve(n_steps);
  for (std::size_t k = 1; k <= n_steps; ++k) tables.push_back(enumerate_records(model, observables, 0, k));

  ConvergenceRow row;
  row.dt = dt;
  row.n_steps = n_steps;
  if (qnd) {
    row.smoother_plus_error = 0.0;
    row.smoother_minus_error = 0.0;
    row.max_trace_plus_error = 0.0;
    row.max_trace_minus = 0.0;
    row.tau_consistency = 0.0;
  }

  const double sqrt_dt = std::sqrt(dt);
  const std::size_t n_records = std::size_t{1} << n_steps;
  for (std::size_t index = 0; index < n_records; ++index) {
    const std::vector<int> y = decode_record(index, n_steps);
    TrajectoryRecord record;
    record.dt = dt;
    for (int outcome : y) record.dy.push_back(outcome * sqrt_dt);
    const FilterPath filter = filter_trajectory(record, sys, sys.rho0, observables);

    std::optional<SmoothedPath> smooth;
    if (qnd) {
      smooth = smooth_trajectory(record, filter, sys, 0, observables);
      *row.max_trace_plus_error = std::max(*row.max_trace_plus_error, smooth->max_trace_plus_error);
      *row.max_trace_minus = std::max(*row.max_trace_minus, smooth->max_trace_minus);
    }

    for (std::size_t k = 0; k <= n_steps; ++k) {
      const BranchRecord* oracle = nullptr;
      if (k > 0) {
        oracle = &tables[k - 1].records[index >> (n_steps - k)];
        if (!oracle->included) continue;
      }
      for (std::size_t j = 0; j < observables.size(); ++j) {
        const Operator& x = observables[j].op;
        const complex_t exact_filter = oracle ? expect(*oracle->filter_state, x) : expect(sys.rho0, x);
        row.filter_error = std::max(row.filter_error, std::abs(filter.estimates[j][k] - exact_filter));
        if (!smooth) continue;
        const complex_t exact_plus = oracle ? oracle->q_plus[j] : expect(sys.rho0, x);
        const complex_t exact_minus = oracle ? oracle->q_minus[j] : complex_t{};
        const SmoothedValue& v = smooth->values[j][k];
        *row.smoother_plus_error = std::max(*row.smoother_plus_error, std::abs(v.plus - exact_plus));
        *row.smoother_minus_error = std::max(*row.smoother_minus_error, std::abs(v.minus - exact_minus));
        if (k == 0) {
          const double gap = std::abs(v.total() - filter.estimates[j][0]);
          *row.tau_consistency = std::max(*row.tau_consistency, gap);
        }
      }
    }
  }
  return row;
}

std::optional<double> fitted_order(const std::vector<double>& dts, const std::vector<double>& errors) {
  if (dts.size() != errors.size()) return std::nullopt;
  std::set<double> distinct(dts.begin(), dts.end());
  if (distinct.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(dts.size());
  for (std::size_t i = 0; i < dts.size(); ++i) {
    if (!(errors[i] > 0.0) || !(dts[i] > 0.0)) return std::nullopt;
    const double x = std::log(dts[i]);
    const double yv = std::log(errors[i]);
    sx += x;
    sy += yv;
    sxx += x * x;
    sxy += x * yv;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / denom;
}

}  // namespace qsmooth
