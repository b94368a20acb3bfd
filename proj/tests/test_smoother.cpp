#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "qsmooth/smoother.hpp"

using namespace qsmooth;

namespace {

const StateVector kPlus = StateVector::Constant(2, std::sqrt(0.5));

SystemSpec system(const Operator& h, const Operator& l, const Operator& rho0) {
  return make_system(h, l, DensityOperator(rho0));
}

ExperimentSpec experiment(double dt, double t_final, double tau, std::uint64_t seed,
                          std::vector<NamedObservable> observables) {
  ExperimentSpec e;
  e.dt = dt;
  e.t_final = t_final;
  e.tau = tau;
  e.n_traj = 1;
  e.seed = seed;
  e.observables = std::move(observables);
  return e;
}

const std::vector<NamedObservable> kPaulis{{"sx", ops::pauli_x()}, {"sy", ops::pauli_y()}, {"sz", ops::pauli_z()}};

}  // namespace

TEST_CASE("initialization copies the filter state", "[smoother]") {
  const DensityOperator rho(ops::pure_state(kPlus));
  const SmootherState s = smoother_init(rho, 0.3);
  CHECK(s.rho_plus == rho.op());
  CHECK(max_abs(s.rho_minus) == 0.0);
  CHECK(s.t == 0.3);
  const SmoothedValue v = smoothed_estimate(s, ops::pauli_x());
  CHECK(std::abs(v.plus - 1.0) <= 1e-15);
  CHECK(v.minus == complex_t(0.0, 0.0));
}

TEST_CASE("non-QND systems are rejected with the failing norms", "[smoother]") {
  const SystemSpec sys = system(ops::pauli_x(), ops::pauli_z(), ops::pure_state(kPlus));
  const SmootherState s = smoother_init(sys.rho0);
  try {
    smoother_step(s, sys.rho0, 0.01, 1e-3, sys);
    FAIL("expected QndRequired");
  } catch (const QndRequired& e) {
    CHECK(e.commutator_norm() == Catch::Approx(2.0));
    CHECK(e.normality_defect() == 0.0);
  }
  const SystemSpec decay = system(Operator::Zero(2, 2), ops::lowering(), ops::pure_state(kPlus));
  CHECK_THROWS_AS(smoother_step(s, decay.rho0, 0.01, 1e-3, decay), QndRequired);
}

TEST_CASE("no coupling leaves the smoother unchanged", "[smoother]") {
  const SystemSpec sys = system(0.7 * ops::pauli_x(), Operator::Zero(2, 2), ops::pure_state(kPlus));
  SmootherState s = smoother_init(sys.rho0);
  for (double dy : {0.1, -0.2, 0.05}) s = smoother_step(s, sys.rho0, dy, 1e-2, sys);
  CHECK(s.rho_plus == sys.rho0.op());
  CHECK(max_abs(s.rho_minus) == 0.0);
}

TEST_CASE("skew part stays zero for a state diagonal in the L basis", "[smoother]") {
  Operator rho0 = Operator::Zero(2, 2);
  rho0(0, 0) = 0.7;
  rho0(1, 1) = 0.3;
  const SystemSpec sys = system(Operator::Zero(2, 2), ops::pauli_z(), rho0);
  const ExperimentSpec exp = experiment(1e-3, 1.0, 0.0, 4, kPaulis);
  const TrajectoryRecord rec = simulate_truth(sys, exp, 0);
  const FilterPath filter = filter_trajectory(rec, sys, exp);
  const SmoothedPath path = smooth_trajectory(rec, filter, sys, exp);
  CHECK(max_abs(path.final_state.rho_minus) == 0.0);
}

TEST_CASE("smoother starts at the filter and preserves its structure", "[smoother][property]") {
  const SystemSpec sys = system(0.5 * ops::pauli_z(), ops::pauli_z(), ops::pure_state(kPlus));
  const ExperimentSpec exp = experiment(1e-3, 2.0, 0.5, 8, kPaulis);
  const TrajectoryRecord rec = simulate_truth(sys, exp, 0);
  const FilterPath filter = filter_trajectory(rec, sys, exp);
  const SmoothedPath path = smooth_trajectory(rec, filter, sys, exp);

  REQUIRE(path.tau_step == 500);
  REQUIRE(path.values[0].size() == rec.n_steps() - 500 + 1);
  for (std::size_t j = 0; j < kPaulis.size(); ++j) {
    CHECK(path.values[j][0].total() == filter.estimates[j][500]);
    for (const SmoothedValue& v : path.values[j]) {
      CHECK(std::abs(v.plus.imag()) <= 1e-9);
      CHECK(std::abs(v.minus.real()) <= 1e-9);
    }
  }
  CHECK(path.max_trace_plus_error <= 1e-12);
  CHECK(path.max_trace_minus <= 1e-12);
  CHECK(path.max_repair <= 1e-9);
  CHECK(hermiticity_defect(path.final_state.rho_plus) == 0.0);
  CHECK(anti_hermiticity_defect(path.final_state.rho_minus) == 0.0);
}

TEST_CASE("tau at the end of the record yields a single smoothed point", "[smoother]") {
  const SystemSpec sys = system(Operator::Zero(2, 2), ops::pauli_z(), ops::pure_state(kPlus));
  const ExperimentSpec exp = experiment(1e-2, 0.5, 0.5, 1, kPaulis);
  const TrajectoryRecord rec = simulate_truth(sys, exp, 0);
  const SmoothedPath path = smooth_trajectory(rec, filter_trajectory(rec, sys, exp), sys, exp);
  CHECK(path.values[0].size() == 1);
  CHECK_THROWS_AS(smooth_trajectory(rec, filter_trajectory(rec, sys, exp), sys, 51, kPaulis), ValidationError);
}

TEST_CASE("smoothed estimate is a martingale in the final time", "[smoother][property]") {
  // With tau = 0 and a matched prior, E[q+_T(X)] = Tr(rho0 X).
  const SystemSpec sys = system(Operator::Zero(2, 2), 0.5 * ops::pauli_z(), ops::pure_state(kPlus));
  const std::vector<NamedObservable> obs{{"sx", ops::pauli_x()}};
  const ExperimentSpec exp = experiment(1e-2, 1.0, 0.0, 55, obs);
  const int n_traj = 500;
  double sum = 0.0, sum2 = 0.0;
  for (int s = 0; s < n_traj; ++s) {
    const TrajectoryRecord rec = simulate_truth(sys, exp, static_cast<std::uint64_t>(s));
    const SmoothedPath path = smooth_trajectory(rec, filter_trajectory(rec, sys, exp), sys, exp);
    const double v = path.values[0].back().plus.real();
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n_traj;
  const double sd = std::sqrt(std::max(sum2 / n_traj - mean * mean, 0.0));
  INFO("mean " << mean << " sd " << sd);
  CHECK(std::abs(mean - 1.0) <= 3.0 * sd / std::sqrt(static_cast<double>(n_traj)) + 1e-12);
}

TEST_CASE("later data improves the estimate of sigma_z at tau", "[smoother][property]") {
  // sigma_z commutes with H and L, so its eigenvalue is a fixed label along
  // each trajectory. The label is drawn from rho0 and the record is then
  // generated from the matching eigenstate, which gives the same record law
  // as the unconditioned system.
  const Operator H = 0.3 * ops::pauli_z(), L = 0.5 * ops::pauli_z();
  const SystemSpec sys = system(H, L, ops::pure_state(kPlus));
  const std::vector<NamedObservable> obs{{"sz", ops::pauli_z()}};
  const ExperimentSpec exp = experiment(1e-2, 1.5, 0.5, 2718, obs);
  const SystemSpec up = system(H, L, ops::basis_projector(2, 0));
  const SystemSpec down = system(H, L, ops::basis_projector(2, 1));
  const double p_up = expect(sys.rho0, ops::basis_projector(2, 0)).real();

  const int n_traj = 500;
  double sum_f = 0.0, sum_s = 0.0, sum_d = 0.0, sum_d2 = 0.0;
  for (int i = 0; i < n_traj; ++i) {
    CounterRng label_rng(exp.seed, 1'000'000 + static_cast<std::uint64_t>(i));
    const bool is_up = label_rng.uniform() < p_up;
    const double label = is_up ? 1.0 : -1.0;
    const TrajectoryRecord rec = simulate_truth(is_up ? up : down, exp, static_cast<std::uint64_t>(i));
    const FilterPath filter = filter_trajectory(rec, sys, exp);
    const SmoothedPath path = smooth_trajectory(rec, filter, sys, exp);
    const double ef = std::pow(filter.estimates[0][exp.tau_step()].real() - label, 2);
    const double es = std::pow(path.values[0].back().plus.real() - label, 2);
    sum_f += ef;
    sum_s += es;
    sum_d += es - ef;
    sum_d2 += (es - ef) * (es - ef);
  }
  const double mse_f = sum_f / n_traj, mse_s = sum_s / n_traj;
  const double mean_d = sum_d / n_traj;
  const double sd_d = std::sqrt(std::max(sum_d2 / n_traj - mean_d * mean_d, 0.0));
  INFO("filter MSE " << mse_f << " smoother MSE " << mse_s);
  CHECK(mse_s <= mse_f + 3.0 * sd_d / std::sqrt(static_cast<double>(n_traj)));
  CHECK(mse_s < mse_f);
}
