#include <cmath>
#include <random>
#include <vector>

#include "catch_amalgamated.hpp"
#include "qsmooth/convergence.hpp"
#include "qsmooth/oracle.hpp"
#include "qsmooth/trajectory.hpp"

using namespace qsmooth;

namespace {

const StateVector kPlus = StateVector::Constant(2, std::sqrt(0.5));

SystemSpec system(const Operator& h, const Operator& l, const Operator& rho0) {
  return make_system(h, l, DensityOperator(rho0));
}

ExperimentSpec experiment(double dt, double t_final, std::uint64_t seed,
                          std::vector<NamedObservable> observables = {}) {
  ExperimentSpec e;
  e.dt = dt;
  e.t_final = t_final;
  e.n_traj = 1;
  e.seed = seed;
  e.observables = std::move(observables);
  return e;
}

DensityOperator random_density(std::mt19937_64& gen) {
  std::normal_distribution<double> n;
  Operator a(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) a(i, j) = complex_t(n(gen), n(gen));
  Operator rho = a * a.adjoint();
  return DensityOperator(hermitian_part(rho / rho.trace().real()));
}

}  // namespace

TEST_CASE("no dynamics leaves the state unchanged", "[trajectory]") {
  const SystemSpec sys = system(Operator::Zero(2, 2), Operator::Zero(2, 2), ops::pure_state(kPlus));
  for (double dy : {-0.3, 0.0, 0.17}) {
    CHECK(sme_step_raw(sys.rho0.op(), dy, 0.01, sys) == sys.rho0.op());
    CHECK(max_abs(sme_step(sys.rho0, dy, 0.01, sys).op() - sys.rho0.op()) < 1e-15);
  }
}

TEST_CASE("hand-evaluated step from the maximally mixed state", "[trajectory]") {
  const SystemSpec sys = system(Operator::Zero(2, 2), ops::pauli_z(), ops::identity(2) / 2.0);
  const double dy = 0.05;
  const Operator raw = sme_step_raw(sys.rho0.op(), dy, 1e-3, sys);
  CHECK(max_abs(raw - (ops::identity(2) / 2.0 + dy * ops::pauli_z())) < 1e-15);
}

TEST_CASE("trace and Hermiticity after every step", "[trajectory][property]") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> n;
  for (int k = 0; k < 200; ++k) {
    const DensityOperator rho = random_density(gen);
    const SystemSpec sys = system(hermitian_part(Operator::Random(2, 2)), Operator::Random(2, 2), rho.op());
    const double dt = 1e-3;
    const DensityOperator next = sme_step(rho, std::sqrt(dt) * n(gen), dt, sys);
    CHECK(std::abs(next.op().trace() - 1.0) <= 1e-12);
    CHECK(hermiticity_defect(next.op()) <= 1e-12);
  }
}

TEST_CASE("raw trace drift is small at dt = 1e-3", "[trajectory][property]") {
  const SystemSpec sys = system(ops::pauli_x(), 0.5 * ops::pauli_z(), ops::pure_state(kPlus));
  const ExperimentSpec exp = experiment(1e-3, 2.0, 3);
  const FilterPath path = filter_trajectory(simulate_truth(sys, exp, 0), sys, exp);
  CHECK(path.diagnostics.max_trace_error <= 1e-6);
  CHECK(path.diagnostics.max_herm_defect <= 1e-12);
}

TEST_CASE("positivity before projection on a mixed-state benchmark", "[trajectory][property]") {
  // Measurement purifies the state only gradually, so over this horizon the
  // driven qubit stays mixed and the raw Euler step never leaves the positive
  // cone at dt = 1e-3.
  const SystemSpec sys = system(ops::pauli_x(), 0.5 * ops::pauli_z(), ops::identity(2) / 2.0);
  const ExperimentSpec exp = experiment(1e-3, 1.0, 17);
  double worst = 1.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    worst = std::min(worst, filter_trajectory(simulate_truth(sys, exp, s), sys, exp).diagnostics.min_eigenvalue);
  }
  CHECK(worst >= -1e-9);
}

TEST_CASE("pure-state positivity violation shrinks linearly with dt", "[trajectory][property]") {
  const SystemSpec sys = system(Operator::Zero(2, 2), ops::pauli_z(), ops::pure_state(kPlus));
  std::vector<double> worst;
  for (double dt : {1e-3, 1e-4}) {
    const ExperimentSpec exp = experiment(dt, 0.5, 11);
    double w = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      w = std::min(w, filter_trajectory(simulate_truth(sys, exp, s), sys, exp).diagnostics.min_eigenvalue);
    }
    worst.push_back(-w);
  }
  REQUIRE(worst[0] > 0.0);
  CHECK(worst[1] < worst[0] / 5.0);
}

TEST_CASE("pure noise record when nothing couples", "[trajectory]") {
  const SystemSpec sys = system(Operator::Zero(2, 2), Operator::Zero(2, 2), ops::pure_state(kPlus));
  const ExperimentSpec exp = experiment(1e-3, 10.0, 99);
  const TrajectoryRecord rec = simulate_truth(sys, exp, 0);
  REQUIRE(rec.n_steps() == 10000);
  double sum = 0.0, sum2 = 0.0;
  for (double dy : rec.dy) {
    const double z = dy / std::sqrt(exp.dt);
    sum += z;
    sum2 += z * z;
  }
  const double n = static_cast<double>(rec.n_steps());
  const double mean = sum / n;
  CHECK(std::abs(sum2 / n - mean * mean - 1.0) < 0.05);
}

TEST_CASE("record drift equals the eigenvalue of L + L^dag", "[trajectory]") {
  const double kappa = 1.0;
  const SystemSpec sys = system(Operator::Zero(2, 2), std::sqrt(kappa) * ops::pauli_z(), ops::basis_projector(2, 0));
  const ExperimentSpec exp = experiment(1e-2, 100.0, 5);
  const TrajectoryRecord rec = simulate_truth(sys, exp, 0);
  double total = 0.0;
  for (double dy : rec.dy) total += dy;
  const double mean_rate = total / exp.t_final;
  // dy = 2 sqrt(kappa) dt + dW, so the mean rate has standard error 1/sqrt(T).
  CHECK(std::abs(mean_rate - 2.0 * std::sqrt(kappa)) < 3.0 / std::sqrt(exp.t_final));
}

TEST_CASE("fixed seed reproduces the record bit for bit", "[trajectory]") {
  const SystemSpec sys = system(ops::pauli_x(), 0.5 * ops::pauli_z(), ops::pure_state(kPlus));
  const ExperimentSpec exp = experiment(1e-3, 1.0, 1234);
  const TrajectoryRecord a = simulate_truth(sys, exp, 7), b = simulate_truth(sys, exp, 7);
  CHECK(a.dy == b.dy);
  CHECK(a.dy != simulate_truth(sys, exp, 8).dy);
}

TEST_CASE("filter estimates are traces against the path states", "[trajectory]") {
  const SystemSpec sys = system(ops::pauli_x(), 0.5 * ops::pauli_z(), ops::pure_state(kPlus));
  const ExperimentSpec exp =
      experiment(1e-2, 1.0, 21, {{"one", ops::identity(2)}, {"sx", ops::pauli_x()}, {"sz", ops::pauli_z()}});
  const TrajectoryRecord rec = simulate_truth(sys, exp, 0);
  const FilterPath path = filter_trajectory(rec, sys, exp);
  REQUIRE(path.rho.size() == rec.n_steps() + 1);
  for (std::size_t k = 0; k < path.rho.size(); ++k) {
    CHECK(std::abs(path.estimates[0][k] - 1.0) <= 1e-12);
    for (std::size_t j = 1; j < 3; ++j) {
      CHECK(std::abs(path.estimates[j][k] - expect(path.rho[k], exp.observables[j].op)) <= 1e-12);
    }
  }
}

TEST_CASE("filter rejects records off the experiment grid", "[trajectory]") {
  const SystemSpec sys = system(Operator::Zero(2, 2), ops::pauli_z(), ops::pure_state(kPlus));
  const ExperimentSpec exp = experiment(1e-2, 1.0, 1);
  TrajectoryRecord rec = simulate_truth(sys, exp, 0);
  rec.dy.pop_back();
  CHECK_THROWS_AS(filter_trajectory(rec, sys, exp), ValidationError);
}

TEST_CASE("measurement localizes the state onto sigma_z eigenstates", "[trajectory]") {
  const double kappa = 1.0;
  const SystemSpec sys = system(Operator::Zero(2, 2), std::sqrt(kappa) * ops::pauli_z(), ops::pure_state(kPlus));
  const ExperimentSpec exp = experiment(1e-3, 8.0 / kappa, 314, {{"sz", ops::pauli_z()}});
  int localized = 0;
  const int n_traj = 200;
  for (int s = 0; s < n_traj; ++s) {
    const FilterPath path = filter_trajectory(simulate_truth(sys, exp, static_cast<std::uint64_t>(s)), sys, exp);
    if (std::abs(path.estimates[0].back().real()) > 0.9) ++localized;
  }
  CHECK(localized >= n_traj * 8 / 10);
}

TEST_CASE("filtered mean of L + L^dag is a martingale under QND", "[trajectory][property]") {
  const SystemSpec sys = system(0.4 * ops::pauli_z(), ops::pauli_z(), ops::pure_state(kPlus));
  REQUIRE(qnd_check(sys));
  const ExperimentSpec exp = experiment(1e-2, 2.0, 77, {{"m", sys.measured()}});
  const int n_traj = 500;
  const std::vector<std::size_t> checkpoints{50, 100, 200};
  std::vector<double> sum(checkpoints.size()), sum2(checkpoints.size());
  for (int s = 0; s < n_traj; ++s) {
    const FilterPath path = filter_trajectory(simulate_truth(sys, exp, static_cast<std::uint64_t>(s)), sys, exp);
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      const double v = path.estimates[0][checkpoints[c]].real();
      sum[c] += v;
      sum2[c] += v * v;
    }
  }
  const double initial = expect(sys.rho0, sys.measured()).real();
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const double mean = sum[c] / n_traj;
    const double sd = std::sqrt(std::max(sum2[c] / n_traj - mean * mean, 0.0));
    INFO("checkpoint " << checkpoints[c] << " mean " << mean << " sd " << sd);
    CHECK(std::abs(mean - initial) <= 3.0 * sd / std::sqrt(static_cast<double>(n_traj)));
  }
}

TEST_CASE("weak error against the oracle vanishes at order >= 1", "[trajectory][property]") {
  // Exact average over all binary records with the oracle's probabilities, so
  // there is no sampling error: sum_y p(y) (pi_sde - pi_oracle)(X).
  const SystemSpec sys = system(ops::pauli_x(), 0.5 * ops::pauli_z(), ops::pure_state(kPlus));
  const std::vector<NamedObservable> obs{{"sx", ops::pauli_x()}};
  const std::size_t n = 8;
  std::vector<double> dts{0.04, 0.02, 0.01}, errors;
  for (double dt : dts) {
    const DiscreteModel model = build_model(sys, n, dt);
    const BranchTable table = enumerate_records(model, obs, n);
    complex_t weak = 0.0;
    for (const BranchRecord& rec : table.records) {
      if (!rec.included) continue;
      TrajectoryRecord record;
      record.dt = dt;
      for (int y : rec.y) record.dy.push_back(y * std::sqrt(dt));
      const FilterPath path = filter_trajectory(record, sys, sys.rho0, obs);
      weak += rec.p * (path.estimates[0][n] - expect(*rec.filter_state, obs[0].op));
    }
    errors.push_back(std::abs(weak));
  }
  INFO("weak errors " << errors[0] << " " << errors[1] << " " << errors[2]);
  CHECK(errors[1] < errors[0]);
  CHECK(errors[2] < errors[1]);
  const auto order = fitted_order(dts, errors);
  REQUIRE(order.has_value());
  CHECK(*order >= 1.0);
}
