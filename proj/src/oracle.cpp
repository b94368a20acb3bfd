#include "qsmooth/oracle.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

namespace qsmooth {

namespace {

constexpr double kUnitarityTol = 1e-12;
constexpr double kMonotoneTol = 1e-12;

// Probe basis {|g>, |e>}; s+ = |e><g|.
Operator probe_raise() {
  Operator m = Operator::Zero(2, 2);
  m(1, 0) = 1.0;
  return m;
}

std::size_t pow2(std::size_t n) { return std::size_t{1} << n; }

// Applies a (2d x 2d) operator acting on system (x) probe `k` (1-based) to a
// joint vector laid out as index = s * 2^N + probe bits, probe 1 most significant.
void apply_local(StateVector& v, const Operator& u, std::size_t k, std::size_t n_probes, Eigen::Index dim) {
  const std::size_t block = pow2(n_probes);
  const std::size_t bit = std::size_t{1} << (n_probes - k);
  StateVector gathered(2 * dim);
  for (std::size_t bits = 0; bits < block; ++bits) {
    if (bits & bit) continue;
    for (Eigen::Index s = 0; s < dim; ++s) {
      const auto base = static_cast<Eigen::Index>(static_cast<std::size_t>(s) * block + bits);
      gathered(2 * s) = v(base);
      gathered(2 * s + 1) = v(base + static_cast<Eigen::Index>(bit));
    }
    const StateVector out = u * gathered;
    for (Eigen::Index s = 0; s < dim; ++s) {
      const auto base = static_cast<Eigen::Index>(static_cast<std::size_t>(s) * block + bits);
      v(base) = out(2 * s);
      v(base + static_cast<Eigen::Index>(bit)) = out(2 * s + 1);
    }
  }
}

void apply_system(StateVector& v, const Operator& x, std::size_t n_probes, Eigen::Index dim) {
  const std::size_t block = pow2(n_probes);
  StateVector gathered(dim);
  for (std::size_t bits = 0; bits < block; ++bits) {
    for (Eigen::Index s = 0; s < dim; ++s) {
      gathered(s) = v(static_cast<Eigen::Index>(static_cast<std::size_t>(s) * block + bits));
    }
    const StateVector out = x * gathered;
    for (Eigen::Index s = 0; s < dim; ++s) {
      v(static_cast<Eigen::Index>(static_cast<std::size_t>(s) * block + bits)) = out(s);
    }
  }
}

// Sums f(index) over the joint indices whose first r probes read `record`.
template <typename F>
void for_record_block(std::size_t record, std::size_t r, std::size_t n_probes, Eigen::Index dim, F&& f) {
  const std::size_t block = pow2(n_probes);
  const std::size_t rest = pow2(n_probes - r);
  const std::size_t offset = record << (n_probes - r);
  for (Eigen::Index s = 0; s < dim; ++s) {
    const std::size_t base = static_cast<std::size_t>(s) * block + offset;
    for (std::size_t j = 0; j < rest; ++j) f(s, static_cast<Eigen::Index>(base + j));
  }
}

}  // namespace

std::size_t default_joint_cap() {
  if (const char* env = std::getenv("QSMOOTH_MAX_JOINT_DIM")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return kDefaultJointCap;
}

std::size_t DiscreteModel::joint_dim() const { return static_cast<std::size_t>(sys.dim) * pow2(n_steps); }

Operator step_generator(const SystemSpec& sys, double dt) {
  const complex_t i{0.0, 1.0};
  const Operator raise = probe_raise();
  const Operator lower = raise.adjoint();
  return -i * dt * tensor(sys.H, ops::identity(2)) +
         std::sqrt(dt) * (tensor(sys.L, raise) - tensor(sys.L.adjoint(), lower));
}

DiscreteModel build_model(const SystemSpec& sys, std::size_t n_steps, double dt, std::size_t joint_cap) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive", "oracle.dt");
  if (n_steps == 0) throw ValidationError("n_steps must be positive", "oracle.n_steps");
  if (n_steps >= 8 * sizeof(std::size_t) - 8 ||
      static_cast<std::size_t>(sys.dim) > joint_cap / pow2(n_steps) ||
      static_cast<std::size_t>(sys.dim) * pow2(n_steps) > joint_cap) {
    throw CapExceeded(fmt::format("joint dimension {} * 2^{} exceeds the cap {}", sys.dim, n_steps, joint_cap));
  }
  DiscreteModel model{sys, n_steps, dt, {}, {}, {}};
  const Operator gen = step_generator(sys, dt);
  model.step_unitary = gen.exp();
  const Operator id = ops::identity(model.step_unitary.rows());
  const double unitarity = max_abs(model.step_unitary.adjoint() * model.step_unitary - id);
  if (unitarity > kUnitarityTol) {
    throw NumericalError(fmt::format("step unitary deviates from unitarity by {:.3g}", unitarity));
  }
  // <+-|U|g> = (<g|U|g> +- <e|U|g>) / sqrt(2); rows/cols of U indexed 2 s + b.
  const Eigen::Index d = sys.dim;
  Operator gg(d, d), eg(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      gg(r, c) = model.step_unitary(2 * r, 2 * c);
      eg(r, c) = model.step_unitary(2 * r + 1, 2 * c);
    }
  }
  model.kraus_plus = (gg + eg) / std::sqrt(2.0);
  model.kraus_minus = (gg - eg) / std::sqrt(2.0);
  return model;
}

std::vector<int> decode_record(std::size_t index, std::size_t length) {
  std::vector<int> y(length);
  for (std::size_t k = 0; k < length; ++k) {
    const bool minus = (index >> (length - 1 - k)) & 1u;
    y[k] = minus ? -1 : +1;
  }
  return y;
}

double BranchTable::total_probability() const {
  double total = 0.0;
  for (const auto& r : records) total += r.p;
  return total;
}

JointEvaluator::JointEvaluator(const DiscreteModel& model, std::size_t record_length)
    : model_(model), record_length_(record_length) {
  if (record_length > model.n_steps) {
    throw ValidationError(fmt::format("record length {} exceeds model steps {}", record_length, model.n_steps),
                          "oracle.record_length");
  }
  const Eigen::Index d = model.sys.dim;
  const auto joint = static_cast<Eigen::Index>(model.joint_dim());
  const std::size_t block = pow2(model.n_steps);

  Eigen::SelfAdjointEigenSolver<Operator> es(hermitian_part(model.sys.rho0.op()));
  for (Eigen::Index i = 0; i < d; ++i) {
    const double w = es.eigenvalues()(i);
    if (std::abs(w) < 1e-15) continue;
    StateVector v = StateVector::Zero(joint);
    for (Eigen::Index s = 0; s < d; ++s) {
      v(static_cast<Eigen::Index>(static_cast<std::size_t>(s) * block)) = es.eigenvectors()(s, i);
    }
    weights_.push_back(w);
    initial_.push_back(v);
    StateVector e = v;
    for (std::size_t k = 1; k <= record_length_; ++k) apply_local(e, model_.step_unitary, k, model_.n_steps, d);
    evolved_.push_back(to_record_frame(std::move(e)));
  }

  p_.assign(pow2(record_length_), 0.0);
  for (std::size_t y = 0; y < p_.size(); ++y) {
    double p = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      double norm2 = 0.0;
      for_record_block(y, record_length_, model_.n_steps, d,
                       [&](Eigen::Index, Eigen::Index idx) { norm2 += std::norm(evolved_[i](idx)); });
      p += weights_[i] * norm2;
    }
    p_[y] = p;
  }
}

StateVector JointEvaluator::to_record_frame(StateVector v) const {
  // s_x readout: amplitude of outcome +1 (bit 0) is (a_g + a_e)/sqrt2, of -1 is (a_g - a_e)/sqrt2.
  Operator hadamard(2, 2);
  hadamard << 1.0, 1.0, 1.0, -1.0;
  hadamard /= std::sqrt(2.0);
  const Operator local = tensor(ops::identity(model_.sys.dim), hadamard);
  for (std::size_t k = 1; k <= record_length_; ++k) apply_local(v, local, k, model_.n_steps, model_.sys.dim);
  return v;
}

StateVector JointEvaluator::apply_heisenberg(const StateVector& v, const Operator& x,
                                             std::size_t estimand_step) const {
  const Eigen::Index d = model_.sys.dim;
  StateVector out = v;
  for (std::size_t k = 1; k <= estimand_step; ++k) apply_local(out, model_.step_unitary, k, model_.n_steps, d);
  apply_system(out, x, model_.n_steps, d);
  const Operator u_dag = model_.step_unitary.adjoint();
  for (std::size_t k = estimand_step; k >= 1; --k) apply_local(out, u_dag, k, model_.n_steps, d);
  return out;
}

EstimandMoments JointEvaluator::moments(const Operator& x, std::size_t estimand_step) const {
  const Eigen::Index d = model_.sys.dim;
  if (!is_square(x) || x.rows() != d) throw DimensionError("estimand must act on the system space");
  if (estimand_step > model_.n_steps) {
    throw ValidationError(fmt::format("estimand step {} exceeds model steps {}", estimand_step, model_.n_steps),
                          "oracle.estimand_step");
  }
  const Operator xd = x.adjoint();
  EstimandMoments m;
  m.mean = m.second_xdx = m.second_xxd = 0.0;
  m.a.assign(p_.size(), 0.0);
  m.b.assign(p_.size(), 0.0);

  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const StateVector xv = apply_heisenberg(initial_[i], x, estimand_step);
    const StateVector xdv = apply_heisenberg(initial_[i], xd, estimand_step);
    m.mean += weights_[i] * initial_[i].dot(xv);
    m.second_xdx += weights_[i] * xv.squaredNorm();
    m.second_xxd += weights_[i] * xdv.squaredNorm();

    StateVector chi = xv, chi_d = xdv;
    for (std::size_t k = 1; k <= record_length_; ++k) {
      apply_local(chi, model_.step_unitary, k, model_.n_steps, d);
      apply_local(chi_d, model_.step_unitary, k, model_.n_steps, d);
    }
    chi = to_record_frame(std::move(chi));
    chi_d = to_record_frame(std::move(chi_d));

    for (std::size_t y = 0; y < p_.size(); ++y) {
      complex_t a = 0.0, bd = 0.0;
      for_record_block(y, record_length_, model_.n_steps, d, [&](Eigen::Index, Eigen::Index idx) {
        a += std::conj(evolved_[i](idx)) * chi(idx);
        bd += std::conj(evolved_[i](idx)) * chi_d(idx);
      });
      m.a[y] += weights_[i] * a;
      // Tr(rho X P_y) = conj(Tr(rho P_y X^dag)).
      m.b[y] += weights_[i] * std::conj(bd);
    }
  }
  return m;
}

Operator JointEvaluator::conditional_state(std::size_t record_index) const {
  const Eigen::Index d = model_.sys.dim;
  const std::size_t block = pow2(model_.n_steps);
  const std::size_t rest = pow2(model_.n_steps - record_length_);
  const std::size_t offset = record_index << (model_.n_steps - record_length_);
  Operator rho = Operator::Zero(d, d);
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    for (std::size_t j = 0; j < rest; ++j) {
      StateVector phi(d);
      for (Eigen::Index s = 0; s < d; ++s) {
        phi(s) = evolved_[i](static_cast<Eigen::Index>(static_cast<std::size_t>(s) * block + offset + j));
      }
      rho += weights_[i] * phi * phi.adjoint();
    }
  }
  return rho / p_.at(record_index);
}

KrausBranch kraus_update(const DiscreteModel& model, const Operator& rho, const std::vector<int>& y) {
  Operator state = rho;
  for (int outcome : y) {
    const Operator& k = model.kraus(outcome);
    state = k * state * k.adjoint();
  }
  const double p = state.trace().real();
  return {p > 0.0 ? Operator(state / p) : state, p};
}

Operator propagate(const DiscreteModel& model, const Operator& rho, std::size_t steps) {
  Operator state = rho;
  for (std::size_t k = 0; k < steps; ++k) {
    state = model.kraus_plus * state * model.kraus_plus.adjoint() +
            model.kraus_minus * state * model.kraus_minus.adjoint();
  }
  return state;
}

BranchTable enumerate_records(const DiscreteModel& model, const std::vector<NamedObservable>& observables,
                              std::size_t estimand_step, std::optional<std::size_t> record_length,
                              double p_floor) {
  const std::size_t r = record_length.value_or(model.n_steps);
  if (estimand_step > model.n_steps) {
    throw ValidationError(fmt::format("estimand step {} exceeds model steps {}", estimand_step, model.n_steps),
                          "oracle.estimand_step");
  }
  JointEvaluator joint(model, r);

  BranchTable table;
  table.estimand_step = estimand_step;
  table.record_length = r;
  table.p_floor = p_floor;
  for (const auto& obs : observables) {
    table.names.push_back(obs.name);
    table.moments.push_back(joint.moments(obs.op, estimand_step));
  }

  const auto& p = joint.probabilities();
  table.records.resize(p.size());
  bool any = false;
  for (std::size_t y = 0; y < p.size(); ++y) {
    BranchRecord& rec = table.records[y];
    rec.y = decode_record(y, r);
    rec.p = p[y];
    rec.included = p[y] >= p_floor;
    rec.q_plus.assign(observables.size(), 0.0);
    rec.q_minus.assign(observables.size(), 0.0);
    if (!rec.included) continue;
    any = true;
    KrausBranch branch = kraus_update(model, model.sys.rho0.op(), rec.y);
    rec.filter_state = DensityOperator::project(branch.rho);
    for (std::size_t j = 0; j < observables.size(); ++j) {
      const complex_t a = table.moments[j].a[y];
      const complex_t b = table.moments[j].b[y];
      rec.q_plus[j] = (a + b) / (2.0 * p[y]);
      rec.q_minus[j] = (a - b) / (2.0 * p[y]);
    }
  }
  if (!any) throw ValidationError("every record has probability below p_floor", "oracle");
  return table;
}

OrthogonalityResidual verify_orthogonality(const BranchTable& table, const DiscreteModel& model,
                                           const Operator& x, std::size_t estimand_step, std::size_t observable) {
  if (estimand_step != table.estimand_step) {
    throw ValidationError("table was built for a different estimand step", "oracle.estimand_step");
  }
  if (observable >= table.names.size()) throw ValidationError("observable index out of range", "oracle");
  JointEvaluator joint(model, table.record_length);
  const EstimandMoments m = joint.moments(x, estimand_step);
  const auto& p = joint.probabilities();

  OrthogonalityResidual res;
  for (std::size_t y = 0; y < table.records.size(); ++y) {
    const BranchRecord& rec = table.records[y];
    if (p[y] < table.p_floor) continue;
    // Z = P_y: P_y Q = Q P_y = q(y) P_y since the record projections are orthogonal.
    const complex_t sym = 0.5 * (m.a[y] + m.b[y]) - rec.q_plus[observable] * p[y];
    const complex_t skew = (m.a[y] - m.b[y]) - 2.0 * rec.q_minus[observable] * p[y];
    res.symmetric = std::max(res.symmetric, std::abs(sym));
    res.skew = std::max(res.skew, std::abs(skew));
  }
  return res;
}

namespace {

void check_coeffs(const BranchTable& table, std::size_t observable, const std::vector<complex_t>& c) {
  if (observable >= table.moments.size()) throw ValidationError("observable index out of range", "oracle");
  if (c.size() != table.records.size()) throw DimensionError("coefficient vector size mismatch");
}

}  // namespace

double plain_mse(const BranchTable& table, std::size_t observable, const std::vector<complex_t>& c) {
  check_coeffs(table, observable, c);
  const EstimandMoments& m = table.moments[observable];
  // Tr rho (X - Q)^dag (X - Q) with Q = sum c_y P_y.
  complex_t total = m.second_xdx;
  for (std::size_t y = 0; y < c.size(); ++y) {
    total -= c[y] * std::conj(m.a[y]) + std::conj(c[y]) * m.a[y];
    total += std::norm(c[y]) * table.records[y].p;
  }
  return total.real();
}

double symmetric_mse(const BranchTable& table, std::size_t observable, const std::vector<complex_t>& c) {
  check_coeffs(table, observable, c);
  const EstimandMoments& m = table.moments[observable];
  // 1/2 Tr rho [(X - Q)^dag (X - Q) + (X - Q)(X - Q)^dag].
  complex_t total = 0.5 * (m.second_xdx + m.second_xxd);
  for (std::size_t y = 0; y < c.size(); ++y) {
    total -= 0.5 * (c[y] * std::conj(m.a[y]) + std::conj(c[y]) * m.a[y]);
    total -= 0.5 * (std::conj(c[y]) * m.b[y] + c[y] * std::conj(m.b[y]));
    total += std::norm(c[y]) * table.records[y].p;
  }
  return total.real();
}

std::vector<complex_t> plus_coefficients(const BranchTable& table, std::size_t observable) {
  std::vector<complex_t> c(table.records.size());
  for (std::size_t y = 0; y < c.size(); ++y) c[y] = table.records[y].q_plus.at(observable);
  return c;
}

std::vector<complex_t> combined_coefficients(const BranchTable& table, std::size_t observable) {
  std::vector<complex_t> c(table.records.size());
  for (std::size_t y = 0; y < c.size(); ++y) {
    c[y] = table.records[y].q_plus.at(observable) + table.records[y].q_minus.at(observable);
  }
  return c;
}

MseSummary table_mse(const BranchTable& table, std::size_t observable) {
  const auto plus = plus_coefficients(table, observable);
  return {plain_mse(table, observable, combined_coefficients(table, observable)), plain_mse(table, observable, plus),
          symmetric_mse(table, observable, plus)};
}

MseComparison oracle_mse(const BranchTable& shorter, const BranchTable& longer, std::size_t observable) {
  if (shorter.record_length > longer.record_length) {
    throw ValidationError("oracle_mse expects the shorter record first", "oracle");
  }
  if (shorter.estimand_step != longer.estimand_step) {
    throw ValidationError("tables were built for different estimand steps", "oracle");
  }
  MseComparison out{table_mse(shorter, observable), table_mse(longer, observable)};
  auto check = [](double s, double l, const char* what) {
    if (l > s + kMonotoneTol) {
      throw NumericalError(fmt::format("{} MSE increased with record length: {:.17g} -> {:.17g}", what, s, l));
    }
  };
  check(out.shorter.combined, out.longer.combined, "combined");
  check(out.shorter.plus, out.longer.plus, "symmetric-part");
  check(out.shorter.symmetric, out.longer.symmetric, "symmetric-norm");
  return out;
}

std::vector<MseByLength> mse_by_length(const DiscreteModel& model, const std::vector<NamedObservable>& observables,
                                       std::size_t estimand_step, double p_floor) {
  std::vector<MseByLength> rows;
  for (std::size_t r = 1; r <= model.n_steps; ++r) {
    const BranchTable table = enumerate_records(model, observables, estimand_step, r, p_floor);
    MseByLength row{r, {}};
    for (std::size_t j = 0; j < observables.size(); ++j) row.per_observable.push_back(table_mse(table, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace qsmooth
