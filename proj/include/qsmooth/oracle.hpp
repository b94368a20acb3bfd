#pragma once

// Exact reference for the filter and the least-mean-square estimates.
//
// The continuous system-probe coupling is replaced by a chain of probe qubits,
// each prepared in |g>, coupled to the system for one step dt by
//
//   U = exp(-i (H (x) 1) dt + sqrt(dt) (L (x) s+ - L^dag (x) s-)),
//
// and read out in the s_x basis (outcomes +1/-1). For a record y of length r
// the record projection is the Heisenberg-picture operator
// P_y = U_{1..r}^dag (1 (x) |y><y|) U_{1..r}, the estimand is
// X_tau = U_{1..m}^dag (X (x) 1) U_{1..m}, and the estimates follow from the
// orthogonality conditions restricted to Z = P_y:
//
//   q+(y) = Tr[rho (P_y X_tau + X_tau P_y)] / (2 p(y))
//   q-(y) = Tr[rho (P_y X_tau - X_tau P_y)] / (2 p(y)),   p(y) = Tr[rho P_y].
//
// The joint state rho_S (x) |g..g><g..g| has rank <= dim, so every trace is
// evaluated on joint state vectors; no joint-space matrix is materialized.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "qsmooth/model.hpp"

namespace qsmooth {

inline constexpr std::size_t kDefaultJointCap = 4096;
inline constexpr double kDefaultPFloor = 1e-12;

/// Cap on dim * 2^n_steps: QSMOOTH_MAX_JOINT_DIM if set and valid, else 4096.
std::size_t default_joint_cap();

struct DiscreteModel {
  SystemSpec sys;
  std::size_t n_steps = 0;
  double dt = 0.0;
  Operator step_unitary;  // on system (x) probe, probe basis {|g>, |e>}
  Operator kraus_plus;    // <+|U|g>
  Operator kraus_minus;   // <-|U|g>

  std::size_t joint_dim() const;
  const Operator& kraus(int outcome) const { return outcome > 0 ? kraus_plus : kraus_minus; }
};

/// Anti-Hermitian generator of one interaction step.
Operator step_generator(const SystemSpec& sys, double dt);

DiscreteModel build_model(const SystemSpec& sys, std::size_t n_steps, double dt,
                          std::size_t joint_cap = default_joint_cap());

/// Record y in {-1,+1}^r encoded as bits, y_1 most significant, bit 0 <-> +1.
std::vector<int> decode_record(std::size_t index, std::size_t length);

struct BranchRecord {
  std::vector<int> y;
  double p = 0.0;
  bool included = false;  // p >= p_floor
  std::optional<DensityOperator> filter_state;  // sequential Kraus update, if included
  std::vector<complex_t> q_plus;   // per observable
  std::vector<complex_t> q_minus;  // per observable
};

/// Traces of the estimand against the record projections:
/// a[y] = Tr(rho P_y X_tau), b[y] = Tr(rho X_tau P_y).
struct EstimandMoments {
  complex_t mean;         // Tr(rho X_tau)
  complex_t second_xdx;   // Tr(rho X_tau^dag X_tau)
  complex_t second_xxd;   // Tr(rho X_tau X_tau^dag)
  std::vector<complex_t> a;
  std::vector<complex_t> b;
};

struct BranchTable {
  std::size_t estimand_step = 0;
  std::size_t record_length = 0;
  double p_floor = kDefaultPFloor;
  std::vector<std::string> names;
  std::vector<BranchRecord> records;  // all 2^record_length records, index order
  std::vector<EstimandMoments> moments;  // per observable

  double total_probability() const;
};

/// Joint-picture quantities for one (model, record length) pair.
class JointEvaluator {
 public:
  JointEvaluator(const DiscreteModel& model, std::size_t record_length);

  std::size_t record_length() const noexcept { return record_length_; }
  const std::vector<double>& probabilities() const noexcept { return p_; }

  EstimandMoments moments(const Operator& x, std::size_t estimand_step) const;

  /// Tr_probes[Pi_y U rho U^dag Pi_y] / p(y), the projection-based conditional state.
  Operator conditional_state(std::size_t record_index) const;

 private:
  StateVector apply_heisenberg(const StateVector& v, const Operator& x, std::size_t estimand_step) const;
  StateVector to_record_frame(StateVector v) const;

  DiscreteModel model_;
  std::size_t record_length_;
  std::vector<double> weights_;        // eigenvalues of rho_S
  std::vector<StateVector> initial_;   // s_i (x) |g...g>
  std::vector<StateVector> evolved_;   // record-frame amplitudes of U_{1..r} s_i (x) |g..g>
  std::vector<double> p_;
};

BranchTable enumerate_records(const DiscreteModel& model, const std::vector<NamedObservable>& observables,
                              std::size_t estimand_step, std::optional<std::size_t> record_length = {},
                              double p_floor = kDefaultPFloor);

/// rho_y = K_y rho K_y^dag / Tr(.) with K_y = K_{y_r} ... K_{y_1}; also returns p(y).
struct KrausBranch {
  Operator rho;
  double p = 0.0;
};
KrausBranch kraus_update(const DiscreteModel& model, const Operator& rho, const std::vector<int>& y);

/// Unconditional channel rho -> sum_k K_k rho K_k^dag applied `steps` times.
Operator propagate(const DiscreteModel& model, const Operator& rho, std::size_t steps);

struct OrthogonalityResidual {
  double symmetric = 0.0;
  double skew = 0.0;
  double max() const { return symmetric > skew ? symmetric : skew; }
};

/// Re-evaluates the record traces for X from the model and returns the worst
/// violation of the symmetric and skew orthogonality conditions by the table's
/// estimates for `observable`, over all records with p >= p_floor.
OrthogonalityResidual verify_orthogonality(const BranchTable& table, const DiscreteModel& model,
                                           const Operator& x, std::size_t estimand_step,
                                           std::size_t observable = 0);

/// Mean-square errors of an arbitrary element Q = sum_y c_y P_y of the record
/// algebra, from the table's moments.
double plain_mse(const BranchTable& table, std::size_t observable, const std::vector<complex_t>& coeffs);
double symmetric_mse(const BranchTable& table, std::size_t observable, const std::vector<complex_t>& coeffs);

std::vector<complex_t> plus_coefficients(const BranchTable& table, std::size_t observable);
std::vector<complex_t> combined_coefficients(const BranchTable& table, std::size_t observable);

struct MseSummary {
  double combined = 0.0;   // <X - Q, X - Q>_rho,  Q = Q+ + Q-
  double plus = 0.0;       // <X - Q+, X - Q+>_rho
  double symmetric = 0.0;  // <<X - Q+, X - Q+>>_rho
};

MseSummary table_mse(const BranchTable& table, std::size_t observable);

struct MseComparison {
  MseSummary shorter;
  MseSummary longer;
};

/// MSEs for two record lengths n1 <= n2 of the same model. Throws
/// NumericalError if the longer record does worse by more than 1e-12.
MseComparison oracle_mse(const BranchTable& shorter, const BranchTable& longer, std::size_t observable);

struct MseByLength {
  std::size_t record_length = 0;
  std::vector<MseSummary> per_observable;
};

std::vector<MseByLength> mse_by_length(const DiscreteModel& model, const std::vector<NamedObservable>& observables,
                                       std::size_t estimand_step, double p_floor = kDefaultPFloor);

}  // namespace qsmooth
