#pragma once

// Test-only reference for the oracle: materializes every joint-space matrix
// (system (x) n probe qubits) and evaluates the record traces directly.
// Intended for n <= 4.

#include <cstddef>
#include <vector>

#include "qsmooth/model.hpp"

namespace qsmooth::testing {

struct DenseJoint {
  std::vector<double> p;          // Tr(rho P_y)
  std::vector<complex_t> a;       // Tr(rho P_y X_tau)
  std::vector<complex_t> b;       // Tr(rho X_tau P_y)
  std::vector<Operator> conditional;  // Tr_probes(Pi_y U rho U^dag Pi_y) / p
  complex_t mean;                 // Tr(rho X_tau)
};

/// Record length r <= n, estimand X at step m <= n.
DenseJoint dense_joint(const SystemSpec& sys, std::size_t n, double dt, std::size_t r, const Operator& x,
                       std::size_t m);

}  // namespace qsmooth::testing
