#pragma once

#include <Eigen/Dense>

namespace nvspin {

/// Eigenvalues in ascending order; column i of `vectors` pairs with value i.
struct EigenSystem {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

struct JacobiOptions {
  /// Stop once the off-diagonal Frobenius norm falls below this fraction of
  /// the input's Frobenius norm.
  double relative_tolerance = 1e-12;
  int max_sweeps = 100;
};

/// Cyclic Jacobi diagonalization of a small dense real symmetric matrix.
///
/// The result is deterministic: rotations run in fixed row-major (p < q)
/// order, ties in the eigenvalue sort keep the input order, and each
/// eigenvector is signed so that its largest-magnitude component is positive.
/// Throws ConfigError for non-square or asymmetric input and ConvergenceError
/// when the sweep cap is reached.
EigenSystem eigh(const Eigen::MatrixXd& m, const JacobiOptions& opts = {});

}  // namespace nvspin
