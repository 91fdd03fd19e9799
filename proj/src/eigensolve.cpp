#include "nvspin/eigensolve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "nvspin/errors.hpp"

namespace nvspin {
namespace {

double off_diagonal_norm(const Eigen::MatrixXd& a) {
  double sum = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      if (r != c) sum += a(r, c) * a(r, c);
    }
  }
  return std::sqrt(sum);
}

// Annihilates a(p, q) with a plane rotation applied from both sides and
// accumulates it into v.
void rotate(Eigen::MatrixXd& a, Eigen::MatrixXd& v, Eigen::Index p, Eigen::Index q) {
  const double apq = a(p, q);
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  if (theta < 0.0) t = -t;
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const double tau = s / (1.0 + c);

  a(p, p) -= t * apq;
  a(q, q) += t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  const Eigen::Index n = a.rows();
  for (Eigen::Index r = 0; r < n; ++r) {
    if (r == p || r == q) continue;
    const double arp = a(r, p);
    const double arq = a(r, q);
    const double new_rp = arp - s * (arq + tau * arp);
    const double new_rq = arq + s * (arp - tau * arq);
    a(r, p) = a(p, r) = new_rp;
    a(r, q) = a(q, r) = new_rq;
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    const double vrp = v(r, p);
    const double vrq = v(r, q);
    v(r, p) = vrp - s * (vrq + tau * vrp);
    v(r, q) = vrq + s * (vrp - tau * vrq);
  }
}

}  // namespace

EigenSystem eigh(const Eigen::MatrixXd& m, const JacobiOptions& opts) {
  if (m.rows() != m.cols()) throw ConfigError("eigh: matrix must be square");
  const Eigen::Index n = m.rows();
  if (n == 0) return {};
  if (!m.allFinite()) throw ConfigError("eigh: matrix has non-finite entries");

  const double scale = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ConfigError("eigh: matrix is not symmetric");
  }

  Eigen::MatrixXd a = 0.5 * (m + m.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double target = opts.relative_tolerance * a.norm();

  int sweep = 0;
  while (off_diagonal_norm(a) > target) {
    if (sweep == opts.max_sweeps) {
      throw ConvergenceError("eigh: no convergence after " + std::to_string(sweep) + " sweeps");
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Once the entry no longer changes either diagonal it is dropped.
        const double g = 100.0 * std::abs(apq);
        if (sweep > 3 && std::abs(a(p, p)) + g == std::abs(a(p, p)) &&
            std::abs(a(q, q)) + g == std::abs(a(q, q))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        rotate(a, v, p, q);
      }
    }
    ++sweep;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });

  EigenSystem out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    Eigen::VectorXd col = v.col(src);
    Eigen::Index big = 0;
    for (Eigen::Index r = 1; r < n; ++r) {
      if (std::abs(col(r)) > std::abs(col(big))) big = r;
    }
    if (col(big) < 0.0) col = -col;
    out.vectors.col(k) = col;
  }
  return out;
}

}  // namespace nvspin
