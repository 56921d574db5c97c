#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace hawkesq {

struct GmresResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Unrestarted GMRES for a matrix-free operator `apply(x, y)` computing y = A x.
/// `x` holds the initial guess on entry and the solution on exit.
template <class Apply>
GmresResult gmres(Apply&& apply, const Eigen::VectorXd& b, Eigen::VectorXd& x, double tol = 1e-13,
                  int max_iter = 300) {
  const Eigen::Index n = b.size();
  if (x.size() != n) x = Eigen::VectorXd::Zero(n);
  const double bnorm = b.norm();
  GmresResult out;
  if (bnorm == 0.0) {
    x.setZero();
    out.converged = true;
    return out;
  }
  Eigen::VectorXd ax(n);
  apply(x, ax);
  Eigen::VectorXd r = b - ax;
  double beta = r.norm();
  out.relative_residual = beta / bnorm;
  if (out.relative_residual <= tol) {
    out.converged = true;
    return out;
  }

  std::vector<Eigen::VectorXd> basis;
  basis.push_back(r / beta);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(max_iter + 1, max_iter);
  Eigen::VectorXd cs = Eigen::VectorXd::Zero(max_iter), sn = Eigen::VectorXd::Zero(max_iter);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(max_iter + 1);
  g(0) = beta;
  Eigen::VectorXd w(n);
  int k = 0;
  for (; k < max_iter; ++k) {
    apply(basis[k], w);
    for (int i = 0; i <= k; ++i) {
      hess(i, k) = basis[i].dot(w);
      w -= hess(i, k) * basis[i];
    }
    hess(k + 1, k) = w.norm();
    for (int i = 0; i < k; ++i) {
      const double tmp = cs(i) * hess(i, k) + sn(i) * hess(i + 1, k);
      hess(i + 1, k) = -sn(i) * hess(i, k) + cs(i) * hess(i + 1, k);
      hess(i, k) = tmp;
    }
    const double denom = std::hypot(hess(k, k), hess(k + 1, k));
    cs(k) = hess(k, k) / denom;
    sn(k) = hess(k + 1, k) / denom;
    hess(k, k) = denom;
    hess(k + 1, k) = 0.0;
    g(k + 1) = -sn(k) * g(k);
    g(k) = cs(k) * g(k);
    out.relative_residual = std::abs(g(k + 1)) / bnorm;
    const bool breakdown = w.norm() <= 1e-300;
    if (out.relative_residual <= tol || breakdown || k + 1 == max_iter) {
      ++k;
      break;
    }
    basis.push_back(w / w.norm());
  }
  const Eigen::VectorXd y =
      hess.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
  for (int i = 0; i < k; ++i) x += y(i) * basis[i];
  out.iterations = k;
  out.converged = out.relative_residual <= tol;
  return out;
}

}  // namespace hawkesq
