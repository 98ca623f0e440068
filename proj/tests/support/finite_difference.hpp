#pragma once

// Central-difference oracles. Test-only; independent of the analytic paths.

#include <functional>

#include <Eigen/Dense>

namespace mott::testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h = 1e-5) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& x, double h = 1e-5) {
  const VectorXd f0 = f(x);
  MatrixXd j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

inline double relative_error(const MatrixXd& analytic, const MatrixXd& reference, double floor = 1e-8) {
  return (analytic - reference).norm() / std::max(reference.norm(), floor);
}

}  // namespace mott::testing
