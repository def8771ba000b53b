// SPDX-License-Identifier: Apache-2.0
#include "quadrature.hpp"

#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "pmodel/common.hpp"

namespace pmodel::detail {

namespace {

// Legendre P_n(x) and its derivative.
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0;
  double p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

GaussRule make_rule(int q) {
  GaussRule r;
  r.x.resize(static_cast<size_t>(q));
  r.w.resize(static_cast<size_t>(q));
  for (int i = 0; i < q; ++i) {
    double x = std::cos(PI * (i + 0.75) / (q + 0.5));
    double p = 0.0;
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      legendre(q, x, p, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1.0e-16) break;
    }
    legendre(q, x, p, dp);
    // ascending order
    r.x[static_cast<size_t>(q - 1 - i)] = x;
    r.w[static_cast<size_t>(q - 1 - i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  if (q == 1) {
    r.x[0] = 0.0;
    r.w[0] = 2.0;
  }
  r.wc.assign(static_cast<size_t>(q), 0.0);
  const int m = (q + 1) / 2;
  Eigen::MatrixXd V(m, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs(0) = 2.0;
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < m; ++k) {
      double p = 0.0;
      double dp = 0.0;
      legendre(k, r.x[static_cast<size_t>(2 * j)], p, dp);
      V(k, j) = p;
    }
  }
  const Eigen::VectorXd wc = V.colPivHouseholderQr().solve(rhs);
  for (int j = 0; j < m; ++j) r.wc[static_cast<size_t>(2 * j)] = wc(j);
  return r;
}

std::array<GaussRule, kMaxGaussOrder + 1> make_all() {
  std::array<GaussRule, kMaxGaussOrder + 1> all;
  for (int q = 1; q <= kMaxGaussOrder; ++q) all[static_cast<size_t>(q)] = make_rule(q);
  return all;
}

}  // namespace

const GaussRule& gauss_rule(int q) {
  static const std::array<GaussRule, kMaxGaussOrder + 1> all = make_all();
  if (q < 1 || q > kMaxGaussOrder) throw Error(ErrorKind::Quadrature, "unsupported Gauss order", q);
  return all[static_cast<size_t>(q)];
}

}  // namespace pmodel::detail
