// SPDX-License-Identifier: Apache-2.0
// Independent reference computations used to derive frozen test values.
// Nothing here calls into the library.
#pragma once

#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

using lcplx = std::complex<long double>;

inline lcplx li() { return {0.0L, 1.0L}; }

// psi = (1 + |x|)^alpha, phi = psi^2.
inline long double psi(long double alpha, long double x) { return std::pow(1.0L + std::fabs(x), alpha); }
inline long double phi(long double alpha, long double x) { return std::pow(1.0L + std::fabs(x), 2.0L * alpha); }

// Scalar system a0, F: A = a0 + i phi F.
inline lcplx scalar_A(long double a0, long double alpha, long double F) { return a0 + li() * phi(alpha, a0) * F; }

// delta(z) = (a0 - z + i phi F) / (a0 + i kappa phi - z + i phi F).
inline lcplx scalar_delta(long double a0, long double alpha, long double F, long double kappa, lcplx z) {
  const long double p = phi(alpha, a0);
  return (a0 - z + li() * p * F) / (a0 + li() * kappa * p - z + li() * p * F);
}

// 1 + kappa C (A - z)^{-1} B with B = psi, C = i psi.
inline lcplx scalar_delta_inverse(long double a0, long double alpha, long double F, long double kappa, lcplx z) {
  return 1.0L + kappa * li() * phi(alpha, a0) / (scalar_A(a0, alpha, F) - z);
}

// C (z - A)^{-1} x.
inline lcplx scalar_obs(long double a0, long double alpha, long double F, lcplx z, lcplx x) {
  return li() * psi(alpha, a0) * x / (z - scalar_A(a0, alpha, F));
}

// 1 + C (a0 - z)^{-1} B F.
inline lcplx scalar_H(long double a0, long double alpha, long double F, lcplx z) {
  return 1.0L + li() * phi(alpha, a0) * F / (a0 - z);
}

// Root of 2 t^2 - 2 t - 1 = 0 (threshold for mu = 1, r' = 1/2, phi = 1 + t).
inline long double threshold_mu1_half() { return (1.0L + std::sqrt(3.0L)) / 2.0L; }

// Plain bisection for t mu phi / sqrt(t^2 + mu^2 phi^2) = r' phi with phi = (1+t)^{2 alpha}.
inline long double threshold(long double mu, long double r, long double alpha) {
  auto g = [&](long double t) {
    const long double p = phi(alpha, t);
    return t * mu - r * std::sqrt(t * t + mu * mu * p * p);
  };
  long double lo = 0.0L;
  long double hi = 1.0L;
  while (g(hi) < 0.0L) hi *= 2.0L;
  for (int i = 0; i < 200; ++i) {
    const long double m = 0.5L * (lo + hi);
    (g(m) < 0.0L ? lo : hi) = m;
  }
  return 0.5L * (lo + hi);
}

// kappa0 = ell + mu1 (2 + a + phi(a)), a = 1 + ell phi(1).
template <class Phi>
long double kappa0(long double ell, long double mu1, Phi ph) {
  const long double a = 1.0L + ell * ph(1.0L);
  return ell + mu1 * (2.0L + a + ph(a));
}

// Brute-force minimum of (|t + i kappa phi(t) - z| - ell phi(t)) / phi(t) over
// z on the boundary curve x + i mu1 phi(|x|), both signs of the imaginary part.
inline long double separation_min(long double kappa, long double mu1, long double ell, long double alpha,
                                  long double extent, int nt, int nx) {
  long double best = 1e300L;
  for (int i = 0; i < nt; ++i) {
    const long double t = extent * std::pow(static_cast<long double>(i) / (nt - 1), 3.0L);
    const long double pt = phi(alpha, t);
    const lcplx c(t, kappa * pt);
    for (int k = 0; k < nx; ++k) {
      const long double s = -1.0L + 2.0L * k / (nx - 1);
      const long double x = extent * s * s * s;
      for (int sg = -1; sg <= 1; sg += 2) {
        const lcplx z(x, sg * mu1 * phi(alpha, x));
        best = std::min(best, (std::abs(c - z) - ell * pt) / pt);
      }
    }
  }
  return best;
}

// (1/2 pi) of the circle integral of |1/(z - a)|^2 |dz| for radius R about a.
inline long double circle_e2_sq(long double R) { return 1.0L / R; }

// Residue value of (1/2 pi i) int dz / ((z - conj(m)) (z - l)) with only conj(m) enclosed.
inline lcplx pairing_residue(lcplx l, lcplx m) { return 1.0L / (std::conj(m) - l); }

}  // namespace oracle
