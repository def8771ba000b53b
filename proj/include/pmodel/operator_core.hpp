// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "pmodel/common.hpp"

namespace pmodel {

// EvenOnR: psi is even and defined on the whole line.
// HalfLine: psi lives on [0, inf) and the spectrum sits in [eps0, inf).
enum class DomainCase { EvenOnR, HalfLine };

const char* to_string(DomainCase dc);
DomainCase domain_case_from_string(const std::string& s);

class WeightFamily {
 public:
  // psi(x) = (1 + |x|)^alpha with 0 < alpha <= 1/2.
  static WeightFamily power_affine(double alpha, DomainCase dc);

  // User weight. `dpsi` may be empty, a central difference is used then.
  // Call validate() to sample the weight laws at runtime.
  static WeightFamily custom(std::function<double(double)> psi, double k0, DomainCase dc,
                             std::function<double(double)> dpsi = {});

  bool is_power() const { return power_; }
  double alpha() const { return alpha_; }
  DomainCase domain_case() const { return dc_; }
  double k0() const { return k0_; }

  bool in_domain(double x) const;
  double psi(double x) const;
  double phi(double x) const;
  // Derivative of phi. At x = 0 the right derivative is returned.
  double dphi(double x) const;
  // Even continuation of phi to the whole line.
  double phi_star(double x) const { return phi_raw(std::abs(x)); }

  struct LawReport {
    bool ok = true;
    double worst_concavity = 0.0;    // most negative phi(mix) - mix(phi)
    double worst_subadditive = 0.0;  // most negative phi(s)+phi(t) - phi(s+t)
    double worst_subhomogeneous = 0.0;
    double min_psi = 0.0;
    bool monotone = true;
  };
  // Samples psi >= 1, monotonicity, concavity of phi, phi(s+t) <= phi(s)+phi(t)
  // and phi(st) <= s phi(t) on a grid of `grid` points in [0, xmax].
  LawReport validate(int grid = 1000, double xmax = 1.0e3, double tol = 1.0e-12) const;

 private:
  double phi_raw(double ax) const;
  double psi_raw(double ax) const;

  bool power_ = true;
  double alpha_ = 0.5;
  double k0_ = 1.0;
  DomainCase dc_ = DomainCase::HalfLine;
  std::function<double(double)> user_psi_;
  std::function<double(double)> user_dpsi_;
};

struct WeightInfo {
  double psi;
  double phi;
  double k0;
};

WeightInfo weight_info(const WeightFamily& w, double x);

struct SpectralDiagonal {
  RVec t;  // ascending
  DomainCase domain_case = DomainCase::HalfLine;
  double eps0 = 0.0;  // HalfLine lower bound, ignored for EvenOnR

  int n() const { return static_cast<int>(t.size()); }

  // Validates ordering and the HalfLine bound. eps0 <= 0 means min(t).
  static SpectralDiagonal make(const std::vector<double>& t, DomainCase dc, double eps0 = 0.0);
};

struct PerturbationSplit {
  Mat F;
  double ess_surrogate = 0.0;
  double r_prime = 0.0;
  Mat F_prime;
  Mat F_dprime;
  int rank_dprime = 0;
};

struct SystemTriple {
  SpectralDiagonal A0;
  WeightFamily weight = WeightFamily::power_affine(0.5, DomainCase::HalfLine);
  Mat F;
  Mat A;
  RVec psi_t;  // B = diag(psi_t), C = i B
  RVec phi_t;
  double kappa = 0.0;
  double ell = 0.0;
  double normF = 0.0;

  int n() const { return A0.n(); }
  Mat B() const;
  Mat C() const;
  Mat A0mat() const;
  // L = B F C, so that A = A0 + L.
  Mat L() const;
};

// Builds A = A0 + i psi(A0) F psi(A0). In finite dimension every domain
// of the weighted chain is the whole space, so no domain bookkeeping is kept.
SystemTriple build_system(const SpectralDiagonal& A0, const WeightFamily& w, const Mat& F,
                          double kappa, double ell);

enum class ResolventMode { Direct, Factored };

// Relative tolerance for the distance from z to the spectrum.
inline constexpr double kSpectralTol = 1.0e-8;

// (M - z)^{-1} by dense LU.
Mat resolvent(const Mat& M, cplx z);

// (A - z)^{-1}. Factored mode uses (A0 - z)^{-1} (I + L (A0 - z)^{-1})^{-1}.
Mat resolvent(const SystemTriple& s, cplx z, ResolventMode mode);

PerturbationSplit essential_split(const Mat& F, double r_prime, double ess_surrogate = 0.0);

enum class EtaTag { One, Psi, Phi, AbsPlusOne };

std::function<double(double)> eta_of(EtaTag tag, const WeightFamily& w);

// || eta(A0)^{-1} x ||.
double weighted_norm(const SpectralDiagonal& A0, const Vec& x, const std::function<double(double)>& eta);

}  // namespace pmodel
