// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "pmodel/boundary_calculus.hpp"

namespace pmodel {

// ---------------------------------------------------------------------------
// Characteristic function

enum class Region { Certified, Any };

class CharFunEvaluator {
 public:
  CharFunEvaluator(const SystemTriple& sys, const ConstantsBundle& constants, double kappa);

  const SystemTriple& system() const { return sys_; }
  const ConstantsBundle& constants() const { return constants_; }
  double kappa() const { return kappa_; }
  const ParabolicDomain& domain() const { return domain_; }
  // Omega_int' = Omega_{mu - sigma, R - sigma}.
  const ParabolicDomain& shrunk_domain() const { return shrunk_; }
  // A_kappa = A0 + i kappa phi(A0).
  Mat A_kappa() const;

  // [A_kappa - z + i phi F]^{-1} [A0 - z + i phi F].
  Mat delta(cplx z) const;
  // I - i kappa [I + i phi (A_kappa - z)^{-1} F]^{-1} (A_kappa - z)^{-1} phi.
  // Throws ConstantViolation when the bracket inverse exceeds 1/(1 - ||F||/ell).
  Mat delta_alt(cplx z) const;
  // I + Phi(z). With Region::Certified, points of Omega_int' are refused.
  Mat delta_inverse(cplx z, Region region = Region::Certified) const;
  // kappa C (A - z)^{-1} B.
  Mat Phi(cplx z) const;

  std::vector<Mat> delta_samples(const Contour& c) const;

 private:
  SystemTriple sys_;
  ConstantsBundle constants_;
  double kappa_;
  ParabolicDomain domain_;
  ParabolicDomain shrunk_;
};

// I + C (A0 - z)^{-1} B F.
Mat H_eval(const SystemTriple& sys, cplx z);

// ---------------------------------------------------------------------------
// Observation transforms

// Columns C (z_j - A)^{-1} x for a generic pair (A, C).
Mat obs_samples(const Mat& A, const Mat& C, const Vec& x, const std::vector<cplx>& points);

// Batched: one factorization per point, every column of X solved at once.
// Result k holds the samples of C (z - A)^{-1} X.col(k).
std::vector<Mat> obs_samples_batch(const Mat& A, const Mat& C, const Mat& X, const std::vector<cplx>& points);

// O_{A,C} x on the given points.
GridFunction obs_transform(const SystemTriple& sys, const Vec& x, const std::vector<cplx>& points);

// ---------------------------------------------------------------------------
// Model space

struct ModelSpace {
  Contour gamma;
  ParabolicDomain domain;
  ProbeSet probes;
  std::vector<Mat> delta;  // delta(z_j)
  double tol_mem = kMembershipTol;
};

ModelSpace make_model_space(const CharFunEvaluator& ev, const Contour& gamma, const ProbeSet& probes);

struct ObsOrigin {
  Mat A;
  Mat C;
  Vec x;
};

struct ModelElement {
  GridFunction f;        // exterior class
  GridFunction f_tilde;  // delta f
  std::optional<MembershipResult> ext_membership;  // f: ExtAnalytic
  std::optional<MembershipResult> int_membership;  // f_tilde: IntAnalytic
  std::optional<ObsOrigin> origin;                 // f = O_{A,C} x when known

  bool in_space() const {
    return ext_membership && int_membership && ext_membership->pass && int_membership->pass;
  }
};

ModelElement make_element(const ModelSpace& space, const GridFunction& f, bool check_membership = true);

// O_{A,C} x as a model element with its origin attached.
ModelElement observe(const ModelSpace& space, const SystemTriple& sys, const Vec& x, bool check_membership = true);

struct TruncatedMult {
  Vec c;
  ModelElement shifted;  // z f - c
};

// Without origin, c is fitted as c + d/z by least squares on the outermost
// tenth of the nodes (by |z|). Throws NotInDomain when z f - c fails the
// exterior membership test.
TruncatedMult truncated_mult(const ModelElement& elem, const ModelSpace& space);

// (f(z) - f(lambda)) / (z - lambda). Throws Spectral when
// smin(delta(lambda)) < 1e-8 max(1, ||delta(lambda)||) for interior lambda.
ModelElement model_resolvent(const ModelElement& elem, cplx lambda, const CharFunEvaluator& ev,
                             const ModelSpace& space);

inline constexpr double kSpecDeltaTol = 1.0e-8;

// ---------------------------------------------------------------------------
// Control transform and rational calculus

// f(z) = sum_j u_j / (z - pole_j).
struct RationalVector {
  std::vector<cplx> poles;
  std::vector<Vec> residues;

  Vec operator()(cplx z) const;
  GridFunction sample(const Contour& c) const;
};

// sum_j (A - pole_j)^{-1} B u_j. Poles must lie in Omega_ext.
Vec ctrl_transform(const SystemTriple& sys, const RationalVector& f, const ParabolicDomain& dom);

// -(1/2 pi i) int (A - z)^{-1} B f(z) dz, tail-corrected when f decays.
Vec ctrl_transform(const SystemTriple& sys, const GridFunction& f, const Contour& c);

// q(z) = c0 + sum_j r_j / (z - pole_j).
struct RationalScalar {
  cplx c0{0.0, 0.0};
  std::vector<cplx> poles;
  std::vector<cplx> residues;

  cplx operator()(cplx z) const;
};

enum class CalculusMode { Direct, Contour };

Mat rational_calculus(const SystemTriple& sys, const RationalScalar& q, CalculusMode mode,
                      const ParabolicDomain& dom, const Contour* c = nullptr);

}  // namespace pmodel
