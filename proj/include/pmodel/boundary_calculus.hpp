// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "pmodel/domain_geometry.hpp"

namespace pmodel {

enum class SideHint { ExtAnalytic, IntAnalytic, Unknown };

// Samples f(z_j) on the contour nodes, one column per node.
struct GridFunction {
  Mat values;
  SideHint side = SideHint::Unknown;
  bool decays = false;  // f = O(1/z) at infinity

  int dim() const { return static_cast<int>(values.rows()); }
  int size() const { return static_cast<int>(values.cols()); }
};

struct PairingResult {
  cplx value{0.0, 0.0};
  double quadrature_error_estimate = 0.0;  // |full rule - embedded half rule|
};

// sqrt((1/2 pi) int ||f||^2 |dz|), tail-corrected when f decays.
double e2_norm(const GridFunction& f, const Contour& c);

// (1/2 pi i) int <f(z), g(conj z)> dz, with g(conj z) read through the
// node-conjugation permutation. Linear in f, antilinear in g.
PairingResult cauchy_pairing(const GridFunction& f, const GridFunction& g, const Contour& c);

// (1/2 pi i) int <delta(z) f(z), g(conj z)> dz.
PairingResult delta_pairing(const GridFunction& f, const GridFunction& g, const std::vector<Mat>& delta,
                            const Contour& c);

// (1/2 pi i) int f(s) / (s - w) ds.
Vec cauchy_project(const GridFunction& f, const Contour& c, cplx w);

inline constexpr double kMembershipTol = 1.0e-4;

struct MembershipResult {
  bool pass = true;
  double residual = 0.0;
};

// ExtAnalytic passes when the Cauchy projections at interior probes vanish
// relative to the E2 norm; IntAnalytic uses the exterior probes.
MembershipResult membership_test(const GridFunction& f, const Contour& c, const ProbeSet& probes, SideHint side,
                                 double tol = kMembershipTol);

}  // namespace pmodel
