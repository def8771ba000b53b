// SPDX-License-Identifier: Apache-2.0
#include "pmodel/boundary_calculus.hpp"

#include <cmath>

namespace pmodel {

namespace {

void check_aligned(const GridFunction& f, const Contour& c) {
  if (f.size() != c.size()) throw Error(ErrorKind::Alignment, "grid function does not match the contour", f.size());
}

void check_symmetric(const Contour& c) {
  if (c.partner.size() != c.z.size()) throw Error(ErrorKind::Symmetry, "contour has no conjugation permutation");
}

// Integrand h_j sampled at the nodes -> quadrature value and embedded estimate.
PairingResult integrate(const std::vector<cplx>& h, const Contour& c, bool tail) {
  cplx full = 0.0;
  cplx coarse = 0.0;
  for (size_t j = 0; j < h.size(); ++j) {
    full += h[j] * c.dz[j];
    coarse += h[j] * c.dz_coarse[j];
  }
  if (tail) {
    const std::vector<cplx> tw = c.tail_weights();
    for (size_t e = 0; e < tw.size(); ++e) {
      const cplx t = tw[e] * h[static_cast<size_t>(c.ends[e].node)];
      full += t;
      coarse += t;
    }
  }
  const cplx scale = 1.0 / (2.0 * PI * I_UNIT);
  return {full * scale, std::abs((full - coarse) * scale)};
}

}  // namespace

double e2_norm(const GridFunction& f, const Contour& c) {
  check_aligned(f, c);
  double acc = 0.0;
  for (int j = 0; j < f.size(); ++j) acc += f.values.col(j).squaredNorm() * c.arclen[static_cast<size_t>(j)];
  if (f.decays) {
    for (const ContourEnd& e : c.ends) {
      acc += f.values.col(e.node).squaredNorm() * std::norm(c.z[static_cast<size_t>(e.node)]) * e.tail_abs;
    }
  }
  return std::sqrt(acc / (2.0 * PI));
}

PairingResult cauchy_pairing(const GridFunction& f, const GridFunction& g, const Contour& c) {
  check_aligned(f, c);
  check_aligned(g, c);
  check_symmetric(c);
  if (f.dim() != g.dim()) throw Error(ErrorKind::Alignment, "pairing slots differ in dimension");
  std::vector<cplx> h(static_cast<size_t>(c.size()));
  for (int j = 0; j < c.size(); ++j) {
    h[static_cast<size_t>(j)] = g.values.col(c.partner[static_cast<size_t>(j)]).dot(f.values.col(j));
  }
  return integrate(h, c, f.decays && g.decays);
}

PairingResult delta_pairing(const GridFunction& f, const GridFunction& g, const std::vector<Mat>& delta,
                            const Contour& c) {
  check_aligned(f, c);
  check_aligned(g, c);
  check_symmetric(c);
  if (static_cast<int>(delta.size()) != c.size()) throw Error(ErrorKind::Alignment, "delta samples do not match the contour");
  std::vector<cplx> h(static_cast<size_t>(c.size()));
  for (int j = 0; j < c.size(); ++j) {
    const Vec df = delta[static_cast<size_t>(j)] * f.values.col(j);
    h[static_cast<size_t>(j)] = g.values.col(c.partner[static_cast<size_t>(j)]).dot(df);
  }
  return integrate(h, c, f.decays && g.decays);
}

Vec cauchy_project(const GridFunction& f, const Contour& c, cplx w) {
  check_aligned(f, c);
  for (int j = 0; j < c.size(); ++j) {
    if (std::abs(c.z[static_cast<size_t>(j)] - w) < c.arclen[static_cast<size_t>(j)]) {
      throw Error(ErrorKind::Quadrature, "evaluation point closer to the contour than the node spacing",
                  std::abs(c.z[static_cast<size_t>(j)] - w));
    }
  }
  Vec acc = Vec::Zero(f.dim());
  for (int j = 0; j < c.size(); ++j) {
    acc += f.values.col(j) * (c.dz[static_cast<size_t>(j)] / (c.z[static_cast<size_t>(j)] - w));
  }
  if (f.decays) {
    const std::vector<cplx> tw = c.tail_weights();
    for (size_t e = 0; e < tw.size(); ++e) {
      const int n = c.ends[e].node;
      acc += f.values.col(n) * (tw[e] / (c.z[static_cast<size_t>(n)] - w));
    }
  }
  return acc / (2.0 * PI * I_UNIT);
}

MembershipResult membership_test(const GridFunction& f, const Contour& c, const ProbeSet& probes, SideHint side,
                                 double tol) {
  if (side == SideHint::Unknown) throw Error(ErrorKind::Config, "membership test needs a side");
  const std::vector<cplx>& pts = side == SideHint::ExtAnalytic ? probes.interior : probes.exterior;
  if (pts.empty()) throw Error(ErrorKind::Config, "empty probe set");
  MembershipResult r;
  const double nrm = e2_norm(f, c);
  if (nrm == 0.0) return r;
  double worst = 0.0;
  for (const cplx& w : pts) worst = std::max(worst, cauchy_project(f, c, w).norm());
  r.residual = worst / nrm;
  r.pass = r.residual <= tol;
  return r;
}

}  // namespace pmodel
