// SPDX-License-Identifier: Apache-2.0
#include "pmodel/model_transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pmodel {

namespace {

// LU of (z I - A), refusing points within tolerance of the spectrum.
Eigen::PartialPivLU<Mat> shifted_lu(const Mat& A, cplx z) {
  Mat X = -A;
  X.diagonal().array() += z;
  Eigen::PartialPivLU<Mat> lu(X);
  const double scale = std::max({1.0, X.cwiseAbs().colwise().sum().maxCoeff(), std::abs(z)});
  if (!(lu.rcond() * X.cwiseAbs().colwise().sum().maxCoeff() > kSpectralTol * scale)) {
    throw Error(ErrorKind::NearSingular, "point within tolerance of the spectrum", std::abs(z));
  }
  return lu;
}

bool closure_interior(const ParabolicDomain& dom, cplx p) {
  const Membership m = membership(dom, p);
  return m.side == Side::Interior || m.margin > -1.0e-12;
}

}  // namespace

// ---------------------------------------------------------------------------

CharFunEvaluator::CharFunEvaluator(const SystemTriple& sys, const ConstantsBundle& constants, double kappa)
    : sys_(sys), constants_(constants), kappa_(kappa) {
  domain_.weight = sys.weight;
  domain_.mu = constants.mu;
  domain_.R = constants.R;
  shrunk_ = domain_;
  if (constants.sigma_shrink > 0.0 && constants.mu > constants.sigma_shrink && constants.R > constants.sigma_shrink) {
    shrunk_ = domain_.shrunk(constants.sigma_shrink);
  }
}

Mat CharFunEvaluator::A_kappa() const {
  Mat out = sys_.A0mat();
  for (int j = 0; j < sys_.n(); ++j) out(j, j) += I_UNIT * kappa_ * sys_.phi_t(j);
  return out;
}

Mat CharFunEvaluator::delta(cplx z) const {
  const int n = sys_.n();
  Mat pf = (I_UNIT * sys_.phi_t.cast<cplx>()).asDiagonal() * sys_.F;
  Mat m1 = pf;
  Mat m2 = pf;
  for (int j = 0; j < n; ++j) {
    m1(j, j) += sys_.A0.t(j) + I_UNIT * kappa_ * sys_.phi_t(j) - z;
    m2(j, j) += sys_.A0.t(j) - z;
  }
  Eigen::PartialPivLU<Mat> lu(m1);
  Mat out = lu.solve(m2);
  if (!out.allFinite()) throw Error(ErrorKind::NearSingular, "first factor of delta is singular", std::abs(z));
  return out;
}

Mat CharFunEvaluator::delta_alt(cplx z) const {
  const int n = sys_.n();
  Vec pd(n);
  for (int j = 0; j < n; ++j) {
    const cplx d = sys_.A0.t(j) + I_UNIT * kappa_ * sys_.phi_t(j) - z;
    if (d == 0.0) throw Error(ErrorKind::NearSingular, "z is an eigenvalue of A_kappa", std::abs(z));
    pd(j) = sys_.phi_t(j) / d;
  }
  Mat bracket = (I_UNIT * pd).asDiagonal() * sys_.F;
  bracket.diagonal().array() += 1.0;
  const Mat inv = bracket.partialPivLu().solve(Mat::Identity(n, n));
  const double ell = constants_.ell > 0.0 ? constants_.ell : sys_.ell;
  if (ell > sys_.normF) {
    const double bound = 1.0 / (1.0 - sys_.normF / ell);
    const double got = opnorm(inv);
    if (!(got <= bound * (1.0 + 1.0e-8))) {
      throw Error(ErrorKind::ConstantViolation, "bracket inverse exceeds 1/(1 - ||F||/ell)", got);
    }
  }
  Mat out = -I_UNIT * kappa_ * inv * pd.asDiagonal();
  out.diagonal().array() += 1.0;
  return out;
}

Mat CharFunEvaluator::Phi(cplx z) const {
  const Vec psi = sys_.psi_t.cast<cplx>();
  return (kappa_ * I_UNIT) * psi.asDiagonal() * resolvent(sys_.A, z) * psi.asDiagonal();
}

Mat CharFunEvaluator::delta_inverse(cplx z, Region region) const {
  if (region == Region::Certified) {
    if (!(constants_.mu > 0.0) || !(constants_.R > 0.0)) {
      throw Error(ErrorKind::Config, "certified region needs mu and R");
    }
    if (membership(shrunk_, z).side == Side::Interior) {
      throw Error(ErrorKind::Domain, "point lies in the shrunk interior domain", std::abs(z));
    }
  }
  Mat out = Phi(z);
  out.diagonal().array() += 1.0;
  return out;
}

std::vector<Mat> CharFunEvaluator::delta_samples(const Contour& c) const {
  std::vector<Mat> out;
  out.reserve(c.z.size());
  for (const cplx& z : c.z) out.push_back(delta(z));
  return out;
}

Mat H_eval(const SystemTriple& sys, cplx z) {
  const int n = sys.n();
  const double scale = std::max({1.0, sys.A0.t.cwiseAbs().maxCoeff(), std::abs(z)});
  Vec d(n);
  for (int j = 0; j < n; ++j) {
    const cplx diff = sys.A0.t(j) - z;
    if (!(std::abs(diff) > kSpectralTol * scale)) {
      throw Error(ErrorKind::NearSingular, "z is within tolerance of the spectrum of A0", std::abs(diff));
    }
    d(j) = I_UNIT * sys.phi_t(j) / diff;
  }
  Mat out = d.asDiagonal() * sys.F;
  out.diagonal().array() += 1.0;
  return out;
}

// ---------------------------------------------------------------------------

Mat obs_samples(const Mat& A, const Mat& C, const Vec& x, const std::vector<cplx>& points) {
  Mat X(x.size(), 1);
  X.col(0) = x;
  return obs_samples_batch(A, C, X, points)[0];
}

std::vector<Mat> obs_samples_batch(const Mat& A, const Mat& C, const Mat& X, const std::vector<cplx>& points) {
  if (A.rows() != X.rows() || C.cols() != A.rows()) throw Error(ErrorKind::Alignment, "pair dimensions differ");
  const Eigen::Index npts = static_cast<Eigen::Index>(points.size());
  std::vector<Mat> out(static_cast<size_t>(X.cols()), Mat(C.rows(), npts));
  for (Eigen::Index j = 0; j < npts; ++j) {
    const Mat Y = C * shifted_lu(A, points[static_cast<size_t>(j)]).solve(X);
    for (Eigen::Index k = 0; k < X.cols(); ++k) out[static_cast<size_t>(k)].col(j) = Y.col(k);
  }
  return out;
}

GridFunction obs_transform(const SystemTriple& sys, const Vec& x, const std::vector<cplx>& points) {
  GridFunction g;
  g.values = obs_samples(sys.A, sys.C(), x, points);
  g.side = SideHint::ExtAnalytic;
  g.decays = true;
  return g;
}

// ---------------------------------------------------------------------------

ModelSpace make_model_space(const CharFunEvaluator& ev, const Contour& gamma, const ProbeSet& probes) {
  ModelSpace s;
  s.gamma = gamma;
  s.domain = ev.domain();
  s.probes = probes;
  s.delta = ev.delta_samples(gamma);
  return s;
}

ModelElement make_element(const ModelSpace& space, const GridFunction& f, bool check_membership) {
  if (f.size() != space.gamma.size()) throw Error(ErrorKind::Alignment, "element does not match the contour");
  ModelElement e;
  e.f = f;
  e.f.side = SideHint::ExtAnalytic;
  e.f_tilde.values.resize(f.dim(), f.size());
  for (int j = 0; j < f.size(); ++j) e.f_tilde.values.col(j) = space.delta[static_cast<size_t>(j)] * f.values.col(j);
  e.f_tilde.side = SideHint::IntAnalytic;
  e.f_tilde.decays = f.decays;
  if (check_membership) {
    e.ext_membership = membership_test(e.f, space.gamma, space.probes, SideHint::ExtAnalytic, space.tol_mem);
    e.int_membership = membership_test(e.f_tilde, space.gamma, space.probes, SideHint::IntAnalytic, space.tol_mem);
  }
  return e;
}

ModelElement observe(const ModelSpace& space, const SystemTriple& sys, const Vec& x, bool check_membership) {
  ModelElement e = make_element(space, obs_transform(sys, x, space.gamma.z), check_membership);
  e.origin = ObsOrigin{sys.A, sys.C(), x};
  return e;
}

TruncatedMult truncated_mult(const ModelElement& elem, const ModelSpace& space) {
  const Contour& c = space.gamma;
  const int N = c.size();
  const int n = elem.f.dim();
  TruncatedMult out;
  if (elem.origin) {
    out.c = elem.origin->C * elem.origin->x;
  } else {
    std::vector<int> idx(static_cast<size_t>(N));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return std::abs(c.z[static_cast<size_t>(a)]) > std::abs(c.z[static_cast<size_t>(b)]);
    });
    const int m = std::min(N, std::max(4, N / 10));
    Mat V(m, 2);
    Mat rhs(m, n);
    for (int r = 0; r < m; ++r) {
      const cplx z = c.z[static_cast<size_t>(idx[static_cast<size_t>(r)])];
      V(r, 0) = 1.0;
      V(r, 1) = 1.0 / z;
      rhs.row(r) = (z * elem.f.values.col(idx[static_cast<size_t>(r)])).transpose();
    }
    const Mat sol = V.colPivHouseholderQr().solve(rhs);
    out.c = sol.row(0).transpose();
  }
  GridFunction g;
  g.values.resize(n, N);
  for (int j = 0; j < N; ++j) g.values.col(j) = c.z[static_cast<size_t>(j)] * elem.f.values.col(j) - out.c;
  g.decays = true;
  out.shifted = make_element(space, g, true);
  if (!out.shifted.ext_membership->pass) {
    throw Error(ErrorKind::NotInDomain, "z f - c is not exterior analytic", out.shifted.ext_membership->residual);
  }
  if (elem.origin) {
    out.shifted.origin = ObsOrigin{elem.origin->A, elem.origin->C, elem.origin->A * elem.origin->x};
  }
  return out;
}

ModelElement model_resolvent(const ModelElement& elem, cplx lambda, const CharFunEvaluator& ev,
                             const ModelSpace& space) {
  const Contour& c = space.gamma;
  Vec fl;
  if (membership(space.domain, lambda).side == Side::Exterior) {
    if (elem.origin) {
      fl = elem.origin->C * shifted_lu(elem.origin->A, lambda).solve(elem.origin->x);
    } else {
      fl = -cauchy_project(elem.f, c, lambda);
    }
  } else {
    const Mat d = ev.delta(lambda);
    const double s = smin(d);
    if (s < kSpecDeltaTol * std::max(1.0, opnorm(d))) throw Error(ErrorKind::Spectral, "lambda lies in the spectrum of delta", s);
    if (elem.origin) {
      fl = elem.origin->C * shifted_lu(elem.origin->A, lambda).solve(elem.origin->x);
    } else {
      fl = d.partialPivLu().solve(cauchy_project(elem.f_tilde, c, lambda));
    }
  }
  GridFunction g;
  g.values.resize(elem.f.dim(), c.size());
  for (int j = 0; j < c.size(); ++j) {
    const cplx gap = c.z[static_cast<size_t>(j)] - lambda;
    if (gap == 0.0) throw Error(ErrorKind::Quadrature, "lambda coincides with a contour node");
    g.values.col(j) = (elem.f.values.col(j) - fl) / gap;
  }
  g.decays = true;
  ModelElement out = make_element(space, g, elem.ext_membership.has_value());
  if (elem.origin) {
    const Mat& A = elem.origin->A;
    const Vec x2 = -shifted_lu(A, lambda).solve(elem.origin->x);  // (A - lambda)^{-1} x
    out.origin = ObsOrigin{A, elem.origin->C, x2};
  }
  return out;
}

// ---------------------------------------------------------------------------

Vec RationalVector::operator()(cplx z) const {
  Vec acc = Vec::Zero(residues.empty() ? 0 : residues.front().size());
  for (size_t j = 0; j < poles.size(); ++j) acc += residues[j] / (z - poles[j]);
  return acc;
}

GridFunction RationalVector::sample(const Contour& c) const {
  GridFunction g;
  const Eigen::Index n = residues.empty() ? 0 : residues.front().size();
  g.values.resize(n, c.size());
  for (int j = 0; j < c.size(); ++j) g.values.col(j) = (*this)(c.z[static_cast<size_t>(j)]);
  g.decays = true;
  return g;
}

Vec ctrl_transform(const SystemTriple& sys, const RationalVector& f, const ParabolicDomain& dom) {
  const Mat B = sys.B();
  Vec acc = Vec::Zero(sys.n());
  for (size_t j = 0; j < f.poles.size(); ++j) {
    if (closure_interior(dom, f.poles[j])) {
      throw Error(ErrorKind::Domain, "pole lies in the closed interior domain", std::abs(f.poles[j]));
    }
    acc -= shifted_lu(sys.A, f.poles[j]).solve(B * f.residues[j]);
  }
  return acc;
}

Vec ctrl_transform(const SystemTriple& sys, const GridFunction& f, const Contour& c) {
  if (f.size() != c.size() || f.dim() != sys.n()) throw Error(ErrorKind::Alignment, "samples do not match");
  const Mat B = sys.B();
  // (A - z)^{-1} = -(z - A)^{-1}
  auto term = [&](int j) -> Vec {
    return -shifted_lu(sys.A, c.z[static_cast<size_t>(j)]).solve(B * f.values.col(j));
  };
  Vec acc = Vec::Zero(sys.n());
  for (int j = 0; j < c.size(); ++j) acc += term(j) * c.dz[static_cast<size_t>(j)];
  if (f.decays) {
    const std::vector<cplx> tw = c.tail_weights();
    for (size_t e = 0; e < tw.size(); ++e) acc += term(c.ends[e].node) * tw[e];
  }
  return -acc / (2.0 * PI * I_UNIT);
}

cplx RationalScalar::operator()(cplx z) const {
  cplx acc = c0;
  for (size_t j = 0; j < poles.size(); ++j) acc += residues[j] / (z - poles[j]);
  return acc;
}

Mat rational_calculus(const SystemTriple& sys, const RationalScalar& q, CalculusMode mode,
                      const ParabolicDomain& dom, const Contour* c) {
  for (const cplx& p : q.poles) {
    if (closure_interior(dom, p)) throw Error(ErrorKind::Domain, "pole lies in the closed interior domain", std::abs(p));
  }
  const int n = sys.n();
  Mat out = q.c0 * Mat::Identity(n, n);
  if (mode == CalculusMode::Direct) {
    for (size_t j = 0; j < q.poles.size(); ++j) out += q.residues[j] * resolvent(sys.A, q.poles[j]);
    return out;
  }
  if (c == nullptr) throw Error(ErrorKind::Config, "contour mode needs a contour");
  const Mat I = Mat::Identity(n, n);
  auto term = [&](int j) -> Mat {
    const cplx z = c->z[static_cast<size_t>(j)];
    return (q(z) - q.c0) * shifted_lu(sys.A, z).solve(I);
  };
  Mat acc = Mat::Zero(n, n);
  for (int j = 0; j < c->size(); ++j) acc += term(j) * c->dz[static_cast<size_t>(j)];
  const std::vector<cplx> tw = c->tail_weights();
  for (size_t e = 0; e < tw.size(); ++e) acc += term(c->ends[e].node) * tw[e];
  return out + acc / (2.0 * PI * I_UNIT);
}

}  // namespace pmodel
