// SPDX-License-Identifier: Apache-2.0
#include "pmodel/operator_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pmodel {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::ConstantViolation: return "constant violation";
    case ErrorKind::NearSingular: return "near-singular";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Geometry: return "geometry error";
    case ErrorKind::SearchFailure: return "search failure";
    case ErrorKind::Quadrature: return "quadrature error";
    case ErrorKind::Spectral: return "spectral error";
    case ErrorKind::Symmetry: return "contour symmetry error";
    case ErrorKind::Alignment: return "alignment error";
    case ErrorKind::NotInDomain: return "not in domain";
    case ErrorKind::InequalityViolation: return "inequality violation";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

double opnorm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  // Largest eigenvalue of the smaller Gram matrix.
  const Mat g = m.rows() < m.cols() ? Mat(m * m.adjoint()) : Mat(m.adjoint() * m);
  Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double smin(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

const char* to_string(DomainCase dc) {
  return dc == DomainCase::EvenOnR ? "even" : "half_line";
}

DomainCase domain_case_from_string(const std::string& s) {
  if (s == "even" || s == "even_on_r" || s == "EvenOnR") return DomainCase::EvenOnR;
  if (s == "half_line" || s == "HalfLine") return DomainCase::HalfLine;
  throw Error(ErrorKind::Config, "unknown domain case '" + s + "'");
}

// ---------------------------------------------------------------------------
// WeightFamily

WeightFamily WeightFamily::power_affine(double alpha, DomainCase dc) {
  if (!(alpha > 0.0 && alpha <= 0.5)) {
    throw Error(ErrorKind::Domain, "power-affine exponent must lie in (0, 1/2]", alpha);
  }
  WeightFamily w;
  w.power_ = true;
  w.alpha_ = alpha;
  w.dc_ = dc;
  // lim (1+t)^{2 alpha} / t
  w.k0_ = (alpha == 0.5) ? 1.0 : 0.0;
  return w;
}

WeightFamily WeightFamily::custom(std::function<double(double)> psi, double k0, DomainCase dc,
                                  std::function<double(double)> dpsi) {
  if (!psi) throw Error(ErrorKind::Config, "custom weight needs a psi callback");
  if (!(k0 >= 0.0)) throw Error(ErrorKind::Domain, "k0 must be nonnegative", k0);
  WeightFamily w;
  w.power_ = false;
  w.alpha_ = 0.0;
  w.k0_ = k0;
  w.dc_ = dc;
  w.user_psi_ = std::move(psi);
  w.user_dpsi_ = std::move(dpsi);
  return w;
}

bool WeightFamily::in_domain(double x) const {
  return std::isfinite(x) && (dc_ == DomainCase::EvenOnR || x >= 0.0);
}

double WeightFamily::psi_raw(double ax) const {
  if (power_) return std::pow(1.0 + ax, alpha_);
  return user_psi_(ax);
}

double WeightFamily::phi_raw(double ax) const {
  if (power_) return std::pow(1.0 + ax, 2.0 * alpha_);
  const double p = user_psi_(ax);
  return p * p;
}

double WeightFamily::psi(double x) const {
  if (!in_domain(x)) throw Error(ErrorKind::Domain, "x outside the weight domain", x);
  return psi_raw(std::abs(x));
}

double WeightFamily::phi(double x) const {
  if (!in_domain(x)) throw Error(ErrorKind::Domain, "x outside the weight domain", x);
  return phi_raw(std::abs(x));
}

double WeightFamily::dphi(double x) const {
  if (!in_domain(x)) throw Error(ErrorKind::Domain, "x outside the weight domain", x);
  const double ax = std::abs(x);
  const double sgn = x < 0.0 ? -1.0 : 1.0;
  if (power_) return sgn * 2.0 * alpha_ * std::pow(1.0 + ax, 2.0 * alpha_ - 1.0);
  double dp;
  if (user_dpsi_) {
    dp = user_dpsi_(ax);
  } else {
    const double h = 1.0e-6 * std::max(1.0, ax);
    dp = ax >= h ? (user_psi_(ax + h) - user_psi_(ax - h)) / (2.0 * h)
                 : (user_psi_(ax + h) - user_psi_(ax)) / h;
  }
  return sgn * 2.0 * user_psi_(ax) * dp;
}

WeightFamily::LawReport WeightFamily::validate(int grid, double xmax, double tol) const {
  LawReport rep;
  std::vector<double> xs(static_cast<size_t>(grid));
  for (int i = 0; i < grid; ++i) xs[static_cast<size_t>(i)] = xmax * static_cast<double>(i) / (grid - 1);
  rep.min_psi = psi_raw(0.0);
  double prev = -1.0;
  for (double x : xs) {
    const double p = psi_raw(x);
    rep.min_psi = std::min(rep.min_psi, p);
    if (p < prev - tol * std::max(1.0, p)) rep.monotone = false;
    prev = p;
  }
  // Pair sweep on a strided subset keeps the cost near 10^5 evaluations.
  const int stride = std::max(1, grid / 300);
  const double thetas[] = {0.25, 0.5, 0.75};
  for (int i = 0; i < grid; i += stride) {
    const double s = xs[static_cast<size_t>(i)];
    const double ps = phi_raw(s);
    for (int j = 0; j < grid; j += stride) {
      const double t = xs[static_cast<size_t>(j)];
      const double pt = phi_raw(t);
      for (double th : thetas) {
        const double lhs = phi_raw(th * s + (1.0 - th) * t);
        const double rhs = th * ps + (1.0 - th) * pt;
        rep.worst_concavity = std::min(rep.worst_concavity, (lhs - rhs) + tol * std::max(1.0, rhs));
      }
      const double sum = phi_raw(s + t);
      rep.worst_subadditive = std::min(rep.worst_subadditive, (ps + pt - sum) + tol * std::max(1.0, sum));
      const double sh = 1.0 + s / xmax * 9.0;  // scale factors in (1, 10]
      if (sh > 1.0) {
        const double lhs = phi_raw(sh * t);
        rep.worst_subhomogeneous =
            std::min(rep.worst_subhomogeneous, (sh * pt - lhs) + tol * std::max(1.0, lhs));
      }
    }
  }
  rep.ok = rep.min_psi >= 1.0 - tol && rep.monotone && rep.worst_concavity >= 0.0 &&
           rep.worst_subadditive >= 0.0 && rep.worst_subhomogeneous >= 0.0;
  return rep;
}

WeightInfo weight_info(const WeightFamily& w, double x) {
  return {w.psi(x), w.phi(x), w.k0()};
}

// ---------------------------------------------------------------------------
// Spectrum and system

SpectralDiagonal SpectralDiagonal::make(const std::vector<double>& t, DomainCase dc, double eps0) {
  if (t.empty()) throw Error(ErrorKind::Domain, "spectrum must be nonempty");
  for (size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) throw Error(ErrorKind::Domain, "non-finite eigenvalue");
    if (i > 0 && t[i] < t[i - 1]) throw Error(ErrorKind::Domain, "eigenvalues must be ascending");
  }
  SpectralDiagonal d;
  d.t = Eigen::Map<const RVec>(t.data(), static_cast<Eigen::Index>(t.size()));
  d.domain_case = dc;
  if (dc == DomainCase::HalfLine) {
    d.eps0 = eps0 > 0.0 ? eps0 : t.front();
    if (!(d.eps0 > 0.0) || t.front() < d.eps0) {
      throw Error(ErrorKind::Domain, "half-line spectrum must stay above a positive eps0", t.front());
    }
  }
  return d;
}

Mat SystemTriple::B() const { return psi_t.cast<cplx>().asDiagonal(); }

Mat SystemTriple::C() const { return (I_UNIT * psi_t.cast<cplx>()).asDiagonal(); }

Mat SystemTriple::A0mat() const { return A0.t.cast<cplx>().asDiagonal(); }

Mat SystemTriple::L() const { return A - A0mat(); }

SystemTriple build_system(const SpectralDiagonal& A0, const WeightFamily& w, const Mat& F, double kappa,
                          double ell) {
  const int n = A0.n();
  if (F.rows() != n || F.cols() != n) throw Error(ErrorKind::Alignment, "F must be n x n");
  if (A0.domain_case != w.domain_case()) throw Error(ErrorKind::Config, "weight and spectrum disagree on the domain case");
  SystemTriple s;
  s.A0 = A0;
  s.weight = w;
  s.F = F;
  s.kappa = kappa;
  s.ell = ell;
  s.normF = opnorm(F);
  if (!(ell > s.normF)) throw Error(ErrorKind::ConstantViolation, "ell must exceed ||F||", s.normF);
  s.psi_t.resize(n);
  s.phi_t.resize(n);
  for (int j = 0; j < n; ++j) {
    s.psi_t(j) = w.psi(A0.t(j));
    s.phi_t(j) = s.psi_t(j) * s.psi_t(j);
  }
  s.A.resize(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) s.A(i, j) = I_UNIT * (s.psi_t(i) * F(i, j) * s.psi_t(j));
    s.A(j, j) += A0.t(j);
  }
  return s;
}

namespace {

double norm1(const Mat& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); }

[[noreturn]] void throw_near_singular(const Mat& shifted, const Mat& inv, cplx z) {
  const Mat res = shifted * inv - Mat::Identity(shifted.rows(), shifted.cols());
  double r = res.allFinite() ? opnorm(res) : std::numeric_limits<double>::infinity();
  throw Error(ErrorKind::NearSingular,
              "z = (" + std::to_string(z.real()) + ", " + std::to_string(z.imag()) + ") is within tolerance of the spectrum",
              r);
}

}  // namespace

Mat resolvent(const Mat& M, cplx z) {
  const Eigen::Index n = M.rows();
  Mat X = M;
  X.diagonal().array() -= z;
  Eigen::PartialPivLU<Mat> lu(X);
  const double scale = std::max({1.0, norm1(M), std::abs(z)});
  Mat inv = lu.solve(Mat::Identity(n, n));
  const double dist = lu.rcond() * norm1(X);
  if (!(dist > kSpectralTol * scale) || !inv.allFinite()) throw_near_singular(X, inv, z);
  return inv;
}

Mat resolvent(const SystemTriple& s, cplx z, ResolventMode mode) {
  if (mode == ResolventMode::Direct) return resolvent(s.A, z);
  const int n = s.n();
  const double scale = std::max({1.0, s.A0.t.cwiseAbs().maxCoeff(), std::abs(z)});
  Vec d(n);
  for (int j = 0; j < n; ++j) {
    const cplx diff = s.A0.t(j) - z;
    if (!(std::abs(diff) > kSpectralTol * scale)) {
      throw Error(ErrorKind::NearSingular, "z is within tolerance of the spectrum of A0", std::abs(diff));
    }
    d(j) = 1.0 / diff;
  }
  Mat inner = s.L() * d.asDiagonal();
  inner.diagonal().array() += 1.0;
  Eigen::PartialPivLU<Mat> lu(inner);
  Mat inv = d.asDiagonal() * lu.solve(Mat::Identity(n, n));
  if (!(lu.rcond() * norm1(inner) > kSpectralTol) || !inv.allFinite()) {
    Mat X = s.A;
    X.diagonal().array() -= z;
    throw_near_singular(X, inv, z);
  }
  return inv;
}

PerturbationSplit essential_split(const Mat& F, double r_prime, double ess_surrogate) {
  if (!(r_prime > 0.0)) throw Error(ErrorKind::Infeasible, "r' must be positive", r_prime);
  const Eigen::Index n = F.rows();
  PerturbationSplit out;
  out.F = F;
  out.ess_surrogate = ess_surrogate;
  out.r_prime = r_prime;
  Eigen::JacobiSVD<Mat> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const RVec& sv = svd.singularValues();
  Eigen::Index m = 0;
  while (m < sv.size() && sv(m) >= r_prime) ++m;
  out.rank_dprime = static_cast<int>(m);
  out.F_dprime = Mat::Zero(n, F.cols());
  if (m > 0) {
    out.F_dprime = svd.matrixU().leftCols(m) * sv.head(m).cast<cplx>().asDiagonal() *
                   svd.matrixV().leftCols(m).adjoint();
  }
  out.F_prime = F - out.F_dprime;
  return out;
}

std::function<double(double)> eta_of(EtaTag tag, const WeightFamily& w) {
  switch (tag) {
    case EtaTag::One: return [](double) { return 1.0; };
    case EtaTag::Psi: return [w](double t) { return w.psi(t); };
    case EtaTag::Phi: return [w](double t) { return w.phi(t); };
    case EtaTag::AbsPlusOne: return [](double t) { return std::abs(t) + 1.0; };
  }
  return [](double) { return 1.0; };
}

double weighted_norm(const SpectralDiagonal& A0, const Vec& x, const std::function<double(double)>& eta) {
  if (x.size() != A0.t.size()) throw Error(ErrorKind::Alignment, "vector length must match the spectrum");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double e = eta(A0.t(j));
    if (e == 0.0 || !std::isfinite(e)) throw Error(ErrorKind::Domain, "eta vanishes on the spectrum", A0.t(j));
    acc += std::norm(x(j) / e);
  }
  return std::sqrt(acc);
}

}  // namespace pmodel
