// SPDX-License-Identifier: Apache-2.0
#include "pmodel/domain_geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "quadrature.hpp"

namespace pmodel {

ParabolicDomain ParabolicDomain::shrunk(double sigma) const {
  ParabolicDomain d = *this;
  d.mu = mu - sigma;
  d.R = R - sigma;
  if (!(d.mu > 0.0) || !(d.R > 0.0)) throw Error(ErrorKind::Geometry, "shrink parameter too large", sigma);
  return d;
}

Membership membership(const ParabolicDomain& dom, cplx z) {
  const double x = z.real();
  const double ay = std::abs(z.imag());
  const double disc = dom.R - std::abs(z);
  double par;
  if (dom.domain_case() == DomainCase::EvenOnR) {
    const double sl = dom.mu * std::abs(dom.weight.dphi(x));
    par = (dom.mu * dom.weight.phi_star(x) - ay) / std::sqrt(1.0 + sl * sl);
  } else {
    const double xc = std::max(x, 0.0);
    const double sl = dom.mu * dom.weight.dphi(xc);
    par = std::min(x, (dom.mu * dom.weight.phi(xc) - ay) / std::sqrt(1.0 + sl * sl));
  }
  const double margin = std::max(disc, par);
  return {margin > 0.0 ? Side::Interior : Side::Exterior, margin};
}

bool in_star_domain(double mu1, const WeightFamily& w, cplx z) {
  return std::abs(z.imag()) < mu1 * w.phi_star(z.real());
}

ChainCheck check_chain(const ConstantsBundle& c) {
  auto fail = [](const std::string& s) { return ChainCheck{false, s}; };
  if (!(c.ess >= 0.0)) return fail("ess >= 0");
  if (!(c.ess * c.k0 < 1.0)) return fail("ess * k0 < 1");
  if (!(c.mu > c.mu0)) return fail("mu > mu0");
  if (!(c.r_prime > c.ess)) return fail("r' > ess");
  if (!(c.k > c.k0)) return fail("k > k0");
  if (!(c.r_prime * c.k < 1.0)) return fail("r' k < 1");
  if (!(c.r_prime / std::sqrt(1.0 - c.r_prime * c.r_prime * c.k * c.k) < c.mu)) return fail("r' / sqrt(1 - r'^2 k^2) < mu");
  if (!(c.R > c.R0)) return fail("R > R0");
  if (!(c.eps > 0.0 && c.eps < 1.0)) return fail("0 < eps < 1");
  if (!(c.mu1 > c.mu)) return fail("mu1 > mu");
  if (!(c.ell > 0.0)) return fail("ell > 0");
  if (!(std::abs(c.kappa) > c.kappa0)) return fail("|kappa| > kappa0");
  return {};
}

double mu0_of(double ess, double k0) {
  if (!(ess >= 0.0) || !(k0 >= 0.0)) throw Error(ErrorKind::Domain, "ess and k0 must be nonnegative");
  if (!(ess * k0 < 1.0)) throw Error(ErrorKind::ConstantViolation, "condition ess * k0 < 1 fails", ess * k0);
  return ess / std::sqrt(1.0 - ess * ess * k0 * k0);
}

PickedConstants pick_constants(double mu, double ess, double k0) {
  const double mu0 = mu0_of(ess, k0);
  if (!(mu > mu0)) throw Error(ErrorKind::Infeasible, "mu must exceed mu0", mu0);
  // Feasible r' lie below mu / sqrt(1 + mu^2 k0^2), and for a given r' the
  // feasible k lie below sqrt(mu^2 - r'^2) / (mu r').
  const double r_hi = mu / std::sqrt(1.0 + mu * mu * k0 * k0);
  double r = 0.5 * (ess + r_hi);
  PickedConstants out;
  for (int step = 0; step < 200; ++step) {
    const double k_hi = std::sqrt(mu * mu - r * r) / (mu * r);
    const double k = 0.5 * (k0 + k_hi);
    const double rk = r * k;
    out.r_prime = r;
    out.k = k;
    out.shrink_steps = step;
    out.slack_rk = 1.0 - rk;
    out.slack_mu = rk < 1.0 ? 1.0 - r / (mu * std::sqrt(1.0 - rk * rk)) : -1.0;
    if (r > ess && k > k0 && out.slack_rk >= kPickSlack && out.slack_mu >= kPickSlack) {
      out.verified = true;
      return out;
    }
    r = 0.5 * (ess + r);
  }
  throw Error(ErrorKind::Infeasible, "no (r', k) with the required slack", out.slack_mu);
}

double cone_threshold(double mu, double r_prime, const WeightFamily& w) {
  if (!(r_prime > 0.0 && r_prime < mu)) throw Error(ErrorKind::Domain, "need 0 < r' < mu", r_prime);
  const double c = std::sqrt(mu * mu - r_prime * r_prime);
  auto g = [&](double t) { return t * c - r_prime * mu * w.phi_star(t); };
  double lo = 0.0;
  double hi = 1.0;
  int guard = 0;
  while (g(hi) <= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200) throw Error(ErrorKind::Geometry, "cone threshold does not exist for these constants");
  }
  for (int it = 0; it < 200 && hi - lo > 1.0e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? hi : lo) = mid;
  }
  return hi;
}

namespace {

std::vector<double> disc_centres(const ParabolicDomain& dom, int n_discs) {
  const double t_hi = 1.0e3 * std::max(1.0, dom.R);
  const double t_lin = 2.0 * dom.R;
  const bool even = dom.domain_case() == DomainCase::EvenOnR;
  std::vector<double> ts;
  const int n_lin = n_discs / 2;
  const int n_geo = n_discs - n_lin;
  for (int i = 0; i < n_lin; ++i) {
    double t = t_lin * static_cast<double>(i) / std::max(1, n_lin - 1);
    if (even && (i % 2 == 1)) t = -t;
    ts.push_back(t);
  }
  for (int i = 0; i < n_geo; ++i) {
    double t = t_lin * std::pow(t_hi / t_lin, static_cast<double>(i + 1) / n_geo);
    if (even && (i % 2 == 1)) t = -t;
    ts.push_back(t);
  }
  return ts;
}

}  // namespace

DiscInclusionReport verify_disc_inclusion(const ParabolicDomain& dom, double r_prime, int n_discs, int n_angles) {
  DiscInclusionReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (double t : disc_centres(dom, n_discs)) {
    const double rad = r_prime * dom.weight.phi_star(t);
    for (int a = 0; a < n_angles; ++a) {
      const double th = 2.0 * PI * static_cast<double>(a) / n_angles;
      // boundary of the disc for even angles, an inner ring for odd ones
      const double rr = (a % 2 == 0) ? rad : 0.5 * rad;
      const cplx z = cplx(t, 0.0) + std::polar(rr, th);
      const Membership m = membership(dom, z);
      ++rep.samples;
      if (m.margin < rep.worst_margin) {
        rep.worst_margin = m.margin;
        rep.t_witness = t;
        rep.angle_witness = th;
      }
      if (m.side != Side::Interior) ++rep.violations;
    }
  }
  return rep;
}

R0Result r0_search(double mu, double r_prime, const WeightFamily& w) {
  R0Result out;
  out.t_star = cone_threshold(mu, r_prime, w);
  double sup = out.t_star + r_prime * w.phi_star(out.t_star);
  const int grid = 2000;
  for (int i = 0; i <= grid; ++i) {
    const double t = out.t_star * static_cast<double>(i) / grid;
    sup = std::max(sup, t + r_prime * w.phi_star(t));
  }
  out.R0 = 1.05 * sup;
  ParabolicDomain dom;
  dom.mu = mu;
  dom.R = out.R0;
  dom.weight = w;
  const DiscInclusionReport rep = verify_disc_inclusion(dom, r_prime, 1000, 100);
  if (rep.violations > 0) {
    std::ostringstream os;
    os << "disc B(t, r' phi(t)) leaves the domain at t = " << rep.t_witness << ", angle = " << rep.angle_witness;
    throw Error(ErrorKind::Geometry, os.str(), rep.worst_margin);
  }
  return out;
}

double kappa0_of(double ell, double mu1, const WeightFamily& w) {
  const double a = 1.0 + ell * w.phi(1.0);
  return ell + mu1 * (2.0 + a + w.phi(a));
}

double mu1_search(double mu, double R, const WeightFamily& w) {
  std::vector<cplx> pts;
  pts.reserve(10000);
  const bool even = w.domain_case() == DomainCase::EvenOnR;
  if (R > 0.0) {
    for (int i = 0; i < 2000; ++i) pts.push_back(std::polar(R, 2.0 * PI * i / 2000.0));
    for (int r = 1; r <= 40; ++r) {
      for (int a = 0; a < 100; ++a) pts.push_back(std::polar(R * r / 40.0, 2.0 * PI * a / 100.0));
    }
  }
  const double t_hi = 1.0e4 * std::max(1.0, R);
  for (int i = 0; i < 1000; ++i) {
    double t = i == 0 ? 0.0 : 1.0e-3 * std::pow(t_hi / 1.0e-3, static_cast<double>(i) / 999.0);
    for (int sx = 0; sx < (even ? 2 : 1); ++sx) {
      const double x = sx == 0 ? t : -t;
      const double h = mu * w.phi_star(x);
      pts.emplace_back(x, h);
      pts.emplace_back(x, -h);
      pts.emplace_back(x, 0.5 * h);
      pts.emplace_back(x, -0.5 * h);
    }
  }
  for (int j = 1; j <= 100; ++j) {
    const double mu1 = mu * (1.0 + j / 10.0);
    bool ok = true;
    for (const cplx& z : pts) {
      if (!in_star_domain(mu1, w, z)) {
        ok = false;
        break;
      }
    }
    if (ok) return mu1;
  }
  throw Error(ErrorKind::SearchFailure, "mu1 search exhausted at mu (1 + 100/10)", mu * 11.0);
}

namespace {

// min over real x of |p - (x + i mu1 phi_*(x))| for p above the curve.
double curve_distance(cplx p, double mu1, const WeightFamily& w, const std::vector<double>& xs) {
  auto dist = [&](double x) { return std::abs(p - cplx(x, mu1 * w.phi_star(x))); };
  size_t best = 0;
  double bd = dist(xs[0]);
  for (size_t i = 1; i < xs.size(); ++i) {
    const double d = dist(xs[i]);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  double lo = xs[best == 0 ? 0 : best - 1];
  double hi = xs[std::min(best + 1, xs.size() - 1)];
  for (int it = 0; it < 100; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    (dist(m1) < dist(m2) ? hi : lo) = (dist(m1) < dist(m2) ? m2 : m1);
  }
  return std::min(bd, dist(0.5 * (lo + hi)));
}

std::vector<double> symmetric_grid(int n, double extent) {
  std::vector<double> xs{0.0};
  const int half = std::max(1, (n - 1) / 2);
  for (int i = 0; i < half; ++i) {
    const double v = 1.0e-3 * std::pow(extent / 1.0e-3, static_cast<double>(i) / (half - 1 > 0 ? half - 1 : 1));
    xs.push_back(v);
    xs.push_back(-v);
  }
  std::sort(xs.begin(), xs.end());
  return xs;
}

}  // namespace

SeparationReport separation_scan(double kappa, double mu1, double ell, const WeightFamily& w,
                                 const SeparationGrid& grid) {
  SeparationReport rep;
  rep.kappa = kappa;
  rep.kappa0 = kappa0_of(ell, mu1, w);
  rep.precondition_ok = std::abs(kappa) > rep.kappa0;
  const double ak = std::abs(kappa);
  const std::vector<double> xs = symmetric_grid(grid.n_x, grid.extent);
  const std::vector<double> ts = symmetric_grid(grid.n_t, grid.extent);
  rep.min_slack_point = std::numeric_limits<double>::infinity();
  rep.min_slack_curve = std::numeric_limits<double>::infinity();
  for (double t : ts) {
    const double ph = w.phi_star(t);
    const cplx p(t, ak * ph);
    // the region is symmetric, so a negative kappa mirrors the same distances
    const double d = ak > mu1 ? curve_distance(p, mu1, w, xs) : 0.0;
    const double slack = (d - ell * ph) / ph;
    if (slack < std::min(rep.min_slack_point, rep.min_slack_curve)) {
      rep.witness_t = t;
      rep.witness_z = p;
    }
    rep.min_slack_curve = std::min(rep.min_slack_curve, slack);
    if (w.in_domain(t)) rep.min_slack_point = std::min(rep.min_slack_point, slack);
  }
  rep.pass = rep.precondition_ok && rep.min_slack_point >= 0.0 && rep.min_slack_curve >= 0.0;
  return rep;
}

SeparationReport separation_check(double kappa, double mu1, double ell, const WeightFamily& w,
                                  const SeparationGrid& grid) {
  SeparationReport rep = separation_scan(kappa, mu1, ell, w, grid);
  if (!rep.precondition_ok) throw Error(ErrorKind::ConstantViolation, "|kappa| must exceed kappa0", rep.kappa0);
  if (rep.min_slack_point < 0.0 || rep.min_slack_curve < 0.0) {
    std::ostringstream os;
    os << "separation inequality fails near t = " << rep.witness_t;
    throw Error(ErrorKind::InequalityViolation, os.str(), std::min(rep.min_slack_point, rep.min_slack_curve));
  }
  return rep;
}

std::vector<cplx> exterior_probe_set(const ParabolicDomain& dom, double t_far) {
  std::vector<cplx> bnd;
  const bool even = dom.domain_case() == DomainCase::EvenOnR;
  const bool has_junction = dom.mu * dom.weight.phi(0.0) < dom.R;
  const double t_a = has_junction ? junction_abscissa(dom) : 0.0;
  const double h0 = std::max(1.0e-3, 0.05 * std::max(1.0, dom.R));
  const int nb = 600;
  for (int i = 0; i < nb; ++i) {
    const double t = t_a + h0 * (std::pow(1.0 + (t_far - t_a) / h0, static_cast<double>(i) / (nb - 1)) - 1.0);
    for (int sx = 0; sx < (even ? 2 : 1); ++sx) {
      const cplx b = dom.branch(sx == 0 ? t : -t);
      bnd.push_back(b);
      bnd.push_back(std::conj(b));
    }
  }
  const int na = 400;
  for (int i = 0; i < na; ++i) {
    const cplx z = std::polar(dom.R, 2.0 * PI * (i + 0.5) / na);
    ParabolicDomain wedge = dom;
    wedge.R = 0.0;
    if (membership(wedge, z).margin <= 0.0) bnd.push_back(z);
  }
  if (!even && !has_junction) {
    const double top = dom.mu * dom.weight.phi(0.0);
    for (int i = 0; i <= 50; ++i) {
      const double y = dom.R + (top - dom.R) * i / 50.0;
      bnd.emplace_back(0.0, y);
      bnd.emplace_back(0.0, -y);
    }
  }
  std::vector<cplx> out = bnd;
  for (const cplx& b : bnd) {
    for (double s : {0.5, 2.0}) {
      const double sy = b.imag() >= 0.0 ? 1.0 : -1.0;
      const cplx up = b + cplx(0.0, sy * s * std::max(1.0, std::abs(b.imag())));
      const cplx rad = b * (1.0 + s);
      if (membership(dom, up).side == Side::Exterior) out.push_back(up);
      if (membership(dom, rad).side == Side::Exterior) out.push_back(rad);
    }
  }
  return out;
}

NormSup exterior_norm_sup(const SystemTriple& sys, const std::vector<cplx>& probes) {
  NormSup s;
  const int n = sys.n();
  Vec d(n);
  for (const cplx& z : probes) {
    for (int j = 0; j < n; ++j) d(j) = I_UNIT * sys.phi_t(j) / (sys.A0.t(j) - z);
    s.sup_FC = std::max(s.sup_FC, opnorm(sys.F * d.asDiagonal()));
    s.sup_CF = std::max(s.sup_CF, opnorm(d.asDiagonal() * sys.F));
  }
  return s;
}

RSearchResult R_search(const SystemTriple& sys, double mu, double R0, double R_start, double eps_target,
                       double t_far) {
  if (!(R_start > R0)) throw Error(ErrorKind::Domain, "R search must start above R0", R_start);
  if (!(eps_target > 0.0 && eps_target < 1.0)) throw Error(ErrorKind::Domain, "eps target must lie in (0, 1)", eps_target);
  RSearchResult out;
  double R = R_start;
  for (int dbl = 0;; ++dbl) {
    if (R > 1024.0 * R0) {
      throw Error(ErrorKind::SearchFailure, "R exceeded 2^10 R0", std::max(out.sup.sup_FC, out.sup.sup_CF));
    }
    ParabolicDomain dom;
    dom.mu = mu;
    dom.R = R;
    dom.weight = sys.weight;
    const double sigma = sigma_shrink_of(R, mu);
    std::vector<cplx> probes = exterior_probe_set(dom, t_far);
    const std::vector<cplx> inner = exterior_probe_set(dom.shrunk(sigma), t_far);
    probes.insert(probes.end(), inner.begin(), inner.end());
    out.sup = exterior_norm_sup(sys, probes);
    out.R = R;
    out.sigma = sigma;
    out.doublings = dbl;
    if (std::max(out.sup.sup_FC, out.sup.sup_CF) <= 1.0 - eps_target) {
      out.eps = eps_target;
      return out;
    }
    R *= 2.0;
  }
}

// ---------------------------------------------------------------------------
// Contour

cplx Contour::missing_inv_z2() const {
  cplx acc = 0.0;
  for (const ContourEnd& e : ends) acc += e.incoming ? -1.0 / e.point : 1.0 / e.point;
  return acc;
}

std::vector<cplx> Contour::tail_weights() const {
  std::vector<cplx> w;
  w.reserve(ends.size());
  for (const ContourEnd& e : ends) {
    const cplx zn = z[static_cast<size_t>(e.node)];
    w.push_back(zn * zn * (e.incoming ? -1.0 / e.point : 1.0 / e.point));
  }
  return w;
}

double tail_bound_for(const ParabolicDomain& dom, double T_max) {
  const double n_ends = dom.domain_case() == DomainCase::EvenOnR ? 4.0 : 2.0;
  const double sl = dom.mu * dom.weight.dphi(T_max);
  return n_ends * std::sqrt(1.0 + sl * sl) / T_max;
}

double tmax_for_tail(const ParabolicDomain& dom, double target) {
  if (!(target > 0.0)) throw Error(ErrorKind::Domain, "tail target must be positive", target);
  const double n_ends = dom.domain_case() == DomainCase::EvenOnR ? 4.0 : 2.0;
  const double sl0 = dom.mu * dom.weight.dphi(0.0);
  double hi = n_ends * std::sqrt(1.0 + sl0 * sl0) / target;
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1.0e-9 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (tail_bound_for(dom, mid) <= target ? hi : lo) = mid;
  }
  return hi;
}

double junction_abscissa(const ParabolicDomain& dom) {
  if (!(dom.mu * dom.weight.phi(0.0) < dom.R)) {
    throw Error(ErrorKind::Geometry, "the disc does not reach beyond the parabola vertex", dom.R);
  }
  double lo = 0.0;
  double hi = dom.R;
  auto f = [&](double t) { return std::abs(dom.branch(t)) - dom.R; };
  if (!(f(hi) > 0.0)) throw Error(ErrorKind::Geometry, "junction bisection lost its bracket", dom.R);
  for (int it = 0; it < 400 && hi - lo > 1.0e-12 * std::max(1.0, dom.R); ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  if (hi - lo > 1.0e-10 * std::max(1.0, dom.R)) throw Error(ErrorKind::Geometry, "junction bisection did not converge", hi - lo);
  return 0.5 * (lo + hi);
}

namespace {

struct Piece {
  std::function<cplx(double)> z;
  std::function<cplx(double)> dzdu;
  std::function<double(double)> scale;
  double a = 0.0;
  double b = 0.0;
  bool reverse = false;   // traversal runs from b to a
  bool graded = false;    // geometric table away from a
  double h0 = 1.0;
};

struct PanelSpec {
  int piece;
  double ua;
  double ub;
};

double piece_measure_table(const Piece& p, std::vector<double>& us, std::vector<double>& lam) {
  const int M = 4001;
  us.resize(M);
  lam.assign(M, 0.0);
  for (int k = 0; k < M; ++k) {
    const double f = static_cast<double>(k) / (M - 1);
    us[static_cast<size_t>(k)] =
        p.graded ? p.a + p.h0 * (std::pow(1.0 + (p.b - p.a) / p.h0, f) - 1.0) : p.a + (p.b - p.a) * f;
  }
  us.back() = p.b;
  auto g = [&](double u) { return std::abs(p.dzdu(u)) / p.scale(u); };
  double prev = g(us[0]);
  for (int k = 1; k < M; ++k) {
    const double cur = g(us[static_cast<size_t>(k)]);
    lam[static_cast<size_t>(k)] =
        lam[static_cast<size_t>(k - 1)] + 0.5 * (prev + cur) * (us[static_cast<size_t>(k)] - us[static_cast<size_t>(k - 1)]);
    prev = cur;
  }
  return lam.back();
}

std::vector<double> breakpoints(const Piece& p, int panels) {
  std::vector<double> us, lam;
  const double total = piece_measure_table(p, us, lam);
  std::vector<double> bp(static_cast<size_t>(panels + 1));
  bp.front() = p.a;
  bp.back() = p.b;
  for (int j = 1; j < panels; ++j) {
    const double target = total * j / panels;
    const auto it = std::lower_bound(lam.begin(), lam.end(), target);
    const size_t k = static_cast<size_t>(std::max<std::ptrdiff_t>(1, it - lam.begin()));
    const double l0 = lam[k - 1];
    const double l1 = lam[k];
    const double f = l1 > l0 ? (target - l0) / (l1 - l0) : 0.0;
    bp[static_cast<size_t>(j)] = us[k - 1] + f * (us[k] - us[k - 1]);
  }
  return bp;
}

double ray_tail_abs(const ParabolicDomain& dom, double T) {
  const detail::GaussRule& g = detail::gauss_rule(64);
  double acc = 0.0;
  for (size_t i = 0; i < g.x.size(); ++i) {
    const double u = 0.5 * (g.x[i] + 1.0);
    const double t = T / u;
    const double sl = dom.mu * dom.weight.dphi(t);
    acc += 0.5 * g.w[i] * std::sqrt(1.0 + sl * sl) / std::norm(dom.branch(t)) * T / (u * u);
  }
  return acc;
}

Contour assemble(const std::vector<Piece>& pieces, int N, int order, bool closed) {
  if (N < 2 || N % 2 != 0) throw Error(ErrorKind::Geometry, "node count must be even", N);
  const int M = N / 2;
  const int q = order > 0 ? order : (N >= 512 ? 16 : 8);
  const int P = std::max(static_cast<int>(pieces.size()), (M + q - 1) / q);
  std::vector<double> measure;
  double total = 0.0;
  for (const Piece& p : pieces) {
    std::vector<double> us, lam;
    measure.push_back(piece_measure_table(p, us, lam));
    total += measure.back();
  }
  std::vector<int> count(pieces.size(), 1);
  int assigned = static_cast<int>(pieces.size());
  // largest-remainder apportionment of the remaining panels
  std::vector<double> want(pieces.size());
  for (size_t i = 0; i < pieces.size(); ++i) want[i] = P * measure[i] / total;
  while (assigned < P) {
    size_t best = 0;
    double gap = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < pieces.size(); ++i) {
      const double g = want[i] - count[i];
      if (g > gap) {
        gap = g;
        best = i;
      }
    }
    ++count[best];
    ++assigned;
  }
  std::vector<PanelSpec> panels;
  for (size_t i = 0; i < pieces.size(); ++i) {
    const std::vector<double> bp = breakpoints(pieces[i], count[i]);
    const int cnt = count[i];
    for (int j = 0; j < cnt; ++j) {
      const int jj = pieces[i].reverse ? cnt - 1 - j : j;
      panels.push_back({static_cast<int>(i), bp[static_cast<size_t>(jj)], bp[static_cast<size_t>(jj + 1)]});
    }
  }
  const int base = M / P;
  const int extra = M % P;
  Contour c;
  c.closed = closed;
  c.z.reserve(static_cast<size_t>(N));
  for (int pi = 0; pi < P; ++pi) {
    const PanelSpec& ps = panels[static_cast<size_t>(pi)];
    const Piece& piece = pieces[static_cast<size_t>(ps.piece)];
    const int qp = base + (pi < extra ? 1 : 0);
    const detail::GaussRule& g = detail::gauss_rule(qp);
    const double half = 0.5 * (ps.ub - ps.ua);
    const double mid = 0.5 * (ps.ub + ps.ua);
    const double sgn = piece.reverse ? -1.0 : 1.0;
    double plen = 0.0;
    const size_t first = c.z.size();
    for (int k = 0; k < qp; ++k) {
      const int kk = piece.reverse ? qp - 1 - k : k;
      const double u = mid + half * g.x[static_cast<size_t>(kk)];
      const cplx d = piece.dzdu(u);
      c.z.push_back(piece.z(u));
      c.dz.push_back(sgn * d * (g.w[static_cast<size_t>(kk)] * half));
      c.dz_coarse.push_back(sgn * d * (g.wc[static_cast<size_t>(kk)] * half));
      c.arclen.push_back(std::abs(c.dz.back()));
      plen += c.arclen.back();
    }
    for (size_t k = first; k < c.z.size(); ++k) c.panel_len.push_back(plen);
  }
  // mirror: lower half is the conjugate of the upper half in reverse order
  for (int j = M - 1; j >= 0; --j) {
    const size_t s = static_cast<size_t>(j);
    c.z.push_back(std::conj(c.z[s]));
    c.dz.push_back(-std::conj(c.dz[s]));
    c.dz_coarse.push_back(-std::conj(c.dz_coarse[s]));
    c.arclen.push_back(c.arclen[s]);
    c.panel_len.push_back(c.panel_len[s]);
  }
  c.partner.resize(static_cast<size_t>(N));
  for (int j = 0; j < N; ++j) c.partner[static_cast<size_t>(j)] = N - 1 - j;
  c.s.resize(static_cast<size_t>(N));
  double acc = 0.0;
  for (size_t j = 0; j < static_cast<size_t>(N); ++j) {
    c.s[j] = acc + 0.5 * c.arclen[j];
    acc += c.arclen[j];
  }
  return c;
}

}  // namespace

Contour build_contour(const ParabolicDomain& dom, double T_max, int N, const ContourOptions& opt) {
  if (N < 64) throw Error(ErrorKind::Geometry, "at least 64 nodes are required", N);
  if (N % 2 != 0) throw Error(ErrorKind::Geometry, "node count must be even", N);
  const WeightFamily& w = dom.weight;
  const double mu = dom.mu;
  const double R = dom.R;
  const bool even = dom.domain_case() == DomainCase::EvenOnR;
  const double focus = std::max(opt.focus, R);

  auto branch_scale = [&, mu, focus](double t) {
    const double at = std::abs(t);
    return mu * w.phi_star(at) + 0.5 * std::max(0.0, at - focus);
  };
  auto arc_piece = [R](double th0, double th1) {
    Piece p;
    p.z = [R](double th) { return std::polar(R, th); };
    p.dzdu = [R](double th) { return I_UNIT * std::polar(R, th); };
    p.scale = [R](double) { return 0.5 * R; };
    p.a = th0;
    p.b = th1;
    return p;
  };
  // sx = +1: right branch traversed inward, sx = -1: left branch outward.
  auto branch_piece = [&](double sx, double t_a) {
    Piece p;
    p.z = [&dom, sx](double t) { return cplx(sx * t, dom.mu * dom.weight.phi_star(t)); };
    p.dzdu = [&dom, sx](double t) { return cplx(sx, dom.mu * dom.weight.dphi(t)); };
    p.scale = branch_scale;
    p.a = t_a;
    p.b = T_max;
    p.reverse = sx > 0.0;
    p.graded = true;
    p.h0 = std::max(1.0e-3, 0.25 * branch_scale(t_a));
    return p;
  };

  Contour c;
  const cplx far = dom.branch(T_max);
  if (std::abs(far) <= R) {
    // disc swallows the truncated branches
    c = assemble({arc_piece(0.0, PI)}, N, opt.panel_order, true);
  } else {
    std::vector<Piece> pieces;
    const bool junction = mu * w.phi(0.0) < R;
    const double t_j = junction ? junction_abscissa(dom) : 0.0;
    if (T_max <= t_j) throw Error(ErrorKind::Geometry, "T_max does not clear the junction", T_max);
    pieces.push_back(branch_piece(1.0, t_j));
    if (junction) {
      const double th = std::arg(dom.branch(t_j));
      pieces.push_back(arc_piece(th, even ? PI - th : PI));
    } else if (!even) {
      Piece seg;
      seg.z = [](double y) { return cplx(0.0, y); };
      seg.dzdu = [](double) { return I_UNIT; };
      const double top = mu * w.phi(0.0);
      seg.scale = [top](double) { return 0.5 * top; };
      seg.a = R;
      seg.b = top;
      seg.reverse = true;
      if (top - R > 1.0e-12 * top) pieces.push_back(seg);
      pieces.push_back(arc_piece(0.5 * PI, PI));
    }
    if (even) pieces.push_back(branch_piece(-1.0, t_j));
    c = assemble(pieces, N, opt.panel_order, false);
    const int last = c.size() - 1;
    const int M = c.size() / 2;
    const double tail = ray_tail_abs(dom, T_max);
    c.ends.push_back({far, 0, true, tail});
    if (even) {
      const cplx left = dom.branch(-T_max);
      c.ends.push_back({left, M - 1, false, tail});
      c.ends.push_back({std::conj(left), M, true, tail});
    }
    c.ends.push_back({std::conj(far), last, false, tail});
  }
  c.T_max = T_max;
  c.tail_bound = tail_bound_for(dom, T_max);
  return c;
}

Contour circle_contour(double center, double radius, int N) {
  Piece p;
  p.z = [center, radius](double th) { return center + std::polar(radius, th); };
  p.dzdu = [radius](double th) { return I_UNIT * std::polar(radius, th); };
  p.scale = [radius](double) { return radius; };
  p.a = 0.0;
  p.b = PI;
  Contour c = assemble({p}, N, 0, true);
  c.T_max = center + radius;
  c.tail_bound = 0.0;
  return c;
}

cplx winding_number(const Contour& c, cplx w) {
  cplx acc = 0.0;
  for (size_t j = 0; j < c.z.size(); ++j) acc += c.dz[j] / (c.z[j] - w);
  const size_t ne = c.ends.size();
  for (size_t k = 0; k < ne; ++k) {
    const ContourEnd& a = c.ends[k];
    if (a.incoming) continue;
    const ContourEnd& b = c.ends[(k + 1) % ne];
    acc += std::log((b.point - w) / (a.point - w));
  }
  return acc / (2.0 * PI * I_UNIT);
}

namespace {

// Keeps probes at least 1.5 local node spacings and 0.4 local panel lengths
// away from every node.
bool probe_clear(const Contour& c, cplx p) {
  for (size_t j = 0; j < c.z.size(); ++j) {
    if (std::abs(p - c.z[j]) < std::max(1.5 * c.arclen[j], 0.4 * c.panel_len[j])) return false;
  }
  return true;
}

}  // namespace

ProbeSet make_probes(const Contour& c, const std::function<Membership(cplx)>& side_of, int count) {
  ProbeSet ps;
  const int M = c.size() / 2;
  if (M == 0) return ps;
  double rmin = std::numeric_limits<double>::infinity();
  for (int j = 0; j < M; ++j) rmin = std::min(rmin, std::abs(c.z[static_cast<size_t>(j)]));
  std::vector<int> cand;
  for (int j = 0; j < M; ++j) {
    if (std::abs(c.z[static_cast<size_t>(j)]) <= 8.0 * std::max(rmin, 1.0e-12)) cand.push_back(j);
  }
  const int pairs = std::max(1, count / 2);
  for (int k = 0; k < pairs; ++k) {
    const size_t idx = static_cast<size_t>(cand[static_cast<size_t>(
        std::min<size_t>(cand.size() - 1, (2 * static_cast<size_t>(k) + 1) * cand.size() / (2 * static_cast<size_t>(pairs))))]);
    const cplx zj = c.z[idx];
    const cplx nin = I_UNIT * c.dz[idx] / std::abs(c.dz[idx]);
    for (double f : {0.5, 1.0, 0.25, 2.0, 0.125, 4.0, 0.0625}) {
      const double d = f * c.panel_len[idx];
      const cplx pin = zj + d * nin;
      const cplx pout = zj - d * nin;
      const Membership mi = side_of(pin);
      const Membership mo = side_of(pout);
      if (mi.side == Side::Interior && mo.side == Side::Exterior && mi.margin > 0.2 * d && -mo.margin > 0.2 * d &&
          probe_clear(c, pin) && probe_clear(c, pout)) {
        ps.interior.push_back(pin);
        ps.interior.push_back(std::conj(pin));
        ps.exterior.push_back(pout);
        ps.exterior.push_back(std::conj(pout));
        break;
      }
    }
  }
  return ps;
}

ProbeSet make_probes(const ParabolicDomain& dom, const Contour& c, int count) {
  ProbeSet ps = make_probes(c, [&dom](cplx z) { return membership(dom, z); }, count);
  for (cplx extra : {cplx(0.5 * dom.R, 0.0), cplx(0.0, 0.0)}) {
    if (membership(dom, extra).side == Side::Interior && probe_clear(c, extra)) ps.interior.push_back(extra);
  }
  for (cplx extra : {cplx(-1.5 * dom.R, 0.0), cplx(0.0, 2.0 * (dom.R + dom.mu * dom.weight.phi_star(0.0)))}) {
    if (membership(dom, extra).side == Side::Exterior && membership(dom, extra).margin < -0.1 * dom.R &&
        probe_clear(c, extra)) {
      ps.exterior.push_back(extra);
    }
  }
  return ps;
}

IntegralBound integral_bound(const ParabolicDomain& dom, const Contour& c, const std::vector<double>& x_grid,
                             double k) {
  if (!(k > 0.0)) throw Error(ErrorKind::Domain, "k must be positive", k);
  IntegralBound out;
  const double rho = 1.0 / (2.0 * k);
  const double sl0 = dom.mu * std::abs(dom.weight.dphi(0.0));
  const double C1 = std::sqrt(1.0 + sl0 * sl0);
  for (double x : x_grid) {
    IntegralBoundRow row;
    row.x = x;
    const double ps2 = dom.weight.phi(x);
    const double unit = rho * ps2;
    double acc = 0.0;
    for (size_t j = 0; j < c.z.size(); ++j) {
      const double term = c.arclen[j] / std::norm(x - c.z[j]);
      acc += term;
      const double re = c.z[j].real();
      if (std::abs(re) <= 2.0 * dom.R) {
        row.near_part += term;
        continue;
      }
      const double d = std::abs(re - x);
      const size_t n = d <= unit ? 0 : static_cast<size_t>(std::ceil(std::log2(d / unit)));
      if (row.dyadic.size() <= n) row.dyadic.resize(n + 1, 0.0);
      row.dyadic[n] += term;
    }
    for (const ContourEnd& e : c.ends) acc += e.tail_abs * std::norm(e.point) / std::norm(e.point - x);
    for (size_t n = 1; n < row.dyadic.size(); ++n) {
      if (row.dyadic[n] > std::ldexp(C1, 3 - static_cast<int>(n)) / unit) row.dyadic_ok = false;
    }
    row.value = ps2 * acc;
    out.K_hat = std::max(out.K_hat, row.value);
    out.per_x.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double t0_of(const WeightFamily& w, double k) {
  // phi(t)/t decreases for concave phi with phi(0) > 0
  auto ratio = [&](double t) { return w.phi_star(t) / t; };
  double lo = 1.0e-12;
  double hi = 1.0;
  int guard = 0;
  while (ratio(hi) >= k) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 300) throw Error(ErrorKind::Geometry, "phi(t)/t never drops below k", k);
  }
  for (int it = 0; it < 200 && hi - lo > 1.0e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ratio(mid) < k ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

ConstantsBundle derive_constants(const SystemTriple& sys, const PipelineOptions& opt) {
  const WeightFamily& w = sys.weight;
  ConstantsBundle c;
  c.ess = opt.ess;
  c.k0 = w.k0();
  c.mu0 = mu0_of(c.ess, c.k0);
  c.mu = opt.mu > 0.0 ? opt.mu : c.mu0 + 1.0;
  const PickedConstants pc = pick_constants(c.mu, c.ess, c.k0);
  c.r_prime = pc.r_prime;
  c.k = pc.k;
  c.t0 = t0_of(w, c.k);
  c.rho = 1.0 / (2.0 * c.k);
  const R0Result r0 = r0_search(c.mu, c.r_prime, w);
  c.R0 = r0.R0;
  c.t_star = r0.t_star;
  const RSearchResult rs = R_search(sys, c.mu, c.R0, c.R0 * (1.0 + 1.0e-3), opt.eps_target, opt.t_far);
  c.R = rs.R;
  c.eps = rs.eps;
  c.sigma_shrink = rs.sigma;
  c.sup_FC = rs.sup.sup_FC;
  c.sup_CF = rs.sup.sup_CF;
  c.mu1 = mu1_search(c.mu, c.R, w);
  c.ell = sys.ell;
  c.kappa0 = kappa0_of(c.ell, c.mu1, w);
  c.kappa = opt.kappa_value != 0.0 ? opt.kappa_value : opt.kappa_sign * opt.kappa_factor * c.kappa0;
  return c;
}

}  // namespace pmodel
