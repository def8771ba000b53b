// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pmodel/operator_core.hpp"

namespace pmodel {

// Omega_{mu,R} = {x in int D(phi), |y| < mu phi(x)} united with the disc |z| < R.
struct ParabolicDomain {
  double mu = 1.0;
  double R = 1.0;
  WeightFamily weight = WeightFamily::power_affine(0.5, DomainCase::HalfLine);
  bool symmetric = true;

  DomainCase domain_case() const { return weight.domain_case(); }
  // Omega_{mu - sigma, R - sigma}.
  ParabolicDomain shrunk(double sigma) const;
  // Point of the upper parabola branch above abscissa t.
  cplx branch(double t) const { return {t, mu * weight.phi_star(t)}; }
};

enum class Side { Interior, Exterior };

struct Membership {
  Side side;
  double margin;  // signed distance estimate, positive inside
};

Membership membership(const ParabolicDomain& dom, cplx z);

// |Im z| < mu1 phi_*(Re z).
bool in_star_domain(double mu1, const WeightFamily& w, cplx z);

struct ConstantsBundle {
  double ess = 0.0;
  double k0 = 0.0;
  double mu0 = 0.0;
  double mu = 0.0;
  double r_prime = 0.0;
  double k = 0.0;
  double t_star = 0.0;
  double R0 = 0.0;
  double R = 0.0;
  double eps = 0.0;
  double sigma_shrink = 0.0;
  double mu1 = 0.0;
  double ell = 0.0;
  double kappa0 = 0.0;
  double kappa = 0.0;
  double t0 = 0.0;   // phi(t)/t < k for t >= t0
  double rho = 0.0;  // 1/(2k)
  double sup_FC = 0.0;
  double sup_CF = 0.0;
};

struct ChainCheck {
  bool ok = true;
  std::string violated;  // first failing inequality, empty when ok
};

ChainCheck check_chain(const ConstantsBundle& c);

double mu0_of(double ess, double k0);

struct PickedConstants {
  double r_prime = 0.0;
  double k = 0.0;
  double slack_rk = 0.0;  // 1 - r'k
  double slack_mu = 0.0;  // 1 - r'/(mu sqrt(1 - r'^2 k^2))
  int shrink_steps = 0;
  bool verified = false;
};

inline constexpr double kPickSlack = 1.0e-3;

PickedConstants pick_constants(double mu, double ess, double k0);

// Root of t mu phi(t) / sqrt(t^2 + mu^2 phi(t)^2) = r' phi(t) on t > 0.
double cone_threshold(double mu, double r_prime, const WeightFamily& w);

struct R0Result {
  double R0 = 0.0;
  double t_star = 0.0;
};

struct DiscInclusionReport {
  long samples = 0;
  long violations = 0;
  double worst_margin = 0.0;  // smallest membership margin over disc samples
  double t_witness = 0.0;
  double angle_witness = 0.0;
};

// Samples discs B(t, r' phi(t)) on the disc boundary and interior rings.
DiscInclusionReport verify_disc_inclusion(const ParabolicDomain& dom, double r_prime, int n_discs, int n_angles);

// R0 = 1.05 sup_{|t| <= t*} (|t| + r' phi(t)), verified on 10^3 discs x 10^2 angles.
R0Result r0_search(double mu, double r_prime, const WeightFamily& w);

double kappa0_of(double ell, double mu1, const WeightFamily& w);

double mu1_search(double mu, double R, const WeightFamily& w);

struct SeparationGrid {
  int n_t = 241;
  int n_x = 241;
  double extent = 1.0e4;
};

struct SeparationReport {
  double kappa = 0.0;
  double kappa0 = 0.0;
  bool precondition_ok = false;
  // Slacks are normalised by phi(t): (|...| - ell phi(t)) / phi(t).
  double min_slack_point = 0.0;  // |t + i kappa phi(t) - z| >= ell phi(t), z in Omega_{*,mu1}
  double min_slack_curve = 0.0;  // |t + i kappa phi_*(t) - (x + i mu1 phi_*(x))| >= ell phi_*(t)
  double witness_t = 0.0;
  cplx witness_z{0.0, 0.0};
  bool pass = false;
};

// Grid scan of both separation inequalities, never throws.
SeparationReport separation_scan(double kappa, double mu1, double ell, const WeightFamily& w,
                                 const SeparationGrid& grid = {});

// Scan plus precondition kappa > kappa0. Throws on either failure.
SeparationReport separation_check(double kappa, double mu1, double ell, const WeightFamily& w,
                                  const SeparationGrid& grid = {});

// Boundary samples of Omega_{mu,R} out to t_far plus points pushed outward.
std::vector<cplx> exterior_probe_set(const ParabolicDomain& dom, double t_far);

struct NormSup {
  double sup_FC = 0.0;  // sup ||F C (A0 - z)^{-1} B||
  double sup_CF = 0.0;  // sup ||C (A0 - z)^{-1} B F||
};

NormSup exterior_norm_sup(const SystemTriple& sys, const std::vector<cplx>& probes);

struct RSearchResult {
  double R = 0.0;
  double eps = 0.0;
  double sigma = 0.0;
  NormSup sup;
  int doublings = 0;
};

inline double sigma_shrink_of(double R, double mu) { return std::min(0.05 * R, 0.05 * mu); }

// Doubles R from R_start until both norms stay below 1 - eps_target on the
// probes of Omega_{mu,R} and of the shrunk domain.
RSearchResult R_search(const SystemTriple& sys, double mu, double R0, double R_start, double eps_target,
                       double t_far);

// ---------------------------------------------------------------------------
// Contour

struct ContourEnd {
  cplx point;      // truncation point on the unbounded branch
  int node = 0;    // nearest node
  bool incoming = true;  // traversal arrives from infinity at this end
  double tail_abs = 0.0; // integral of |dz|/|z|^2 over the discarded ray
};

struct Contour {
  std::vector<cplx> z;
  std::vector<cplx> dz;         // complex quadrature increments
  std::vector<cplx> dz_coarse;  // embedded half-order rule on the same nodes
  std::vector<double> arclen;   // |dz|
  std::vector<double> s;        // arclength coordinate of each node
  std::vector<double> panel_len;
  std::vector<int> partner;     // index of the conjugate node
  std::vector<ContourEnd> ends;
  double T_max = 0.0;
  double tail_bound = 0.0;
  bool closed = false;

  int size() const { return static_cast<int>(z.size()); }
  // Integral of dz/z^2 over the discarded rays.
  cplx missing_inv_z2() const;
  // Weights w_e so that sum_e w_e h(z_{node(e)}) estimates the discarded
  // integral of an integrand h = c/z^2 + O(z^-3).
  std::vector<cplx> tail_weights() const;
};

struct ContourOptions {
  double focus = 0.0;  // spectral extent; panels keep local resolution out to here
  int panel_order = 0; // 0 picks 16 for N >= 512 and 8 otherwise
};

double tail_bound_for(const ParabolicDomain& dom, double T_max);

// Smallest T (by fixed point then doubling) with tail_bound_for(dom, T) <= target.
double tmax_for_tail(const ParabolicDomain& dom, double target);

// Junction abscissa t > 0 with |t + i mu phi(t)| = R, bisection to 1e-10.
double junction_abscissa(const ParabolicDomain& dom);

// Gamma = boundary of Omega_int with Omega_int on the left, truncated at T_max.
// N must be even; nodes come in conjugate pairs.
Contour build_contour(const ParabolicDomain& dom, double T_max, int N, const ContourOptions& opt = {});

// Positively oriented circle |z - center| = radius.
Contour circle_contour(double center, double radius, int N);

// (1/2 pi i) of the contour integral of dz/(z - w), the truncated rays closed
// by vertical segments.
cplx winding_number(const Contour& c, cplx w);

struct ProbeSet {
  std::vector<cplx> interior;
  std::vector<cplx> exterior;
};

ProbeSet make_probes(const Contour& c, const std::function<Membership(cplx)>& side_of, int count = 8);
ProbeSet make_probes(const ParabolicDomain& dom, const Contour& c, int count = 8);

struct IntegralBoundRow {
  double x = 0.0;
  double value = 0.0;              // psi(x)^2 int |dl| / |x - l|^2
  std::vector<double> dyadic;      // contributions of I_0, I_1, ... (|Re l| >= 2R)
  double near_part = 0.0;          // contribution of |Re l| <= 2R
  bool dyadic_ok = true;           // I_n <= 2^{3-n} C1 / (rho phi(x)) for n >= 1
};

struct IntegralBound {
  double K_hat = 0.0;
  std::vector<IntegralBoundRow> per_x;
};

IntegralBound integral_bound(const ParabolicDomain& dom, const Contour& c, const std::vector<double>& x_grid,
                             double k);

// ---------------------------------------------------------------------------
// Constants pipeline

struct PipelineOptions {
  double ess = 0.0;
  double mu = 0.0;            // <= 0 selects mu0 + 1
  double eps_target = 0.1;
  double kappa_factor = 1.05;
  int kappa_sign = 1;
  double kappa_value = 0.0;   // nonzero overrides kappa_sign * kappa_factor * kappa0
  double t_far = 1.0e4;       // probe extent for R_search
};

// mu0 -> (r', k) -> R0 -> R, eps, sigma -> mu1 -> kappa0 -> kappa.
ConstantsBundle derive_constants(const SystemTriple& sys, const PipelineOptions& opt);

}  // namespace pmodel
