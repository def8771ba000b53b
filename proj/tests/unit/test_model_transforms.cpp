// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "../support/fixtures.hpp"
#include "../support/gen.hpp"
#include "../support/oracles.hpp"
#include "pmodel/verify_harness.hpp"

using namespace pmodel;

namespace {

cplx lower(oracle::lcplx v) { return {static_cast<double>(v.real()), static_cast<double>(v.imag())}; }

const Pipeline& scalar_pipeline() {
  static const Pipeline p = build_pipeline(fixtures::scalar_scenario(1024));
  return p;
}

const Pipeline& fixture_pipeline() {
  static const Pipeline p = build_pipeline(fixtures::fixture_scenario(1024));
  return p;
}

CharFunEvaluator scalar_kappa1() {
  const Pipeline& p = scalar_pipeline();
  return CharFunEvaluator(p.sys, p.constants, 1.0);
}

SystemTriple diagonal_system(double kappa) {
  const auto w = WeightFamily::power_affine(0.5, DomainCase::HalfLine);
  return build_system(SpectralDiagonal::make({1.0, 4.0, 9.0}, DomainCase::HalfLine), w, Mat::Zero(3, 3), kappa, 1.0);
}

double rel(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace

TEST_CASE("observation of the scalar system") {
  const SystemTriple s = fixtures::scalar_system();
  Vec x(1);
  x << 1.0;
  const GridFunction f = obs_transform(s, x, {0.0});
  // Quoted to five digits from rounded intermediates; the exact value is -0.238356-0.794519i.
  CHECK(std::abs(f.values(0, 0) - cplx(-0.23836, -0.79455)) < 5e-5);
  CHECK(std::abs(f.values(0, 0) - cplx(-0.238356, -0.794519)) < 1e-6);
  CHECK(std::abs(f.values(0, 0) - lower(oracle::scalar_obs(2.0L, 0.5L, 0.2L, 0.0L, 1.0L))) < 1e-14);
  const GridFunction z = obs_transform(s, Vec::Zero(1), {0.0, cplx(1.0, 5.0)});
  CHECK(z.values.norm() == 0.0);
}

TEST_CASE("observation of a diagonal system") {
  const SystemTriple s = diagonal_system(1.0);
  const cplx z(3.0, 2.0);
  for (int j = 0; j < 3; ++j) {
    const GridFunction f = obs_transform(s, Vec::Unit(3, j), {z});
    for (int i = 0; i < 3; ++i) {
      const cplx ref = i == j ? I_UNIT * s.psi_t(j) / (z - s.A0.t(j)) : cplx(0.0);
      CHECK(std::abs(f.values(i, 0) - ref) < 1e-15);
    }
  }
}

TEST_CASE("batched observation matches single solves") {
  const Pipeline& p = fixture_pipeline();
  gen::Gen g(41);
  Mat X(3, 4);
  for (int k = 0; k < 4; ++k) X.col(k) = g.cvec(3);
  const std::vector<cplx> pts = {cplx(-3.0, 1.0), cplx(0.0, 8.0), cplx(20.0, -30.0)};
  const std::vector<Mat> batch = obs_samples_batch(p.sys.A, p.sys.C(), X, pts);
  for (int k = 0; k < 4; ++k) CHECK(rel(batch[static_cast<size_t>(k)], obs_samples(p.sys.A, p.sys.C(), X.col(k), pts)) < 1e-14);
}

TEST_CASE("characteristic function of the scalar system") {
  const CharFunEvaluator ev = scalar_kappa1();
  const cplx d = ev.delta(0.0)(0, 0);
  CHECK(std::abs(d - cplx(0.363207, -0.353774)) < 1e-6);
  CHECK(std::abs(d - lower(oracle::scalar_delta(2.0L, 0.5L, 0.2L, 1.0L, 0.0L))) < 1e-14);
  const cplx di = ev.delta_inverse(0.0, Region::Any)(0, 0);
  CHECK(std::abs(di - cplx(1.412844, 1.376147)) < 1e-6);
  CHECK(std::abs(di - lower(oracle::scalar_delta_inverse(2.0L, 0.5L, 0.2L, 1.0L, 0.0L))) < 1e-14);
  CHECK(std::abs(d * di - 1.0) < 1e-12);
}

TEST_CASE("characteristic function with kappa = 0 is the identity") {
  const Pipeline& p = fixture_pipeline();
  const CharFunEvaluator ev(p.sys, p.constants, 0.0);
  for (cplx z : {cplx(-3.0, 0.0), cplx(5.0, 40.0), cplx(0.5, -0.1)}) CHECK(rel(ev.delta(z), Mat::Identity(3, 3)) < 1e-15);
}

TEST_CASE("characteristic function of a diagonal system") {
  const SystemTriple s = diagonal_system(20.0);
  ConstantsBundle k;
  k.mu = 1.0;
  k.R = 2.68;
  k.ell = 1.0;
  k.sigma_shrink = 0.05;
  k.kappa = 20.0;
  const CharFunEvaluator ev(s, k, 20.0);
  const cplx z(-2.0, 7.0);
  const Mat d = ev.delta(z);
  const Mat di = ev.delta_inverse(z);
  for (int j = 0; j < 3; ++j) {
    const double t = s.A0.t(j);
    const cplx num = t - z;
    const cplx den = t + I_UNIT * 20.0 * s.phi_t(j) - z;
    CHECK(std::abs(d(j, j) - num / den) < 1e-14);
    CHECK(std::abs(di(j, j) - den / num) < 1e-13);
  }
  CHECK(std::abs(d(0, 1)) == 0.0);
}

TEST_CASE("both formulas for delta agree on the contour") {
  const Pipeline& p = fixture_pipeline();
  for (int j = 0; j < p.gamma.size(); j += 7) {
    const cplx z = p.gamma.z[static_cast<size_t>(j)];
    CHECK(rel(p.ev->delta(z), p.ev->delta_alt(z)) < 1e-10);
  }
}

TEST_CASE("delta inverse tends to the identity far out") {
  const Pipeline& p = fixture_pipeline();
  const cplx far = p.gamma.z.front();
  CHECK(std::abs(far) > 1e5);
  CHECK(rel(p.ev->delta_inverse(far), Mat::Identity(3, 3)) < 1e-2);
  CHECK(rel(p.ev->delta_inverse(10.0 * far), Mat::Identity(3, 3)) < rel(p.ev->delta_inverse(far), Mat::Identity(3, 3)));
}

TEST_CASE("delta inverse refuses the shrunk interior") {
  const Pipeline& p = fixture_pipeline();
  try {
    (void)p.ev->delta_inverse(cplx(4.0, 0.0));
    FAIL("expected Domain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Domain);
  }
  CHECK_NOTHROW(p.ev->delta_inverse(cplx(4.0, 0.0), Region::Any));
}

TEST_CASE("inverse identity at every contour node") {
  const Pipeline& p = fixture_pipeline();
  for (int j = 0; j < p.gamma.size(); ++j) {
    const cplx z = p.gamma.z[static_cast<size_t>(j)];
    const Mat d = p.ev->delta(z);
    const Mat di = p.ev->delta_inverse(z);
    const double cond = opnorm(d) * opnorm(di);
    CHECK((d * di - Mat::Identity(3, 3)).norm() <= 1e-10 * cond);
  }
}

TEST_CASE("H at sample points") {
  const SystemTriple zero = diagonal_system(1.0);
  CHECK(rel(H_eval(zero, cplx(-3.0, 1.0)), Mat::Identity(3, 3)) == 0.0);
  const SystemTriple s = fixtures::scalar_system();
  CHECK(std::abs(H_eval(s, -3.0)(0, 0) - cplx(1.0, 0.12)) < 1e-14);
  CHECK(std::abs(H_eval(s, -3.0)(0, 0) - lower(oracle::scalar_H(2.0L, 0.5L, 0.2L, -3.0L))) < 1e-14);
}

TEST_CASE("H stays close to the identity on exterior probes") {
  const Pipeline& p = fixture_pipeline();
  const double eps = p.constants.eps;
  for (const cplx& z : exterior_probe_set(p.domain, 1.0e4)) {
    const Mat H = H_eval(p.sys, z);
    CHECK(opnorm(H - Mat::Identity(3, 3)) <= 1.0 - eps + 1e-12);
    CHECK(opnorm(H.inverse()) <= 1.0 / eps);
  }
}

TEST_CASE("H factors the unperturbed observation") {
  const Pipeline& p = fixture_pipeline();
  SystemTriple s0 = p.sys;
  s0.A = s0.A0mat();
  gen::for_all(42, 20, [&](gen::Gen& g, int) {
    const Vec x = g.cvec(3);
    const cplx z = p.probes.exterior[static_cast<size_t>(g.integer(0, static_cast<int>(p.probes.exterior.size()) - 1))];
    const Vec lhs = obs_transform(s0, x, {z}).values.col(0);
    const Vec rhs = H_eval(p.sys, z) * obs_transform(p.sys, x, {z}).values.col(0);
    CHECK((lhs - rhs).norm() <= 1e-10 * std::max(1.0, lhs.norm()));
  });
}

TEST_CASE("transfer function difference law") {
  const Pipeline& p = fixture_pipeline();
  const Mat A = p.sys.A;
  const Mat B = p.sys.B();
  const Mat C = p.sys.C();
  const double kappa = p.ev->kappa();
  gen::for_all(43, 20, [&](gen::Gen& g, int) {
    const cplx z(g.uniform(-30.0, -4.0), g.uniform(-20.0, 20.0));
    const cplx w(g.uniform(5.0, 50.0), g.uniform(60.0, 120.0));
    const Mat Iz = (z * Mat::Identity(3, 3) - A).inverse();
    const Mat Iw = (w * Mat::Identity(3, 3) - A).inverse();
    const Mat lhs = p.ev->Phi(z) - p.ev->Phi(w);
    const Mat rhs = -kappa * C * (Iz - Iw) * B;
    CHECK(rel(lhs, rhs) < 1e-10);
  });
}

TEST_CASE("truncated multiplication of the scalar observation") {
  const Pipeline& p = scalar_pipeline();
  Vec x(1);
  x << 1.0;
  const ModelElement e = observe(p.space, p.sys, x);
  CHECK(e.in_space());
  const TruncatedMult m = truncated_mult(e, p.space);
  CHECK(std::abs(m.c(0) - cplx(0.0, std::sqrt(3.0))) < 1e-12);
  const Mat expect = p.sys.A(0, 0) * e.f.values;
  CHECK(rel(m.shifted.f.values, expect) < 1e-8);

  ModelElement bare = e;
  bare.origin.reset();
  const TruncatedMult fit = truncated_mult(bare, p.space);
  CHECK(std::abs(fit.c(0) - cplx(0.0, std::sqrt(3.0))) < 1e-6);
}

TEST_CASE("truncated multiplication of zero") {
  const Pipeline& p = scalar_pipeline();
  GridFunction z;
  z.values = Mat::Zero(1, p.gamma.size());
  z.side = SideHint::ExtAnalytic;
  z.decays = true;
  const ModelElement e = make_element(p.space, z);
  const TruncatedMult m = truncated_mult(e, p.space);
  CHECK(m.c.norm() == 0.0);
  CHECK(m.shifted.f.values.norm() == 0.0);
}

TEST_CASE("truncated multiplication intertwines A") {
  const Pipeline& p = fixture_pipeline();
  gen::for_all(44, 20, [&](gen::Gen& g, int) {
    const Vec x = g.cvec(3);
    const ModelElement e = observe(p.space, p.sys, x, false);
    const TruncatedMult m = truncated_mult(e, p.space);
    const GridFunction ax = obs_transform(p.sys, p.sys.A * x, p.gamma.z);
    CHECK((m.c - p.sys.C() * x).norm() <= 1e-12 * x.norm());
    for (int j = 0; j < p.gamma.size(); ++j) {
      const auto u = static_cast<size_t>(j);
      const Vec lhs = p.gamma.z[u] * e.f.values.col(j) - p.sys.C() * x;
      CHECK((lhs - ax.values.col(j)).norm() <= 1e-10 * std::max(1.0, ax.values.col(j).norm()));
    }
  });
}

TEST_CASE("observed basis vectors belong to the model space") {
  const Pipeline& p = fixture_pipeline();
  for (int j = 0; j < 3; ++j) {
    const ModelElement e = observe(p.space, p.sys, Vec::Unit(3, j));
    CHECK(e.in_space());
    CHECK(e.ext_membership->residual <= kMembershipTol);
    CHECK(e.int_membership->residual <= kMembershipTol);
    for (int k = 0; k < p.gamma.size(); ++k) {
      const Vec ref = p.space.delta[static_cast<size_t>(k)] * e.f.values.col(k);
      CHECK((e.f_tilde.values.col(k) - ref).norm() <= 1e-14 * std::max(1.0, ref.norm()));
    }
  }
}

TEST_CASE("model resolvent at exterior points") {
  const Pipeline& p = fixture_pipeline();
  gen::for_all(45, 5, [&](gen::Gen& g, int) {
    const Vec x = g.cvec(3);
    const cplx lam = random_exterior_pole(p.domain, p.gamma, g.rng());
    const ModelElement e = observe(p.space, p.sys, x, false);
    const ModelElement r = model_resolvent(e, lam, *p.ev, p.space);
    const GridFunction ref = obs_transform(p.sys, resolvent(p.sys.A, lam) * x, p.gamma.z);
    CHECK(rel(r.f.values, ref.values) < 1e-8);

    ModelElement bare = e;
    bare.origin.reset();
    const ModelElement rb = model_resolvent(bare, lam, *p.ev, p.space);
    CHECK(rel(rb.f.values, ref.values) < 1e-6);

    // (M - lambda) applied to the resolvent gives back the element.
    const TruncatedMult m = truncated_mult(r, p.space);
    const Mat back = m.shifted.f.values - lam * r.f.values;
    CHECK(rel(back, e.f.values) < 1e-8);
  });
}

TEST_CASE("model resolvent at an eigenvalue") {
  const Pipeline& p = fixture_pipeline();
  Eigen::ComplexEigenSolver<Mat> es(p.sys.A);
  const ModelElement e = observe(p.space, p.sys, Vec::Unit(3, 0), false);
  try {
    (void)model_resolvent(e, es.eigenvalues()(1), *p.ev, p.space);
    FAIL("expected Spectral");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::Spectral);
  }
}

TEST_CASE("model resolvent of a rational sample") {
  const Pipeline& p = scalar_pipeline();
  const cplx a(3.0, 0.5);
  const cplx u(0.7, -0.2);
  const cplx lam(-4.0, 1.0);
  GridFunction f;
  f.values.resize(1, p.gamma.size());
  for (int j = 0; j < p.gamma.size(); ++j) f.values(0, j) = u / (p.gamma.z[static_cast<size_t>(j)] - a);
  f.side = SideHint::ExtAnalytic;
  f.decays = true;
  const ModelElement e = make_element(p.space, f, false);
  const ModelElement r = model_resolvent(e, lam, *p.ev, p.space);
  for (int j = 0; j < p.gamma.size(); j += 5) {
    const cplx z = p.gamma.z[static_cast<size_t>(j)];
    const cplx ref = -u / ((z - a) * (lam - a));
    CHECK(std::abs(r.f.values(0, j) - ref) <= 1e-6 * std::max(1e-3, std::abs(ref)));
  }
}

TEST_CASE("control transform of the scalar system") {
  const Pipeline& p = scalar_pipeline();
  RationalVector f;
  f.poles = {-3.0};
  f.residues = {Vec::Ones(1)};
  const Vec w = ctrl_transform(p.sys, f, p.domain);
  CHECK(std::abs(w(0) - cplx(0.34150, -0.04098)) < 1e-5);
  CHECK(std::abs(w(0) - std::sqrt(3.0) / cplx(5.0, 0.6)) < 1e-15);

  RationalVector g = f;
  g.poles.push_back(cplx(-5.0, 2.0));
  g.residues.push_back(Vec::Constant(1, cplx(0.0, 2.0)));
  RationalVector h;
  h.poles = {cplx(-5.0, 2.0)};
  h.residues = {Vec::Constant(1, cplx(0.0, 2.0))};
  CHECK(std::abs(ctrl_transform(p.sys, g, p.domain)(0) - w(0) - ctrl_transform(p.sys, h, p.domain)(0)) < 1e-15);

  RationalVector bad;
  bad.poles = {cplx(2.0, 0.0)};
  bad.residues = {Vec::Ones(1)};
  CHECK_THROWS_AS(ctrl_transform(p.sys, bad, p.domain), Error);
}

TEST_CASE("control transform by quadrature matches the rational formula") {
  const Pipeline& p = fixture_pipeline();
  gen::for_all(46, 20, [&](gen::Gen& g, int) {
    RationalVector f;
    const int terms = g.integer(1, 3);
    for (int k = 0; k < terms; ++k) {
      f.poles.push_back(random_exterior_pole(p.domain, p.gamma, g.rng()));
      f.residues.push_back(g.cvec(3));
    }
    const Vec a = ctrl_transform(p.sys, f, p.domain);
    const Vec b = ctrl_transform(p.sys, f.sample(p.gamma), p.gamma);
    CHECK((a - b).norm() <= 1e-6 * std::max(1.0, a.norm()));
  });
}

TEST_CASE("rational calculus") {
  const Pipeline& s = scalar_pipeline();
  RationalScalar one;
  one.c0 = 1.0;
  CHECK(rel(rational_calculus(s.sys, one, CalculusMode::Direct, s.domain), Mat::Identity(1, 1)) == 0.0);

  RationalScalar q;
  q.poles = {-3.0};
  q.residues = {1.0};
  const cplx v = rational_calculus(s.sys, q, CalculusMode::Direct, s.domain)(0, 0);
  CHECK(std::abs(v - cplx(0.19716, -0.02366)) < 1e-5);
  CHECK(std::abs(v - 1.0 / cplx(5.0, 0.6)) < 1e-15);
  const cplx vc = rational_calculus(s.sys, q, CalculusMode::Contour, s.domain, &s.gamma)(0, 0);
  CHECK(std::abs(v - vc) < 1e-8 * std::abs(v));

  RationalScalar in;
  in.poles = {cplx(2.0, 0.1)};
  in.residues = {1.0};
  CHECK_THROWS_AS(rational_calculus(s.sys, in, CalculusMode::Direct, s.domain), Error);
}

TEST_CASE("rational calculus is additive, mode independent and K-bounded") {
  const Pipeline& p = fixture_pipeline();
  const ExactnessResult ex = check_exactness(p.sys, p.gamma);
  gen::for_all(47, 20, [&](gen::Gen& g, int) {
    RationalScalar q1;
    RationalScalar q2;
    q1.poles = {random_exterior_pole(p.domain, p.gamma, g.rng())};
    q1.residues = {g.cnormal()};
    q2.poles = {random_exterior_pole(p.domain, p.gamma, g.rng())};
    q2.residues = {g.cnormal()};
    q2.c0 = g.cnormal();
    RationalScalar sum = q1;
    sum.c0 = q2.c0;
    sum.poles.push_back(q2.poles[0]);
    sum.residues.push_back(q2.residues[0]);
    const Mat a = rational_calculus(p.sys, q1, CalculusMode::Direct, p.domain);
    const Mat b = rational_calculus(p.sys, q2, CalculusMode::Direct, p.domain);
    const Mat ab = rational_calculus(p.sys, sum, CalculusMode::Direct, p.domain);
    CHECK(rel(ab, a + b) < 1e-14);
    const Mat abc = rational_calculus(p.sys, sum, CalculusMode::Contour, p.domain, &p.gamma);
    CHECK(rel(abc, ab) < 1e-8);
    double sup = std::abs(sum.c0);
    for (const cplx& z : p.gamma.z) sup = std::max(sup, std::abs(sum(z)));
    CHECK(opnorm(ab) <= ex.K * sup);
  });
}
