// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "../support/fixtures.hpp"
#include "../support/gen.hpp"
#include "pmodel/verify_harness.hpp"

using namespace pmodel;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

Scenario zero_perturbation(int nodes) {
  Scenario s = fixtures::fixture_scenario(nodes);
  s.name = "zero-F";
  s.F = Mat::Zero(3, 3);
  return s;
}

const Report& fixture_report() {
  static const Report r = run_scenario(fixtures::fixture_scenario());
  return r;
}

}  // namespace

TEST_CASE("scenario JSON round trip") {
  Scenario s = fixtures::fixture_scenario(1024);
  s.tolerances["duality"] = 1e-5;
  s.checks = {"duality", "kernel"};
  s.kappa_sign = -1;
  const std::string a = scenario_to_json(s);
  const Scenario t = scenario_from_json(a);
  CHECK(scenario_to_json(t) == a);
  CHECK(t.quad.nodes == 1024);
  CHECK(t.kappa_sign == -1);
  CHECK(t.tolerances.at("duality") == 1e-5);
}

TEST_CASE("scenario parsing of the documented keys") {
  const Scenario s = scenario_from_json(R"({
    "name": "parsed", "seed": 3,
    "spectrum": {"n": 4, "t_min": 1, "t_max": 100},
    "domain_case": "even",
    "weight": {"family": "power", "alpha": 0.25},
    "F": {"norm": 0.2},
    "mu": "auto", "ell": 2,
    "kappa": {"sign": -1, "factor": 1.1},
    "quadrature": {"nodes": 512, "tail_target": 1e-6},
    "trials": {"duality": 5}
  })");
  CHECK(s.name == "parsed");
  CHECK(s.spectrum.n == 4);
  CHECK(s.domain_case == DomainCase::EvenOnR);
  CHECK(s.alpha == 0.25);
  CHECK(s.F_norm == 0.2);
  CHECK(s.mu <= 0.0);
  CHECK(s.kappa_factor == 1.1);
  CHECK(s.quad.nodes == 512);
  CHECK(s.trials.duality == 5);
}

TEST_CASE("scenario validation") {
  auto bad = [](const std::string& text) {
    try {
      (void)scenario_from_json(text);
    } catch (const Error& e) {
      return e.kind() == ErrorKind::Config;
    }
    return false;
  };
  CHECK(bad(R"({"spectrum": {"values": [1, 2]}, "weight": {"alpha": 0.6}})"));
  CHECK(bad(R"({"spectrum": {"values": [1, 2]}, "quadrature": {"nodes": 1023}})"));
  CHECK(bad(R"({"spectrum": {"values": [1, 2]}, "tolerances": {"no_such_check": 1}})"));
  CHECK(bad(R"({"spectrum": {"values": [1, 2]}, "checks": ["no_such_check"]})"));
  CHECK(bad(R"({"spectrum": {}})"));
  CHECK(bad(R"({"spectrum": {"values": [-1, 2]}})"));
  CHECK(bad("not json"));
}

TEST_CASE("every check passes on the fixture") {
  const Report& r = fixture_report();
  CHECK(r.abort_reason.empty());
  REQUIRE(r.checks.size() == check_names().size());
  for (const CheckResult& c : r.checks) {
    CAPTURE(c.name);
    CAPTURE(c.detail);
    CHECK(c.pass);
  }
  CHECK(r.all_pass());
}

TEST_CASE("pass flags follow the recorded relation") {
  for (const CheckResult& c : fixture_report().checks) {
    CAPTURE(c.name);
    CHECK(c.pass == relation_holds(c.residual, c.relation, c.tolerance));
  }
  CHECK(relation_holds(1.0, "<=", 1.0));
  CHECK_FALSE(relation_holds(1.0, "<", 1.0));
  CHECK(relation_holds(2.0, ">", 1.0));
  CHECK_FALSE(relation_holds(std::nan(""), "<=", 1.0));
}

TEST_CASE("vanishing perturbation passes every check") {
  const Report r = run_scenario(zero_perturbation(1024));
  for (const CheckResult& c : r.checks) {
    CAPTURE(c.name);
    CAPTURE(c.detail);
    CHECK(c.pass);
  }
}

TEST_CASE("scalar scenario echoes the unit-kappa symbol") {
  const Report r = run_scenario(fixtures::scalar_scenario(1024));
  CHECK(r.all_pass());
  const auto d = r.echo.at("delta_kappa1_at_zero");
  CHECK(std::abs(cplx(d.first, d.second) - cplx(0.363207, -0.353774)) < 1e-6);
  const auto di = r.echo.at("delta_inverse_kappa1_at_zero");
  CHECK(std::abs(cplx(di.first, di.second) - cplx(1.412844, 1.376147)) < 1e-6);
}

TEST_CASE("half of kappa0 breaks the separation check") {
  Scenario s = fixtures::fixture_scenario(512);
  s.kappa_factor = 0.5;
  s.checks = {"separation"};
  const Report r = run_scenario(s);
  const CheckResult* c = r.find("separation");
  REQUIRE(c != nullptr);
  CHECK_FALSE(c->pass);
  CHECK(c->detail.find("|t + i kappa phi(t) - z| >= ell phi(t)") != std::string::npos);
  CHECK_FALSE(r.all_pass());
}

TEST_CASE("mu below mu0 aborts the pipeline") {
  Scenario s = fixtures::fixture_scenario(512);
  s.ess = 0.6;
  s.alpha = 0.5;
  s.mu = 0.7;
  const Report r = run_scenario(s);
  CHECK(r.abort_reason.find("mu must exceed mu0") != std::string::npos);
  CHECK_FALSE(r.all_pass());
}

TEST_CASE("tightened tolerances turn a check red") {
  Scenario s = fixtures::fixture_scenario(512);
  s.checks = {"duality"};
  s.trials.duality = 5;
  s.tolerances["duality"] = 1e-30;
  const Report r = run_scenario(s);
  REQUIRE(r.find("duality") != nullptr);
  CHECK_FALSE(r.find("duality")->pass);
}

TEST_CASE("frame bounds of a one dimensional system") {
  const auto w = WeightFamily::power_affine(0.5, DomainCase::HalfLine);
  const SystemTriple s = build_system(SpectralDiagonal::make({2.0}, DomainCase::HalfLine), w, Mat::Zero(1, 1), 1.0, 1.0);
  ParabolicDomain d;
  d.mu = 1.0;
  d.R = 2.68;
  d.weight = w;
  const double T = tmax_for_tail(d, 1e-7);
  const Contour c = build_contour(d, T, 1024, {2.0, 0});
  const ExactnessResult e = check_exactness(s, c);
  CHECK(e.frame_lower == doctest::Approx(e.frame_upper).epsilon(1e-14));
  CHECK(e.K == doctest::Approx(1.0).epsilon(1e-12));
  const double norm = e2_norm(obs_transform(s, Vec::Ones(1), c.z), c);
  GridFunction f = obs_transform(s, Vec::Ones(1), c.z);
  f.decays = true;
  CHECK(e.frame_lower == doctest::Approx(e2_norm(f, c) * e2_norm(f, c)).epsilon(1e-10));
  CHECK(norm > 0.0);

  SystemTriple twice = s;
  twice.psi_t *= 2.0;
  CHECK(check_exactness(twice, c).frame_lower == doctest::Approx(4.0 * e.frame_lower).epsilon(1e-12));

  const Contour fine = build_contour(d, T, 2048, {2.0, 0});
  CHECK(check_exactness(s, fine).frame_lower == doctest::Approx(e.frame_lower).epsilon(1e-3));
}

TEST_CASE("duality and kernel on the scalar system") {
  const Pipeline p = build_pipeline(fixtures::scalar_scenario(2048));
  CHECK(check_duality(p.sys, *p.ev, p.gamma, p.space.delta, 20, 9) <= 1e-4);
  const KernelResult k = check_kernel(p.sys, p.domain, p.gamma, p.space.delta, 20, 9);
  CHECK(k.kernel <= 1e-5);
  CHECK(k.adjointness <= 1e-6);
  CHECK(k.span_rank == 1);

  // Second slot zero.
  GridFunction g;
  g.values = Mat::Zero(1, p.gamma.size());
  const GridFunction f = obs_transform(p.sys, Vec::Ones(1), p.gamma.z);
  CHECK(std::abs(delta_pairing(f, g, p.space.delta, p.gamma).value) == 0.0);
}

TEST_CASE("duality without perturbation") {
  const Pipeline p = build_pipeline(zero_perturbation(2048));
  CHECK(check_duality(p.sys, *p.ev, p.gamma, p.space.delta, 20, 4) <= 1e-6);
}

TEST_CASE("duality and kernel residuals do not grow under refinement") {
  double dual_prev = 0.0;
  double ker_prev = 0.0;
  for (int N : {1024, 2048}) {
    const Pipeline p = build_pipeline(fixtures::fixture_scenario(N));
    const double d = check_duality(p.sys, *p.ev, p.gamma, p.space.delta, 10, 3);
    const double k = check_kernel(p.sys, p.domain, p.gamma, p.space.delta, 10, 3).kernel;
    if (N > 1024) {
      CHECK(d <= 2.0 * dual_prev + 1e-11);
      CHECK(k <= 2.0 * ker_prev + 1e-11);
    }
    dual_prev = d;
    ker_prev = k;
  }
}

TEST_CASE("spectral inclusion") {
  const Pipeline zero = build_pipeline(zero_perturbation(512));
  const SpectralInclusion a = check_spectral_inclusion(zero.sys, zero.domain);
  CHECK(a.min_margin > 0.0);
  REQUIRE(a.eigenvalues.size() == 3);
  for (const cplx& l : a.eigenvalues) CHECK(std::abs(l.imag()) < 1e-12);

  const Pipeline s = build_pipeline(fixtures::scalar_scenario(512));
  const SpectralInclusion b = check_spectral_inclusion(s.sys, s.domain);
  CHECK(std::abs(b.eigenvalues[0] - cplx(2.0, 0.6)) < 1e-14);
  CHECK(b.min_margin > 0.0);
}

TEST_CASE("seeded spectra stay inside the domain") {
  gen::for_all(51, 6, [](gen::Gen& g, int) {
    Scenario s;
    s.seed = static_cast<std::uint64_t>(g.integer(1, 1 << 30));
    s.spectrum.n = g.integer(2, 8);
    s.spectrum.t_min = 0.5;
    s.spectrum.t_max = g.uniform(5.0, 500.0);
    s.alpha = g.uniform(0.2, 0.5);
    s.F_norm = g.uniform(0.05, 0.6);
    s.quad.nodes = 256;
    const Pipeline p = build_pipeline(s);
    CHECK(check_spectral_inclusion(p.sys, p.domain).min_margin > 0.0);
  });
}

TEST_CASE("report round trip and determinism") {
  Scenario s = fixtures::fixture_scenario(512);
  s.trials = {5, 5, 5, 5, 5, 10, 10, 2};
  const Report a = run_scenario(s);
  const Report b = run_scenario(s);
  const std::string ja = report_to_json(a);
  CHECK(ja == report_to_json(b));
  CHECK(report_to_json(report_from_json(ja)) == ja);
  CHECK(render_text(report_from_json(ja)) == render_text(a));
  const auto j = nlohmann::json::parse(ja);
  CHECK(j.at("schema_version") == kReportSchemaVersion);
  CHECK_FALSE(j.contains("timing_ms"));
}

TEST_CASE("timing is recorded on request") {
  Scenario s = fixtures::fixture_scenario(256);
  s.checks = {"constants_chain"};
  s.record_timing = true;
  const auto j = nlohmann::json::parse(report_to_json(run_scenario(s)));
  CHECK(j.contains("timing_ms"));
}

TEST_CASE("emitted files") {
  const auto dir = std::filesystem::temp_directory_path() / "pmodel_emit_test";
  std::filesystem::remove_all(dir);
  Scenario s = fixtures::fixture_scenario(256);
  s.checks = {"constants_chain"};
  Report r = run_scenario(s);
  r.checks.clear();
  const ReportPaths paths = emit_report(r, dir.string());
  const auto j = nlohmann::json::parse(slurp(paths.json));
  CHECK(j.at("checks").empty());
  CHECK(j.at("constants").at("kappa").get<double>() == doctest::Approx(r.constants.kappa));
  CHECK(count_lines(slurp(paths.contour_csv)) == 256 + 1);
  CHECK(count_lines(slurp(paths.delta_csv)) == 256 + 1);
  CHECK(slurp(paths.contour_csv).rfind("re_z,im_z,re_dz,im_dz,abs_dz\n", 0) == 0);
  CHECK(count_lines(slurp(paths.eigen_csv)) == 3 + 1);
  CHECK(slurp(paths.eigen_csv).rfind("re_lambda", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("seeded pole draws respect the requested side") {
  const Pipeline p = build_pipeline(fixtures::fixture_scenario(512));
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    CHECK(membership(p.domain, random_exterior_pole(p.domain, p.gamma, rng)).side == Side::Exterior);
    CHECK(membership(p.domain, random_interior_pole(p.domain, p.gamma, rng)).side == Side::Interior);
  }
}
