// SPDX-License-Identifier: Apache-2.0
#include "pmodel/verify_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pmodel {

using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::mt19937_64 rng_for(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

cplx cnormal(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  const double re = nd(rng);
  const double im = nd(rng);
  return {re, im};
}

Vec cnormal_vec(int n, std::mt19937_64& rng) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = cnormal(rng);
  return v;
}

double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

double max_abs_t(const SystemTriple& sys) { return sys.A0.t.cwiseAbs().maxCoeff(); }

bool clear_of(const Contour& c, cplx p, double clearance) {
  for (size_t j = 0; j < c.z.size(); ++j) {
    const double local = std::max(c.panel_len[j], 2.0 * c.arclen[j]);
    if (std::abs(p - c.z[j]) < clearance * local) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// JSON helpers

double num(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

Mat mat_from_json(const json& j, int n) {
  const json& re = j.at("re");
  const json* im = j.contains("im") ? &j.at("im") : nullptr;
  if (static_cast<int>(re.size()) != n) throw Error(ErrorKind::Config, "F must have n rows");
  Mat F(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(re[static_cast<size_t>(i)].size()) != n) throw Error(ErrorKind::Config, "F must be square");
    for (int k = 0; k < n; ++k) {
      const double r = re[static_cast<size_t>(i)][static_cast<size_t>(k)].get<double>();
      const double m = im ? (*im)[static_cast<size_t>(i)][static_cast<size_t>(k)].get<double>() : 0.0;
      F(i, k) = cplx(r, m);
    }
  }
  return F;
}

json constants_json(const ConstantsBundle& c) {
  json j;
  j["ess"] = num_json(c.ess);
  j["k0"] = num_json(c.k0);
  j["mu0"] = num_json(c.mu0);
  j["mu"] = num_json(c.mu);
  j["r_prime"] = num_json(c.r_prime);
  j["k"] = num_json(c.k);
  j["t_star"] = num_json(c.t_star);
  j["R0"] = num_json(c.R0);
  j["R"] = num_json(c.R);
  j["eps"] = num_json(c.eps);
  j["sigma_shrink"] = num_json(c.sigma_shrink);
  j["mu1"] = num_json(c.mu1);
  j["ell"] = num_json(c.ell);
  j["kappa0"] = num_json(c.kappa0);
  j["kappa"] = num_json(c.kappa);
  j["t0"] = num_json(c.t0);
  j["rho"] = num_json(c.rho);
  j["sup_FC"] = num_json(c.sup_FC);
  j["sup_CF"] = num_json(c.sup_CF);
  return j;
}

ConstantsBundle constants_from_json(const json& j) {
  ConstantsBundle c;
  c.ess = num(j.at("ess"));
  c.k0 = num(j.at("k0"));
  c.mu0 = num(j.at("mu0"));
  c.mu = num(j.at("mu"));
  c.r_prime = num(j.at("r_prime"));
  c.k = num(j.at("k"));
  c.t_star = num(j.at("t_star"));
  c.R0 = num(j.at("R0"));
  c.R = num(j.at("R"));
  c.eps = num(j.at("eps"));
  c.sigma_shrink = num(j.at("sigma_shrink"));
  c.mu1 = num(j.at("mu1"));
  c.ell = num(j.at("ell"));
  c.kappa0 = num(j.at("kappa0"));
  c.kappa = num(j.at("kappa"));
  c.t0 = num(j.at("t0"));
  c.rho = num(j.at("rho"));
  c.sup_FC = num(j.at("sup_FC"));
  c.sup_CF = num(j.at("sup_CF"));
  return c;
}

json map_json(const std::map<std::string, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = num_json(v);
  return j;
}

std::map<std::string, double> map_from_json(const json& j) {
  std::map<std::string, double> m;
  for (auto it = j.begin(); it != j.end(); ++it) m[it.key()] = num(it.value());
  return m;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = {
      "constants_chain", "disc_inclusion",   "separation",           "norm_bounds",     "h_inverse",
      "spectral_inclusion", "winding",       "integral_bound",       "inverse_identity", "delta_forms",
      "admissibility",   "h_factorization",  "transfer_law",         "intertwining",    "membership_coherence",
      "model_resolvent", "duality",          "kernel",               "adjointness",     "surjectivity",
      "exactness",       "k_bound",          "plemelj",
  };
  return names;
}

std::map<std::string, double> default_tolerances() {
  return {
      {"constants_chain", 0.0},
      {"disc_inclusion", 0.0},
      {"separation", 0.0},
      {"norm_bounds", 1.0},
      {"h_inverse", 1.0},
      {"spectral_inclusion", 0.0},
      {"winding", 1.0e-6},
      {"integral_bound", 1.0e-2},
      {"inverse_identity", 1.0e-10},
      {"delta_forms", 1.0e-10},
      {"admissibility", 1.0e8},
      {"h_factorization", 1.0e-10},
      {"transfer_law", 1.0e-10},
      {"intertwining", 1.0e-10},
      {"membership_coherence", 1.0e-4},
      {"model_resolvent", 1.0e-8},
      {"duality", 1.0e-4},
      {"kernel", 1.0e-5},
      {"adjointness", 1.0e-6},
      {"surjectivity", 0.0},
      {"exactness", 1.0e-10},
      {"k_bound", 0.0},
      {"plemelj", 0.0},
      {"tol_mem", kMembershipTol},
  };
}

void validate(const Scenario& s) {
  auto bad = [](const std::string& what, double v = 0.0) { throw Error(ErrorKind::Config, what, v); };
  if (!(s.alpha > 0.0 && s.alpha <= 0.5)) bad("alpha must lie in (0, 1/2]", s.alpha);
  if (s.spectrum.values.empty()) {
    if (s.spectrum.n < 1 || s.spectrum.n > 256) bad("random spectrum needs 1 <= n <= 256", s.spectrum.n);
    if (!(s.spectrum.t_max > s.spectrum.t_min)) bad("spectrum t_max must exceed t_min", s.spectrum.t_max);
    if (s.domain_case == DomainCase::HalfLine && !(s.spectrum.t_min >= 0.0)) {
      bad("half-line spectrum must be nonnegative", s.spectrum.t_min);
    }
  } else {
    for (size_t i = 1; i < s.spectrum.values.size(); ++i) {
      if (!(s.spectrum.values[i] > s.spectrum.values[i - 1])) bad("explicit spectrum must be strictly ascending");
    }
    if (s.domain_case == DomainCase::HalfLine && !(s.spectrum.values.front() >= 0.0)) {
      bad("half-line spectrum must be nonnegative", s.spectrum.values.front());
    }
  }
  const int n = s.spectrum.values.empty() ? s.spectrum.n : static_cast<int>(s.spectrum.values.size());
  if (s.F && (s.F->rows() != n || s.F->cols() != n)) bad("F must be n x n");
  if (!s.F && !(s.F_norm >= 0.0)) bad("F norm target must be nonnegative", s.F_norm);
  const double normF = s.F ? opnorm(*s.F) : s.F_norm;
  if (s.ell > 0.0 && !(s.ell > normF)) bad("ell must exceed ||F||", s.ell);
  if (!(s.ess >= 0.0)) bad("ess surrogate must be nonnegative", s.ess);
  if (s.alpha == 0.5 && !(s.ess < 1.0)) bad("ess * k0 < 1 fails", s.ess);
  if (s.kappa_sign != 1 && s.kappa_sign != -1) bad("kappa sign must be +1 or -1", s.kappa_sign);
  if (!(s.kappa_factor > 0.0)) bad("kappa factor must be positive", s.kappa_factor);
  if (!(s.eps_target > 0.0 && s.eps_target < 1.0)) bad("eps target must lie in (0, 1)", s.eps_target);
  if (s.quad.nodes < 16 || s.quad.nodes % 2 != 0) bad("node count must be even and at least 16", s.quad.nodes);
  if (!(s.quad.tail_target > 0.0)) bad("tail target must be positive", s.quad.tail_target);
  const auto tol = default_tolerances();
  for (const auto& [k, v] : s.tolerances) {
    if (!tol.count(k)) throw Error(ErrorKind::Config, "unknown tolerance " + k);
    if (!std::isfinite(v)) throw Error(ErrorKind::Config, "tolerance " + k + " is not finite");
  }
  const auto& names = check_names();
  for (const std::string& c : s.checks) {
    if (std::find(names.begin(), names.end(), c) == names.end()) throw Error(ErrorKind::Config, "unknown check " + c);
  }
}

Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Config, std::string("scenario is not valid JSON: ") + e.what());
  }
  Scenario s;
  try {
    s.name = j.value("name", s.name);
    s.seed = j.value("seed", s.seed);
    if (j.contains("spectrum")) {
      const json& sp = j.at("spectrum");
      if (sp.contains("values")) s.spectrum.values = sp.at("values").get<std::vector<double>>();
      s.spectrum.n = sp.value("n", 0);
      s.spectrum.t_min = sp.value("t_min", s.spectrum.t_min);
      s.spectrum.t_max = sp.value("t_max", s.spectrum.t_max);
    }
    if (j.contains("domain_case")) s.domain_case = domain_case_from_string(j.at("domain_case").get<std::string>());
    if (j.contains("weight")) {
      const json& w = j.at("weight");
      if (w.value("family", std::string("power")) != "power") {
        throw Error(ErrorKind::Config, "only the power weight family is available from JSON");
      }
      s.alpha = w.value("alpha", s.alpha);
    }
    const int n = s.spectrum.values.empty() ? s.spectrum.n : static_cast<int>(s.spectrum.values.size());
    if (j.contains("F")) {
      const json& f = j.at("F");
      if (f.contains("re")) {
        s.F = mat_from_json(f, n);
      } else {
        s.F_norm = f.value("norm", s.F_norm);
      }
    }
    s.ess = j.value("ess_surrogate", s.ess);
    if (j.contains("mu") && j.at("mu").is_number()) s.mu = j.at("mu").get<double>();
    if (j.contains("ell") && j.at("ell").is_number()) s.ell = j.at("ell").get<double>();
    if (j.contains("kappa")) {
      const json& k = j.at("kappa");
      s.kappa_sign = k.value("sign", s.kappa_sign);
      s.kappa_factor = k.value("factor", s.kappa_factor);
      if (k.contains("value") && k.at("value").is_number()) s.kappa_value = k.at("value").get<double>();
    }
    s.eps_target = j.value("eps_target", s.eps_target);
    if (j.contains("quadrature")) {
      const json& q = j.at("quadrature");
      s.quad.nodes = q.value("nodes", s.quad.nodes);
      if (q.contains("t_max") && q.at("t_max").is_number()) s.quad.t_max = q.at("t_max").get<double>();
      s.quad.tail_target = q.value("tail_target", s.quad.tail_target);
    }
    if (j.contains("tolerances")) s.tolerances = j.at("tolerances").get<std::map<std::string, double>>();
    if (j.contains("checks")) s.checks = j.at("checks").get<std::vector<std::string>>();
    if (j.contains("trials")) {
      const json& t = j.at("trials");
      s.trials.duality = t.value("duality", s.trials.duality);
      s.trials.kernel = t.value("kernel", s.trials.kernel);
      s.trials.intertwining = t.value("intertwining", s.trials.intertwining);
      s.trials.factorization = t.value("factorization", s.trials.factorization);
      s.trials.transfer = t.value("transfer", s.trials.transfer);
      s.trials.k_bound = t.value("k_bound", s.trials.k_bound);
      s.trials.plemelj = t.value("plemelj", s.trials.plemelj);
      s.trials.resolvent = t.value("resolvent", s.trials.resolvent);
    }
    s.record_timing = j.value("record_timing", s.record_timing);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Config, std::string("malformed scenario: ") + e.what());
  }
  validate(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

std::string scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  json sp;
  if (!s.spectrum.values.empty()) {
    sp["values"] = s.spectrum.values;
  } else {
    sp["n"] = s.spectrum.n;
    sp["t_min"] = s.spectrum.t_min;
    sp["t_max"] = s.spectrum.t_max;
  }
  j["spectrum"] = sp;
  j["domain_case"] = to_string(s.domain_case);
  j["weight"] = {{"family", "power"}, {"alpha", s.alpha}};
  if (s.F) {
    json re = json::array();
    json im = json::array();
    for (Eigen::Index i = 0; i < s.F->rows(); ++i) {
      json rr = json::array();
      json ii = json::array();
      for (Eigen::Index k = 0; k < s.F->cols(); ++k) {
        rr.push_back((*s.F)(i, k).real());
        ii.push_back((*s.F)(i, k).imag());
      }
      re.push_back(rr);
      im.push_back(ii);
    }
    j["F"] = {{"re", re}, {"im", im}};
  } else {
    j["F"] = {{"norm", s.F_norm}};
  }
  j["ess_surrogate"] = s.ess;
  j["mu"] = s.mu > 0.0 ? json(s.mu) : json("auto");
  j["ell"] = s.ell > 0.0 ? json(s.ell) : json("auto");
  j["kappa"] = {{"sign", s.kappa_sign}, {"factor", s.kappa_factor},
                {"value", s.kappa_value != 0.0 ? json(s.kappa_value) : json(nullptr)}};
  j["eps_target"] = s.eps_target;
  j["quadrature"] = {{"nodes", s.quad.nodes},
                     {"t_max", s.quad.t_max > 0.0 ? json(s.quad.t_max) : json(nullptr)},
                     {"tail_target", s.quad.tail_target}};
  j["tolerances"] = s.tolerances;
  j["checks"] = s.checks;
  j["trials"] = {{"duality", s.trials.duality},         {"kernel", s.trials.kernel},
                 {"intertwining", s.trials.intertwining}, {"factorization", s.trials.factorization},
                 {"transfer", s.trials.transfer},       {"k_bound", s.trials.k_bound},
                 {"plemelj", s.trials.plemelj},         {"resolvent", s.trials.resolvent}};
  j["record_timing"] = s.record_timing;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Pipeline

Mat random_perturbation(int n, double norm_target, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Mat F(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) F(i, k) = cnormal(rng);
  }
  if (norm_target == 0.0) return Mat::Zero(n, n);
  return F * (norm_target / opnorm(F));
}

Pipeline build_pipeline(const Scenario& s) {
  validate(s);
  Pipeline p;
  p.scenario = s;
  std::vector<double> t = s.spectrum.values;
  if (t.empty()) {
    std::mt19937_64 rng = rng_for(s.seed, 0x5EC7);
    std::set<double> uniq;
    while (static_cast<int>(uniq.size()) < s.spectrum.n) uniq.insert(uniform(rng, s.spectrum.t_min, s.spectrum.t_max));
    t.assign(uniq.begin(), uniq.end());
  }
  const int n = static_cast<int>(t.size());
  const WeightFamily w = WeightFamily::power_affine(s.alpha, s.domain_case);
  const SpectralDiagonal A0 = SpectralDiagonal::make(t, s.domain_case);
  const Mat F = s.F ? *s.F : random_perturbation(n, s.F_norm, s.seed);
  const double ell = s.ell > 0.0 ? s.ell : std::max(1.0, 2.0 * opnorm(F));
  p.sys = build_system(A0, w, F, 0.0, ell);

  PipelineOptions opt;
  opt.ess = s.ess;
  opt.mu = s.mu;
  opt.eps_target = s.eps_target;
  opt.kappa_factor = s.kappa_factor;
  opt.kappa_sign = s.kappa_sign;
  opt.kappa_value = s.kappa_value;
  opt.t_far = std::max(1.0e4, 100.0 * max_abs_t(p.sys));
  p.constants = derive_constants(p.sys, opt);
  p.sys.kappa = p.constants.kappa;

  p.domain.mu = p.constants.mu;
  p.domain.R = p.constants.R;
  p.domain.weight = w;
  const double T = s.quad.t_max > 0.0 ? s.quad.t_max : tmax_for_tail(p.domain, s.quad.tail_target);
  ContourOptions co;
  co.focus = max_abs_t(p.sys);
  p.gamma = build_contour(p.domain, T, s.quad.nodes, co);
  p.probes = make_probes(p.domain, p.gamma);
  p.ev = std::make_shared<CharFunEvaluator>(p.sys, p.constants, p.constants.kappa);
  p.space = make_model_space(*p.ev, p.gamma, p.probes);
  return p;
}

// ---------------------------------------------------------------------------
// Named checks

ExactnessResult check_exactness(const SystemTriple& sys, const Contour& c) {
  const int n = sys.n();
  const Mat C = sys.C();
  const Mat I = Mat::Identity(n, n);
  Mat G = Mat::Zero(n, n);
  auto gram_term = [&](cplx z) {
    Mat X = -sys.A;
    X.diagonal().array() += z;
    const Mat V = C * X.partialPivLu().solve(I);  // column i is (O e_i)(z)
    return Mat(V.adjoint() * V);
  };
  for (int j = 0; j < c.size(); ++j) G += gram_term(c.z[static_cast<size_t>(j)]) * c.arclen[static_cast<size_t>(j)];
  for (const ContourEnd& e : c.ends) G += gram_term(c.z[static_cast<size_t>(e.node)]) * (std::norm(c.z[static_cast<size_t>(e.node)]) * e.tail_abs);
  G /= 2.0 * PI;
  G = 0.5 * (G + G.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(G);
  ExactnessResult r;
  r.frame_lower = es.eigenvalues().minCoeff();
  r.frame_upper = es.eigenvalues().maxCoeff();
  if (!(r.frame_lower > 1.0e-10)) throw Error(ErrorKind::Spectral, "observation map is not bounded below", r.frame_lower);
  r.K = std::sqrt(r.frame_upper / r.frame_lower);
  return r;
}

double check_duality(const SystemTriple& sys, const CharFunEvaluator& ev, const Contour& c,
                     const std::vector<Mat>& delta, int trials, std::uint64_t seed) {
  std::mt19937_64 rng = rng_for(seed, 0xD0A1);
  const int n = sys.n();
  const Mat Ad = sys.A.adjoint();
  const Mat B = sys.B();
  const Mat Ck = -ev.kappa() * sys.C();
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vec x1 = cnormal_vec(n, rng);
    const Vec x2 = cnormal_vec(n, rng);
    const GridFunction f{obs_samples(sys.A, Ck, x1, c.z), SideHint::ExtAnalytic, true};
    const GridFunction g{obs_samples(Ad, B, x2, c.z), SideHint::ExtAnalytic, true};
    const PairingResult p = delta_pairing(f, g, delta, c);
    worst = std::max(worst, std::abs(x2.dot(x1) - p.value) / (x1.norm() * x2.norm()));
  }
  return worst;
}

KernelResult check_kernel(const SystemTriple& sys, const ParabolicDomain& dom, const Contour& c,
                          const std::vector<Mat>& delta, int trials, std::uint64_t seed) {
  std::mt19937_64 rng = rng_for(seed, 0x7E57);
  const int n = sys.n();
  const Mat Ad = sys.A.adjoint();
  const Mat B = sys.B();
  KernelResult r;
  for (int t = 0; t < trials; ++t) {
    RationalVector g;
    const int terms = 1 + t % 2;
    for (int k = 0; k < terms; ++k) {
      g.poles.push_back(random_exterior_pole(dom, c, rng, 1.0));
      g.residues.push_back(cnormal_vec(n, rng));
    }
    const GridFunction gs = g.sample(c);
    GridFunction dg = gs;
    for (int j = 0; j < c.size(); ++j) dg.values.col(j) = delta[static_cast<size_t>(j)] * gs.values.col(j);
    r.kernel = std::max(r.kernel, ctrl_transform(sys, dg, c).norm() / e2_norm(gs, c));

    RationalVector f;
    f.poles = {g.poles.front()};
    f.residues = {g.residues.front()};
    const Vec x = cnormal_vec(n, rng);
    const Vec Wf = ctrl_transform(sys, f, dom);
    const GridFunction ox{obs_samples(Ad, B, x, c.z), SideHint::ExtAnalytic, true};
    const PairingResult p = cauchy_pairing(f.sample(c), ox, c);
    r.adjointness = std::max(r.adjointness, std::abs(x.dot(Wf) - p.value) / (x.norm() * f.residues.front().norm()));
  }
  Mat span(n, 2 * n);
  for (int k = 0; k < 2; ++k) {
    const cplx p = random_exterior_pole(dom, c, rng, 1.0);
    for (int i = 0; i < n; ++i) {
      RationalVector e;
      e.poles = {p};
      e.residues = {Vec::Unit(n, i)};
      span.col(k * n + i) = ctrl_transform(sys, e, dom);
    }
  }
  Eigen::JacobiSVD<Mat> svd(span);
  const double s0 = svd.singularValues()(0);
  r.span_rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()(i) > 1.0e-10 * s0) ++r.span_rank;
  }
  return r;
}

SpectralInclusion check_spectral_inclusion(const SystemTriple& sys, const ParabolicDomain& dom) {
  Eigen::ComplexEigenSolver<Mat> es(sys.A, false);
  SpectralInclusion r;
  r.min_margin = std::numeric_limits<double>::infinity();
  std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end(), [](cplx a, cplx b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
  for (const cplx& l : ev) {
    const Membership m = membership(dom, l);
    const double margin = m.side == Side::Interior ? m.margin : -std::abs(m.margin);
    r.eigenvalues.push_back(l);
    r.margins.push_back(margin);
    r.min_margin = std::min(r.min_margin, margin);
  }
  return r;
}

namespace {

// Clearance halves after each block of failed attempts, down to 1/8 of the request.
constexpr int kPoleAttemptsPerLevel = 20000;
constexpr int kPoleAttempts = 4 * kPoleAttemptsPerLevel;

}  // namespace

cplx random_interior_pole(const ParabolicDomain& dom, const Contour& c, std::mt19937_64& rng, double clearance) {
  const bool even = dom.domain_case() == DomainCase::EvenOnR;
  const double X = std::max(4.0 * dom.R, 20.0);
  for (int attempt = 0; attempt < kPoleAttempts; ++attempt) {
    const double need = clearance * std::pow(0.5, attempt / kPoleAttemptsPerLevel);
    cplx p;
    if (uniform(rng, 0.0, 1.0) < 0.5) {
      p = std::polar(dom.R * std::sqrt(uniform(rng, 0.0, 1.0)), uniform(rng, -PI, PI));
    } else {
      const double x = uniform(rng, even ? -X : 0.0, X);
      p = cplx(x, uniform(rng, -0.9, 0.9) * dom.mu * dom.weight.phi_star(x));
    }
    if (membership(dom, p).side == Side::Interior && clear_of(c, p, need)) return p;
  }
  throw Error(ErrorKind::SearchFailure, "no interior pole with the requested clearance");
}

cplx random_exterior_pole(const ParabolicDomain& dom, const Contour& c, std::mt19937_64& rng, double clearance) {
  const double X = std::max(4.0 * dom.R, 20.0);
  for (int attempt = 0; attempt < kPoleAttempts; ++attempt) {
    const double need = clearance * std::pow(0.5, attempt / kPoleAttemptsPerLevel);
    cplx p;
    if (uniform(rng, 0.0, 1.0) < 0.5) {
      p = std::polar(dom.R * uniform(rng, 1.05, 3.0), uniform(rng, -PI, PI));
    } else {
      const double x = uniform(rng, -X, X);
      const double y = dom.mu * dom.weight.phi_star(x) * uniform(rng, 1.1, 3.0) + uniform(rng, 0.1, 2.0);
      p = cplx(x, uniform(rng, 0.0, 1.0) < 0.5 ? y : -y);
    }
    const Membership m = membership(dom, p);
    if (m.side == Side::Exterior && m.margin < 0.0 && clear_of(c, p, need)) return p;
  }
  throw Error(ErrorKind::SearchFailure, "no exterior pole with the requested clearance");
}

// ---------------------------------------------------------------------------
// Report

bool relation_holds(double residual, const std::string& relation, double tolerance) {
  if (!std::isfinite(residual)) return false;
  if (relation == "<=") return residual <= tolerance;
  if (relation == "<") return residual < tolerance;
  if (relation == ">=") return residual >= tolerance;
  if (relation == ">") return residual > tolerance;
  throw Error(ErrorKind::Config, "unknown relation " + relation);
}

bool Report::all_pass() const {
  if (!abort_reason.empty()) return false;
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

const CheckResult* Report::find(const std::string& name) const {
  for (const CheckResult& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

class Runner {
 public:
  Runner(const Pipeline& p, Report& rep) : p_(p), rep_(rep) {}

  void run() {
    const auto& sel = p_.scenario.checks;
    for (const std::string& name : check_names()) {
      if (!sel.empty() && std::find(sel.begin(), sel.end(), name) == sel.end()) continue;
      CheckResult r;
      r.name = name;
      r.tolerance = rep_.tolerances.at(name);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        dispatch(r);
        r.pass = relation_holds(r.residual, r.relation, r.tolerance);
      } catch (const Error& e) {
        r.pass = false;
        if (r.detail.empty()) r.detail = e.what();
        r.residual = std::isfinite(r.residual) && r.residual != 0.0 ? r.residual : kNaN;
      }
      if (p_.scenario.record_timing) {
        rep_.timing_ms[name] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      }
      rep_.checks.push_back(std::move(r));
    }
  }

 private:
  const Pipeline& p_;
  Report& rep_;
  std::optional<ExactnessResult> exact_;

  std::uint64_t seed() const { return p_.scenario.seed; }
  const SystemTriple& sys() const { return p_.sys; }
  const Contour& gamma() const { return p_.gamma; }
  const CharFunEvaluator& ev() const { return *p_.ev; }
  int n() const { return p_.sys.n(); }

  void dispatch(CheckResult& r) {
    static const std::map<std::string, void (Runner::*)(CheckResult&)> table = {
        {"constants_chain", &Runner::constants_chain},
        {"disc_inclusion", &Runner::disc_inclusion},
        {"separation", &Runner::separation},
        {"norm_bounds", &Runner::norm_bounds},
        {"h_inverse", &Runner::h_inverse},
        {"spectral_inclusion", &Runner::spectral_inclusion},
        {"winding", &Runner::winding},
        {"integral_bound", &Runner::integral_bound_stability},
        {"inverse_identity", &Runner::inverse_identity},
        {"delta_forms", &Runner::delta_forms},
        {"admissibility", &Runner::admissibility},
        {"h_factorization", &Runner::h_factorization},
        {"transfer_law", &Runner::transfer_law},
        {"intertwining", &Runner::intertwining},
        {"membership_coherence", &Runner::membership_coherence},
        {"model_resolvent", &Runner::model_resolvent_check},
        {"duality", &Runner::duality},
        {"kernel", &Runner::kernel},
        {"adjointness", &Runner::adjointness},
        {"surjectivity", &Runner::surjectivity},
        {"exactness", &Runner::exactness},
        {"k_bound", &Runner::k_bound},
        {"plemelj", &Runner::plemelj},
    };
    (this->*table.at(r.name))(r);
  }

  void constants_chain(CheckResult& r) {
    const ChainCheck cc = check_chain(p_.constants);
    r.residual = cc.ok ? 0.0 : 1.0;
    r.detail = cc.ok ? "" : "violated: " + cc.violated;
  }

  void disc_inclusion(CheckResult& r) {
    const DiscInclusionReport d = verify_disc_inclusion(p_.domain, p_.constants.r_prime, 1000, 100);
    r.residual = static_cast<double>(d.violations);
    r.metrics["samples"] = static_cast<double>(d.samples);
    r.metrics["worst_margin"] = d.worst_margin;
  }

  void separation(CheckResult& r) {
    const ConstantsBundle& c = p_.constants;
    const SeparationReport s = separation_scan(c.kappa, c.mu1, c.ell, sys().weight);
    r.metrics["kappa"] = s.kappa;
    r.metrics["kappa0"] = s.kappa0;
    r.metrics["min_slack_point"] = s.min_slack_point;
    r.metrics["min_slack_curve"] = s.min_slack_curve;
    const double worst = std::min(s.min_slack_point, s.min_slack_curve);
    r.residual = std::max(0.0, -worst);
    std::ostringstream os;
    if (!s.precondition_ok) {
      os << "|t + i kappa phi(t) - z| >= ell phi(t): precondition |kappa| > kappa0 fails (kappa = " << s.kappa
         << ", kappa0 = " << s.kappa0 << ")";
      r.residual = std::max(r.residual, s.kappa0 - std::abs(s.kappa));
    } else if (worst < 0.0) {
      os << "|t + i kappa phi(t) - z| >= ell phi(t) fails near t = " << s.witness_t;
    }
    r.detail = os.str();
  }

  std::vector<cplx> exterior_samples(std::uint64_t tag, int count) {
    std::mt19937_64 rng = rng_for(seed(), tag);
    std::vector<cplx> pts = exterior_probe_set(p_.domain, std::max(1.0e4, 100.0 * max_abs_t(sys())));
    for (int i = 0; i < count; ++i) pts.push_back(random_exterior_pole(p_.domain, gamma(), rng, 0.0));
    return pts;
  }

  void norm_bounds(CheckResult& r) {
    std::vector<cplx> pts = exterior_samples(0xB0B, 500);
    const std::vector<cplx> inner = exterior_probe_set(p_.domain.shrunk(p_.constants.sigma_shrink),
                                                       std::max(1.0e4, 100.0 * max_abs_t(sys())));
    pts.insert(pts.end(), inner.begin(), inner.end());
    const NormSup s = exterior_norm_sup(sys(), pts);
    r.metrics["sup_FC"] = s.sup_FC;
    r.metrics["sup_CF"] = s.sup_CF;
    r.metrics["one_minus_eps"] = 1.0 - p_.constants.eps;
    r.residual = std::max(s.sup_FC, s.sup_CF) / (1.0 - p_.constants.eps);
    rep_.bounds["sup_FC"] = s.sup_FC;
    rep_.bounds["sup_CF"] = s.sup_CF;
  }

  void h_inverse(CheckResult& r) {
    double worst_dev = 0.0;
    double worst_inv = 0.0;
    for (const cplx& z : exterior_samples(0x4A, 200)) {
      const Mat H = H_eval(sys(), z);
      Mat D = H;
      D.diagonal().array() -= 1.0;
      worst_dev = std::max(worst_dev, opnorm(D));
      worst_inv = std::max(worst_inv, 1.0 / smin(H));
    }
    r.metrics["sup_H_minus_I"] = worst_dev;
    r.metrics["sup_H_inverse"] = worst_inv;
    r.metrics["one_over_eps"] = 1.0 / p_.constants.eps;
    r.residual = worst_inv * p_.constants.eps;
    rep_.bounds["sup_H_inverse"] = worst_inv;
  }

  void spectral_inclusion(CheckResult& r) {
    const SpectralInclusion s = check_spectral_inclusion(sys(), p_.domain);
    r.relation = ">";
    r.residual = s.min_margin;
    for (size_t i = 0; i < s.eigenvalues.size(); ++i) {
      if (s.margins[i] <= 0.0) {
        std::ostringstream os;
        os << "eigenvalue " << s.eigenvalues[i].real() << (s.eigenvalues[i].imag() < 0 ? " - " : " + ")
           << std::abs(s.eigenvalues[i].imag()) << "i lies outside";
        r.detail = os.str();
      }
    }
    rep_.bounds["min_eigen_margin"] = s.min_margin;
  }

  void winding(CheckResult& r) {
    double worst = 0.0;
    for (const cplx& w : p_.probes.interior) worst = std::max(worst, std::abs(winding_number(gamma(), w) - 1.0));
    for (const cplx& w : p_.probes.exterior) worst = std::max(worst, std::abs(winding_number(gamma(), w)));
    r.residual = worst;
    r.metrics["interior_probes"] = static_cast<double>(p_.probes.interior.size());
    r.metrics["exterior_probes"] = static_cast<double>(p_.probes.exterior.size());
  }

  void integral_bound_stability(CheckResult& r) {
    std::vector<double> xs;
    for (int i = 0; i < n(); ++i) xs.push_back(sys().A0.t(i));
    const double lo = p_.domain.domain_case() == DomainCase::HalfLine ? 0.0 : -10.0 * max_abs_t(sys());
    const double hi = 10.0 * std::max(1.0, max_abs_t(sys()));
    for (int i = 0; i <= 16; ++i) xs.push_back(lo + (hi - lo) * i / 16.0);
    ContourOptions co;
    co.focus = max_abs_t(sys());
    const Contour fine = build_contour(p_.domain, gamma().T_max, 2 * gamma().size(), co);
    const IntegralBound a = integral_bound(p_.domain, gamma(), xs, p_.constants.k);
    const IntegralBound b = integral_bound(p_.domain, fine, xs, p_.constants.k);
    double worst = 0.0;
    bool dyadic = true;
    for (size_t i = 0; i < xs.size(); ++i) {
      worst = std::max(worst, std::abs(a.per_x[i].value - b.per_x[i].value) / b.per_x[i].value);
      dyadic = dyadic && b.per_x[i].dyadic_ok;
    }
    r.residual = worst;
    r.metrics["K_hat"] = b.K_hat;
    r.metrics["dyadic_ok"] = dyadic ? 1.0 : 0.0;
    rep_.bounds["integral_K_hat"] = b.K_hat;
  }

  void inverse_identity(CheckResult& r) {
    double worst = 0.0;
    for (int j = 0; j < gamma().size(); ++j) {
      Mat P = p_.space.delta[static_cast<size_t>(j)] * ev().delta_inverse(gamma().z[static_cast<size_t>(j)]);
      P.diagonal().array() -= 1.0;
      worst = std::max(worst, opnorm(P));
    }
    r.residual = worst;
  }

  std::vector<cplx> interior_grid() const {
    std::vector<cplx> pts = p_.probes.interior;
    const bool even = p_.domain.domain_case() == DomainCase::EvenOnR;
    const double X = std::max(4.0 * p_.domain.R, 2.0 * max_abs_t(sys()));
    for (int i = 0; i <= 40; ++i) {
      const double x = (even ? -X : 0.0) + (even ? 2.0 * X : X) * i / 40.0;
      for (int k = -4; k <= 4; ++k) {
        const cplx z(x, 0.2 * k * p_.domain.mu * p_.domain.weight.phi_star(x));
        if (membership(p_.domain, z).side == Side::Interior) pts.push_back(z);
      }
    }
    for (int a = 0; a < 16; ++a) pts.push_back(std::polar(0.5 * p_.domain.R, 2.0 * PI * a / 16.0));
    return pts;
  }

  void delta_forms(CheckResult& r) {
    std::vector<cplx> pts = gamma().z;
    const std::vector<cplx> in = interior_grid();
    pts.insert(pts.end(), in.begin(), in.end());
    double worst = 0.0;
    for (const cplx& z : pts) {
      const Mat d1 = ev().delta(z);
      const Mat d2 = ev().delta_alt(z);
      worst = std::max(worst, opnorm(d1 - d2) / std::max(1.0, opnorm(d1)));
    }
    r.residual = worst;
  }

  void admissibility(CheckResult& r) {
    double sup_d = 0.0;
    for (const cplx& z : interior_grid()) sup_d = std::max(sup_d, opnorm(ev().delta(z)));
    double sup_inv = 0.0;
    for (const Mat& d : p_.space.delta) sup_inv = std::max(sup_inv, 1.0 / smin(d));
    r.relation = "<";
    r.residual = std::max(sup_d, sup_inv);
    r.metrics["sup_delta_interior"] = sup_d;
    r.metrics["sup_delta_inverse_gamma"] = sup_inv;
    rep_.bounds["sup_delta"] = sup_d;
    rep_.bounds["sup_delta_inverse"] = sup_inv;
  }

  void h_factorization(CheckResult& r) {
    std::mt19937_64 rng = rng_for(seed(), 0x4F);
    const Mat A0 = sys().A0mat();
    const Mat C = sys().C();
    double worst = 0.0;
    std::vector<Mat> H;
    H.reserve(gamma().z.size());
    for (const cplx& z : gamma().z) H.push_back(H_eval(sys(), z));
    for (int t = 0; t < p_.scenario.trials.factorization; ++t) {
      const Vec x = cnormal_vec(n(), rng);
      const Mat lhs = obs_samples(A0, C, x, gamma().z);
      const Mat rhs = obs_samples(sys().A, C, x, gamma().z);
      for (int j = 0; j < gamma().size(); ++j) {
        const double scale = std::max(lhs.col(j).norm(), 1.0e-300);
        worst = std::max(worst, (lhs.col(j) - H[static_cast<size_t>(j)] * rhs.col(j)).norm() / scale);
      }
    }
    r.residual = worst;
  }

  void transfer_law(CheckResult& r) {
    std::mt19937_64 rng = rng_for(seed(), 0x7F);
    const Mat B = sys().B();
    const Mat C = sys().C();
    double worst = 0.0;
    for (int t = 0; t < p_.scenario.trials.transfer; ++t) {
      const cplx z = random_exterior_pole(p_.domain, gamma(), rng, 0.0);
      const cplx w = random_exterior_pole(p_.domain, gamma(), rng, 0.0);
      const Mat lhs = ev().Phi(z) - ev().Phi(w);
      // (z - A)^{-1} - (w - A)^{-1} = (w - z) (z - A)^{-1} (w - A)^{-1}
      const Mat rhs = -ev().kappa() * (w - z) * C * resolvent(sys().A, z) * resolvent(sys().A, w) * B;
      worst = std::max(worst, opnorm(lhs - rhs) / std::max(opnorm(lhs), 1.0e-300));
    }
    r.residual = worst;
  }

  void intertwining(CheckResult& r) {
    std::mt19937_64 rng = rng_for(seed(), 0x1E);
    double worst = 0.0;
    for (int t = 0; t < p_.scenario.trials.intertwining; ++t) {
      const Vec x = cnormal_vec(n(), rng);
      const ModelElement e = observe(p_.space, sys(), x, false);
      const TruncatedMult tm = truncated_mult(e, p_.space);
      const Mat ref = obs_samples(sys().A, sys().C(), sys().A * x, gamma().z);
      for (int j = 0; j < gamma().size(); ++j) {
        worst = std::max(worst, (tm.shifted.f.values.col(j) - ref.col(j)).norm() / x.norm());
      }
    }
    r.residual = worst;
  }

  void membership_coherence(CheckResult& r) {
    double worst = 0.0;
    bool all = true;
    for (int i = 0; i < n(); ++i) {
      const ModelElement e = observe(p_.space, sys(), Vec::Unit(n(), i), true);
      worst = std::max({worst, e.ext_membership->residual, e.int_membership->residual});
      all = all && e.in_space();
    }
    r.residual = worst;
    r.metrics["all_in_space"] = all ? 1.0 : 0.0;
  }

  void model_resolvent_check(CheckResult& r) {
    std::mt19937_64 rng = rng_for(seed(), 0x3E);
    double worst = 0.0;
    for (int t = 0; t < p_.scenario.trials.resolvent; ++t) {
      const Vec x = cnormal_vec(n(), rng);
      const cplx lambda = random_exterior_pole(p_.domain, gamma(), rng, 2.0);
      ModelElement e = observe(p_.space, sys(), x, false);
      e.origin.reset();
      const ModelElement g = model_resolvent(e, lambda, ev(), p_.space);
      const Mat ref = obs_samples(sys().A, sys().C(), resolvent(sys().A, lambda) * x, gamma().z);
      const double scale = std::max(ref.cwiseAbs().maxCoeff(), 1.0e-300);
      worst = std::max(worst, (g.f.values - ref).cwiseAbs().maxCoeff() / scale);
      // (M - lambda) R(lambda) f = f
      const TruncatedMult tm = truncated_mult(g, p_.space);
      const Mat back = tm.shifted.f.values - lambda * g.f.values;
      worst = std::max(worst, (back - e.f.values).cwiseAbs().maxCoeff() / std::max(e.f.values.cwiseAbs().maxCoeff(), 1.0e-300));
    }
    // An eigenvalue of A must be refused.
    Eigen::ComplexEigenSolver<Mat> es(sys().A, false);
    const ModelElement e = observe(p_.space, sys(), Vec::Unit(n(), 0), false);
    bool refused = false;
    try {
      (void)model_resolvent(e, es.eigenvalues()(0), ev(), p_.space);
    } catch (const Error& err) {
      refused = err.kind() == ErrorKind::Spectral;
    }
    r.metrics["eigenvalue_refused"] = refused ? 1.0 : 0.0;
    if (!refused) {
      r.detail = "eigenvalue of A not detected as a spectral point of delta";
      worst = std::numeric_limits<double>::infinity();
    }
    r.residual = worst;
  }

  void duality(CheckResult& r) {
    r.residual = check_duality(sys(), ev(), gamma(), p_.space.delta, p_.scenario.trials.duality, seed());
    rep_.quadrature["duality_residual"] = r.residual;
  }

  const KernelResult& kernel_result() {
    if (!kernel_) kernel_ = check_kernel(sys(), p_.domain, gamma(), p_.space.delta, p_.scenario.trials.kernel, seed());
    return *kernel_;
  }
  std::optional<KernelResult> kernel_;

  void kernel(CheckResult& r) { r.residual = kernel_result().kernel; }
  void adjointness(CheckResult& r) { r.residual = kernel_result().adjointness; }
  void surjectivity(CheckResult& r) {
    r.residual = static_cast<double>(n() - kernel_result().span_rank);
    r.metrics["rank"] = kernel_result().span_rank;
  }

  const ExactnessResult& exactness_result() {
    if (!exact_) exact_ = check_exactness(sys(), gamma());
    return *exact_;
  }

  void exactness(CheckResult& r) {
    const ExactnessResult& e = exactness_result();
    r.relation = ">=";
    r.residual = e.frame_lower;
    r.metrics["frame_upper"] = e.frame_upper;
    r.metrics["frame_ratio"] = e.frame_upper / e.frame_lower;
    r.metrics["K"] = e.K;
    rep_.bounds["frame_lower"] = e.frame_lower;
    rep_.bounds["frame_upper"] = e.frame_upper;
    rep_.bounds["K"] = e.K;
  }

  void k_bound(CheckResult& r) {
    const double K = exactness_result().K;
    std::mt19937_64 rng = rng_for(seed(), 0x8B);
    int violations = 0;
    double K_emp = 0.0;
    for (int t = 0; t < p_.scenario.trials.k_bound; ++t) {
      RationalScalar q;
      const int terms = 1 + t % 3;
      for (int k = 0; k < terms; ++k) {
        q.poles.push_back(random_exterior_pole(p_.domain, gamma(), rng, 1.5));
        q.residues.push_back(cnormal(rng));
      }
      const double lhs = opnorm(rational_calculus(sys(), q, CalculusMode::Direct, p_.domain));
      double sup = 0.0;
      for (const cplx& z : gamma().z) sup = std::max(sup, std::abs(q(z)));
      K_emp = std::max(K_emp, lhs / sup);
      if (lhs > K * sup * (1.0 + 1.0e-12)) ++violations;
    }
    r.residual = violations;
    r.metrics["K"] = K;
    r.metrics["K_empirical"] = K_emp;
    rep_.bounds["K_empirical"] = K_emp;
  }

  void plemelj(CheckResult& r) {
    std::mt19937_64 rng = rng_for(seed(), 0x9E);
    int wrong = 0;
    double worst_pass = 0.0;
    double best_fail = std::numeric_limits<double>::infinity();
    for (int t = 0; t < p_.scenario.trials.plemelj; ++t) {
      const bool interior = t % 2 == 0;
      RationalVector f;
      const int terms = 1 + t % 3;
      for (int k = 0; k < terms; ++k) {
        f.poles.push_back(interior ? random_interior_pole(p_.domain, gamma(), rng, 1.0)
                                   : random_exterior_pole(p_.domain, gamma(), rng, 1.0));
        f.residues.push_back(cnormal_vec(n(), rng));
      }
      const GridFunction g = f.sample(gamma());
      const MembershipResult ext = membership_test(g, gamma(), p_.probes, SideHint::ExtAnalytic, p_.space.tol_mem);
      const MembershipResult in = membership_test(g, gamma(), p_.probes, SideHint::IntAnalytic, p_.space.tol_mem);
      // interior poles: analytic outside; exterior poles: analytic inside
      const MembershipResult& should_pass = interior ? ext : in;
      const MembershipResult& should_fail = interior ? in : ext;
      if (!should_pass.pass || should_fail.pass) ++wrong;
      worst_pass = std::max(worst_pass, should_pass.residual);
      best_fail = std::min(best_fail, should_fail.residual);
    }
    r.residual = wrong;
    r.metrics["worst_passing_residual"] = worst_pass;
    r.metrics["smallest_failing_residual"] = best_fail;
  }
};

}  // namespace

Report run_scenario(const Scenario& s) {
  Report rep;
  rep.scenario_name = s.name;
  rep.seed = s.seed;
  rep.nodes = s.quad.nodes;
  rep.tolerances = default_tolerances();
  for (const auto& [k, v] : s.tolerances) rep.tolerances[k] = v;
  const auto t0 = std::chrono::steady_clock::now();
  Pipeline p;
  try {
    Scenario sc = s;
    p = build_pipeline(sc);
    p.space.tol_mem = rep.tolerances.at("tol_mem");
  } catch (const Error& e) {
    rep.abort_reason = e.what();
    return rep;
  }
  if (s.record_timing) {
    rep.timing_ms["pipeline"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  rep.n = p.sys.n();
  rep.T_max = p.gamma.T_max;
  rep.constants = p.constants;
  rep.quadrature["tail_bound"] = p.gamma.tail_bound;
  for (int j = 0; j < p.gamma.size(); ++j) {
    const size_t u = static_cast<size_t>(j);
    rep.contour.push_back({p.gamma.z[u], p.gamma.dz[u]});
    Eigen::JacobiSVD<Mat> svd(p.space.delta[u]);
    const RVec sv = svd.singularValues();
    rep.delta_profile.push_back({p.gamma.s[u], sv.minCoeff(), sv.maxCoeff()});
  }
  {
    const SpectralInclusion si = check_spectral_inclusion(p.sys, p.domain);
    for (size_t i = 0; i < si.eigenvalues.size(); ++i) rep.eigen.push_back({si.eigenvalues[i], si.margins[i]});
  }
  if (p.sys.n() == 1) {
    const CharFunEvaluator unit(p.sys, p.constants, 1.0);
    try {
      const cplx d = unit.delta(0.0)(0, 0);
      const cplx di = unit.delta_inverse(0.0, Region::Any)(0, 0);
      rep.echo["delta_kappa1_at_zero"] = {d.real(), d.imag()};
      rep.echo["delta_inverse_kappa1_at_zero"] = {di.real(), di.imag()};
    } catch (const Error&) {
    }
  }
  Runner(p, rep).run();
  return rep;
}

std::string report_to_json(const Report& r) {
  json j;
  j["schema_version"] = r.schema_version;
  j["scenario"] = r.scenario_name;
  j["seed"] = r.seed;
  j["n"] = r.n;
  j["nodes"] = r.nodes;
  j["T_max"] = num_json(r.T_max);
  j["abort_reason"] = r.abort_reason;
  j["all_pass"] = r.all_pass();
  j["constants"] = constants_json(r.constants);
  j["tolerances"] = map_json(r.tolerances);
  json checks = json::array();
  for (const CheckResult& c : r.checks) {
    json cj;
    cj["name"] = c.name;
    cj["pass"] = c.pass;
    cj["residual"] = num_json(c.residual);
    cj["relation"] = c.relation;
    cj["tolerance"] = num_json(c.tolerance);
    cj["detail"] = c.detail;
    cj["metrics"] = map_json(c.metrics);
    checks.push_back(cj);
  }
  j["checks"] = checks;
  j["bounds"] = map_json(r.bounds);
  j["quadrature"] = map_json(r.quadrature);
  json echo = json::object();
  for (const auto& [k, v] : r.echo) echo[k] = {num_json(v.first), num_json(v.second)};
  j["echo"] = echo;
  if (!r.timing_ms.empty()) j["timing_ms"] = map_json(r.timing_ms);
  return j.dump(2) + "\n";
}

Report report_from_json(const std::string& text) {
  Report r;
  try {
    const json j = json::parse(text);
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw Error(ErrorKind::Config, "unsupported report schema version", r.schema_version);
    }
    r.scenario_name = j.at("scenario").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n = j.at("n").get<int>();
    r.nodes = j.at("nodes").get<int>();
    r.T_max = num(j.at("T_max"));
    r.abort_reason = j.at("abort_reason").get<std::string>();
    r.constants = constants_from_json(j.at("constants"));
    r.tolerances = map_from_json(j.at("tolerances"));
    for (const json& cj : j.at("checks")) {
      CheckResult c;
      c.name = cj.at("name").get<std::string>();
      c.pass = cj.at("pass").get<bool>();
      c.residual = num(cj.at("residual"));
      c.relation = cj.at("relation").get<std::string>();
      c.tolerance = num(cj.at("tolerance"));
      c.detail = cj.at("detail").get<std::string>();
      c.metrics = map_from_json(cj.at("metrics"));
      r.checks.push_back(std::move(c));
    }
    r.bounds = map_from_json(j.at("bounds"));
    r.quadrature = map_from_json(j.at("quadrature"));
    for (auto it = j.at("echo").begin(); it != j.at("echo").end(); ++it) {
      r.echo[it.key()] = {num(it.value()[0]), num(it.value()[1])};
    }
    if (j.contains("timing_ms")) r.timing_ms = map_from_json(j.at("timing_ms"));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Config, std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string render_text(const Report& r) {
  std::ostringstream os;
  os << "scenario " << r.scenario_name << "  seed " << r.seed << "  n " << r.n << "  nodes " << r.nodes << "\n";
  if (!r.abort_reason.empty()) {
    os << "aborted: " << r.abort_reason << "\n";
    return os.str();
  }
  const ConstantsBundle& c = r.constants;
  os << "mu " << c.mu << "  R " << c.R << "  eps " << c.eps << "  mu1 " << c.mu1 << "  kappa0 " << c.kappa0
     << "  kappa " << c.kappa << "\n";
  for (const CheckResult& k : r.checks) {
    char line[256];
    std::snprintf(line, sizeof line, "%-22s %-4s %12.4e %-2s %10.3e", k.name.c_str(), k.pass ? "PASS" : "FAIL",
                  k.residual, k.relation.c_str(), k.tolerance);
    os << line;
    if (!k.detail.empty()) os << "  " << k.detail;
    os << "\n";
  }
  for (const auto& [k, v] : r.bounds) os << "bound " << k << " = " << v << "\n";
  os << (r.all_pass() ? "all checks pass" : "some checks fail") << "\n";
  return os.str();
}

std::string contour_csv(const std::vector<ContourRow>& rows) {
  std::string out = "re_z,im_z,re_dz,im_dz,abs_dz\n";
  for (const ContourRow& r : rows) {
    out += fmt(r.z.real()) + "," + fmt(r.z.imag()) + "," + fmt(r.dz.real()) + "," + fmt(r.dz.imag()) + "," +
           fmt(std::abs(r.dz)) + "\n";
  }
  return out;
}

std::string delta_csv(const std::vector<DeltaRow>& rows) {
  std::string out = "arclength,sigma_min,sigma_max\n";
  for (const DeltaRow& r : rows) out += fmt(r.s) + "," + fmt(r.sigma_min) + "," + fmt(r.sigma_max) + "\n";
  return out;
}

std::string eigen_csv(const std::vector<EigenRow>& rows) {
  std::string out = "re_lambda,im_lambda,margin\n";
  for (const EigenRow& r : rows) out += fmt(r.lambda.real()) + "," + fmt(r.lambda.imag()) + "," + fmt(r.margin) + "\n";
  return out;
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + p.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + p.string());
}

}  // namespace

ReportPaths emit_report(const Report& r, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, ec.message() + ": " + dir);
  const fs::path base(dir);
  ReportPaths paths{(base / "report.json").string(), (base / "contour.csv").string(),
                    (base / "delta_profile.csv").string(), (base / "eigenvalues.csv").string()};
  write_file(paths.json, report_to_json(r));
  write_file(paths.contour_csv, contour_csv(r.contour));
  write_file(paths.delta_csv, delta_csv(r.delta_profile));
  write_file(paths.eigen_csv, eigen_csv(r.eigen));
  return paths;
}

}  // namespace pmodel
