// SPDX-License-Identifier: Apache-2.0
// pmodel: command line front end for the verification harness.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmodel/verify_harness.hpp"

namespace {

using pmodel::cplx;

struct Common {
  std::string config;
  int nodes = 0;
  double tmax = 0.0;
  long long seed = -1;
  std::string out;
  std::vector<std::string> tol_overrides;
};

pmodel::Scenario fixture_scenario() {
  pmodel::Scenario s;
  s.name = "fixture-n3";
  s.seed = 7;
  s.spectrum.values = {1.0, 4.0, 9.0};
  s.F_norm = 0.3;
  s.ell = 1.0;
  return s;
}

pmodel::Scenario resolve(const Common& c) {
  pmodel::Scenario s = c.config.empty() ? fixture_scenario() : pmodel::load_scenario(c.config);
  if (c.nodes > 0) s.quad.nodes = c.nodes;
  if (c.tmax > 0.0) s.quad.t_max = c.tmax;
  if (c.seed >= 0) s.seed = static_cast<std::uint64_t>(c.seed);
  for (const std::string& kv : c.tol_overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw pmodel::Error(pmodel::ErrorKind::Config, "expected NAME=VALUE, got " + kv);
    try {
      s.tolerances[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw pmodel::Error(pmodel::ErrorKind::Config, "bad tolerance value in " + kv);
    }
  }
  pmodel::validate(s);
  return s;
}

cplx parse_complex(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) return {std::stod(text), 0.0};
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw pmodel::Error(pmodel::ErrorKind::Config, "expected RE[,IM], got " + text);
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pmodel::Error(pmodel::ErrorKind::Io, "cannot open " + path + " for writing");
  out << text;
}

int cmd_geometry(const Common& c) {
  const pmodel::Pipeline p = pmodel::build_pipeline(resolve(c));
  const pmodel::ConstantsBundle& k = p.constants;
  nlohmann::ordered_json j;
  j["mu0"] = k.mu0;
  j["mu"] = k.mu;
  j["r_prime"] = k.r_prime;
  j["k"] = k.k;
  j["t_star"] = k.t_star;
  j["R0"] = k.R0;
  j["R"] = k.R;
  j["eps"] = k.eps;
  j["sigma_shrink"] = k.sigma_shrink;
  j["mu1"] = k.mu1;
  j["ell"] = k.ell;
  j["kappa0"] = k.kappa0;
  j["kappa"] = k.kappa;
  j["t0"] = k.t0;
  j["rho"] = k.rho;
  j["T_max"] = p.gamma.T_max;
  j["nodes"] = p.gamma.size();
  j["tail_bound"] = p.gamma.tail_bound;
  const pmodel::ChainCheck cc = pmodel::check_chain(k);
  j["chain_ok"] = cc.ok;
  j["chain_violation"] = cc.violated;
  std::cout << j.dump(2) << "\n";
  if (!c.out.empty()) {
    std::vector<pmodel::ContourRow> rows;
    for (int i = 0; i < p.gamma.size(); ++i) rows.push_back({p.gamma.z[static_cast<size_t>(i)], p.gamma.dz[static_cast<size_t>(i)]});
    write_text(c.out + "/contour.csv", pmodel::contour_csv(rows));
  }
  return cc.ok ? 0 : 1;
}

int cmd_delta(const Common& c) {
  const pmodel::Pipeline p = pmodel::build_pipeline(resolve(c));
  std::ostringstream os;
  os << "arclength,re_z,im_z,sigma_min,sigma_max\n";
  char line[200];
  for (int j = 0; j < p.gamma.size(); ++j) {
    const auto u = static_cast<size_t>(j);
    Eigen::JacobiSVD<pmodel::Mat> svd(p.space.delta[u]);
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.gamma.s[u], p.gamma.z[u].real(),
                  p.gamma.z[u].imag(), svd.singularValues().minCoeff(), svd.singularValues().maxCoeff());
    os << line;
  }
  if (c.out.empty()) {
    std::cout << os.str();
  } else {
    write_text(c.out + "/delta.csv", os.str());
  }
  return 0;
}

int cmd_verify(const Common& c) {
  const pmodel::Report r = pmodel::run_scenario(resolve(c));
  std::cout << pmodel::render_text(r);
  if (!c.out.empty()) pmodel::emit_report(r, c.out);
  return r.all_pass() ? 0 : 1;
}

int cmd_calculus(const Common& c, const std::vector<std::string>& poles, const std::vector<std::string>& residues,
                 const std::string& c0, const std::string& mode) {
  if (poles.size() != residues.size()) throw pmodel::Error(pmodel::ErrorKind::Config, "need one residue per pole");
  const pmodel::Pipeline p = pmodel::build_pipeline(resolve(c));
  pmodel::RationalScalar q;
  q.c0 = parse_complex(c0);
  for (size_t i = 0; i < poles.size(); ++i) {
    q.poles.push_back(parse_complex(poles[i]));
    q.residues.push_back(parse_complex(residues[i]));
  }
  const auto m = mode == "contour" ? pmodel::CalculusMode::Contour : pmodel::CalculusMode::Direct;
  const pmodel::Mat qA = pmodel::rational_calculus(p.sys, q, m, p.domain, &p.gamma);
  double sup = std::abs(q.c0);
  for (const cplx& z : p.gamma.z) sup = std::max(sup, std::abs(q(z)));
  const pmodel::ExactnessResult ex = pmodel::check_exactness(p.sys, p.gamma);
  const double norm = pmodel::opnorm(qA);
  nlohmann::ordered_json j;
  nlohmann::ordered_json re = nlohmann::ordered_json::array();
  nlohmann::ordered_json im = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < qA.rows(); ++i) {
    std::vector<double> rr;
    std::vector<double> ii;
    for (Eigen::Index k = 0; k < qA.cols(); ++k) {
      rr.push_back(qA(i, k).real());
      ii.push_back(qA(i, k).imag());
    }
    re.push_back(rr);
    im.push_back(ii);
  }
  j["mode"] = mode;
  j["q_of_A"] = {{"re", re}, {"im", im}};
  j["norm"] = norm;
  j["sup_gamma"] = sup;
  j["K"] = ex.K;
  j["k_bound_holds"] = norm <= ex.K * sup;
  std::cout << j.dump(2) << "\n";
  return norm <= ex.K * sup ? 0 : 1;
}

int cmd_report(const Common& c, const std::string& in) {
  std::ifstream f(in);
  if (!f) throw pmodel::Error(pmodel::ErrorKind::Io, "cannot open " + in);
  std::stringstream ss;
  ss << f.rdbuf();
  const pmodel::Report r = pmodel::report_from_json(ss.str());
  std::cout << pmodel::render_text(r);
  if (!c.out.empty()) write_text(c.out + "/report.json", pmodel::report_to_json(r));
  return r.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional-model verification toolkit for weighted non-self-adjoint perturbations"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config, "Scenario JSON file (default: built-in n=3 fixture)");
    sub->add_option("--nodes", common.nodes, "Contour node count (even)");
    sub->add_option("--tmax", common.tmax, "Contour truncation abscissa");
    sub->add_option("--seed", common.seed, "Scenario seed");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--tol-override", common.tol_overrides, "NAME=VALUE tolerance override")->take_all();
  };

  CLI::App* geometry = app.add_subcommand("geometry", "Print the constants bundle");
  add_common(geometry);
  CLI::App* delta = app.add_subcommand("delta", "Sample the characteristic function along the contour");
  add_common(delta);
  CLI::App* verify = app.add_subcommand("verify", "Run the full check suite");
  add_common(verify);
  CLI::App* calculus = app.add_subcommand("calculus", "Evaluate q(A) for a rational q");
  add_common(calculus);
  std::vector<std::string> poles;
  std::vector<std::string> residues;
  std::string c0 = "0";
  std::string mode = "direct";
  calculus->add_option("--pole", poles, "Pole RE,IM (repeatable)")->required();
  calculus->add_option("--residue", residues, "Residue RE,IM (repeatable)")->required();
  calculus->add_option("--c0", c0, "Constant term RE,IM");
  calculus->add_option("--mode", mode, "direct or contour")->check(CLI::IsMember({"direct", "contour"}));
  CLI::App* report = app.add_subcommand("report", "Re-render a stored report");
  add_common(report);
  std::string in;
  report->add_option("--in", in, "Report JSON")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (geometry->parsed()) return cmd_geometry(common);
    if (delta->parsed()) return cmd_delta(common);
    if (verify->parsed()) return cmd_verify(common);
    if (calculus->parsed()) return cmd_calculus(common, poles, residues, c0, mode);
    if (report->parsed()) return cmd_report(common, in);
  } catch (const pmodel::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
