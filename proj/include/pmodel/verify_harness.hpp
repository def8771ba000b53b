// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pmodel/model_transforms.hpp"

namespace pmodel {

inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Scenario

struct SpectrumSpec {
  std::vector<double> values;  // explicit spectrum, used when non-empty
  int n = 0;                   // otherwise n uniform draws from [t_min, t_max]
  double t_min = 1.0;
  double t_max = 10.0;
};

struct QuadratureSpec {
  int nodes = 2048;
  double t_max = 0.0;  // <= 0 derives T_max from tail_target
  double tail_target = 1.0e-7;
};

struct TrialCounts {
  int duality = 50;
  int kernel = 20;
  int intertwining = 20;
  int factorization = 20;
  int transfer = 20;
  int k_bound = 50;
  int plemelj = 50;
  int resolvent = 5;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  SpectrumSpec spectrum;
  DomainCase domain_case = DomainCase::HalfLine;
  double alpha = 0.5;
  std::optional<Mat> F;  // explicit perturbation
  double F_norm = 0.3;   // norm target of the seeded draw
  double ess = 0.0;
  double mu = 0.0;       // <= 0: auto
  double ell = 0.0;      // <= 0: max(1, 2 ||F||)
  int kappa_sign = 1;
  double kappa_factor = 1.05;
  double kappa_value = 0.0;  // nonzero overrides sign * factor * kappa0
  double eps_target = 0.1;
  QuadratureSpec quad;
  std::map<std::string, double> tolerances;  // overrides of default_tolerances()
  std::vector<std::string> checks;           // empty runs every check
  TrialCounts trials;
  bool record_timing = false;
};

// Throws Config on malformed input or violated preconditions.
Scenario scenario_from_json(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string scenario_to_json(const Scenario& s);
void validate(const Scenario& s);

// Names of every check in execution order.
const std::vector<std::string>& check_names();
std::map<std::string, double> default_tolerances();

// ---------------------------------------------------------------------------
// Pipeline

struct Pipeline {
  Scenario scenario;
  SystemTriple sys;
  ConstantsBundle constants;
  ParabolicDomain domain;
  Contour gamma;
  ProbeSet probes;
  std::shared_ptr<CharFunEvaluator> ev;
  ModelSpace space;
};

// Spectrum, F, constants, contour, probes and delta samples.
Pipeline build_pipeline(const Scenario& s);

Mat random_perturbation(int n, double norm_target, std::uint64_t seed);

struct ExactnessResult {
  double frame_lower = 0.0;
  double frame_upper = 0.0;
  double K = 0.0;
};

// Gram matrix of the discretised observation map; throws Spectral when the
// lower frame bound drops below 1e-10.
ExactnessResult check_exactness(const SystemTriple& sys, const Contour& c);

// Max over trials of |<x1,x2> - <O_{A,-kC} x1, O_{A*,B*} x2>_delta| / (|x1| |x2|).
double check_duality(const SystemTriple& sys, const CharFunEvaluator& ev, const Contour& c,
                     const std::vector<Mat>& delta, int trials, std::uint64_t seed);

struct KernelResult {
  double kernel = 0.0;       // max ||W(delta g)|| / ||g||
  double adjointness = 0.0;  // max |<W f, x> - <f, O_{A*,B*} x>| / (|u| |x|)
  int span_rank = 0;         // rank of W(e_j / (z - p)) over two exterior p
};

KernelResult check_kernel(const SystemTriple& sys, const ParabolicDomain& dom, const Contour& c,
                          const std::vector<Mat>& delta, int trials, std::uint64_t seed);

struct SpectralInclusion {
  double min_margin = 0.0;
  std::vector<cplx> eigenvalues;
  std::vector<double> margins;
};

SpectralInclusion check_spectral_inclusion(const SystemTriple& sys, const ParabolicDomain& dom);

// Seeded pole draws on either side of the contour, at least `clearance`
// local panel lengths away from every node. On coarse contours the clearance
// is relaxed by halves, at most three times, before giving up.
cplx random_interior_pole(const ParabolicDomain& dom, const Contour& c, std::mt19937_64& rng, double clearance = 1.0);
cplx random_exterior_pole(const ParabolicDomain& dom, const Contour& c, std::mt19937_64& rng, double clearance = 1.0);

// ---------------------------------------------------------------------------
// Report

struct CheckResult {
  std::string name;
  bool pass = false;
  double residual = 0.0;
  std::string relation = "<=";  // pass iff residual <relation> tolerance
  double tolerance = 0.0;
  std::string detail;
  std::map<std::string, double> metrics;
};

bool relation_holds(double residual, const std::string& relation, double tolerance);

struct ContourRow {
  cplx z;
  cplx dz;
};

struct DeltaRow {
  double s = 0.0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
};

struct EigenRow {
  cplx lambda;
  double margin = 0.0;
};

struct Report {
  int schema_version = kReportSchemaVersion;
  std::string scenario_name;
  std::uint64_t seed = 0;
  int n = 0;
  int nodes = 0;
  double T_max = 0.0;
  std::string abort_reason;
  ConstantsBundle constants;
  std::map<std::string, double> tolerances;
  std::vector<CheckResult> checks;
  std::map<std::string, double> bounds;
  std::map<std::string, double> quadrature;
  std::map<std::string, std::pair<double, double>> echo;  // complex values as (re, im)
  std::map<std::string, double> timing_ms;

  // Plot data, not part of the JSON.
  std::vector<ContourRow> contour;
  std::vector<DeltaRow> delta_profile;
  std::vector<EigenRow> eigen;

  bool all_pass() const;
  const CheckResult* find(const std::string& name) const;
};

Report run_scenario(const Scenario& s);

std::string report_to_json(const Report& r);
Report report_from_json(const std::string& text);
// Plain text table of the checks.
std::string render_text(const Report& r);

struct ReportPaths {
  std::string json;
  std::string contour_csv;
  std::string delta_csv;
  std::string eigen_csv;
};

// Writes report.json, contour.csv, delta_profile.csv and eigenvalues.csv into `dir`.
ReportPaths emit_report(const Report& r, const std::string& dir);

std::string contour_csv(const std::vector<ContourRow>& rows);
std::string delta_csv(const std::vector<DeltaRow>& rows);
std::string eigen_csv(const std::vector<EigenRow>& rows);

}  // namespace pmodel
