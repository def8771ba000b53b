// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pmodel/verify_harness.hpp"

namespace fixtures {

// A0 = [2], alpha = 1/2, F = [0.2].
inline pmodel::SystemTriple scalar_system(double kappa = 1.0, double ell = 1.0) {
  const auto w = pmodel::WeightFamily::power_affine(0.5, pmodel::DomainCase::HalfLine);
  const auto A0 = pmodel::SpectralDiagonal::make({2.0}, pmodel::DomainCase::HalfLine);
  pmodel::Mat F(1, 1);
  F(0, 0) = 0.2;
  return pmodel::build_system(A0, w, F, kappa, ell);
}

// A0 = diag(1, 4, 9), alpha = 1/2, seeded F with ||F|| = 0.3.
inline pmodel::Scenario fixture_scenario(int nodes = 2048) {
  pmodel::Scenario s;
  s.name = "fixture-n3";
  s.seed = 7;
  s.spectrum.values = {1.0, 4.0, 9.0};
  s.F_norm = 0.3;
  s.ell = 1.0;
  s.quad.nodes = nodes;
  return s;
}

inline pmodel::Scenario scalar_scenario(int nodes = 2048) {
  pmodel::Scenario s;
  s.name = "scalar";
  s.seed = 1;
  s.spectrum.values = {2.0};
  pmodel::Mat F(1, 1);
  F(0, 0) = 0.2;
  s.F = F;
  s.ell = 1.0;
  s.quad.nodes = nodes;
  return s;
}

}  // namespace fixtures
