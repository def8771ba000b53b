// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

namespace pmodel::detail {

// Gauss-Legendre rule on [-1, 1] with nodes ascending. `wc` holds the
// interpolatory weights of the rule built on the even-indexed nodes only
// (zero elsewhere); the difference of the two sums is the error estimate.
struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
  std::vector<double> wc;
};

inline constexpr int kMaxGaussOrder = 64;

const GaussRule& gauss_rule(int q);

}  // namespace pmodel::detail
