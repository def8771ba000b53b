// SPDX-License-Identifier: Apache-2.0
// Seeded generators for property tests.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

#include "pmodel/common.hpp"

namespace gen {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
  double normal() { return std::normal_distribution<double>()(rng_); }
  pmodel::cplx cnormal() {
    const double re = normal();
    const double im = normal();
    return {re, im};
  }
  pmodel::Vec cvec(int n) {
    pmodel::Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = cnormal();
    return v;
  }
  pmodel::Mat cmat(int n, double norm) {
    pmodel::Mat m(n, n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) m(i, k) = cnormal();
    }
    return m * (norm / pmodel::opnorm(m));
  }
  // Strictly ascending values in [lo, hi] with a minimum gap.
  std::vector<double> spectrum(int n, double lo, double hi) {
    std::vector<double> t;
    while (static_cast<int>(t.size()) < n) {
      const double v = uniform(lo, hi);
      bool ok = true;
      for (double u : t) ok = ok && std::abs(u - v) > 1e-3 * (hi - lo);
      if (ok) t.push_back(v);
    }
    std::sort(t.begin(), t.end());
    return t;
  }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Runs `body` for `trials` generators derived from `seed`; failures report the trial.
inline void for_all(std::uint64_t seed, int trials, const std::function<void(Gen&, int)>& body) {
  for (int t = 0; t < trials; ++t) {
    Gen g(seed * 1000003ULL + static_cast<std::uint64_t>(t));
    CAPTURE(t);
    body(g, t);
  }
}

}  // namespace gen
