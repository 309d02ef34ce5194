#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dacl/matrix.hpp"
#include "dacl/rng.hpp"
#include "dacl/tape.hpp"

namespace dacl::gradcheck {

// Builds a scalar graph over the given leaves; called repeatedly with
// perturbed inputs, so it must be a pure function of the leaf payloads.
using GraphFn = std::function<ad::Value(ad::Tape&, std::span<const ad::Value>)>;

struct CheckReport {
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
  std::string worst;  // human-readable description of the worst coordinate

  bool ok(double tol) const { return max_rel_err < tol; }
};

// Relative error with a floor on the denominator so near-zero gradients
// compare absolutely: |a - n| / max(|a|, |n|, 1e-2).
double rel_err(double analytic, double numeric);

// Central-difference check of d(fn)/d(inputs[i]) for every coordinate of
// every input, step h. Analytic gradients come from one backward() pass.
CheckReport check_gradients(const GraphFn& fn, const std::vector<Matrix>& inputs,
                            double h = 1e-5);

// Uniform values in [-1, 1] pushed at least `margin` away from zero, for
// graphs with kinks at zero (relu, |.|).
Matrix random_kink_free(Rng& rng, std::size_t rows, std::size_t cols,
                        double margin = 1e-3);
// Uniform values in [lo, hi].
Matrix random_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo,
                      double hi);

struct SuiteEntry {
  std::string name;
  CheckReport report;
  double tol = 0.0;
  bool passed = false;
};

// Every differentiable tape op over >= 20 seeded random shapes each,
// plus the loss composites and the full L-step objective. Deterministic
// for a fixed seed.
std::vector<SuiteEntry> run_standard_suite(std::uint64_t seed);

bool all_passed(const std::vector<SuiteEntry>& entries);

}  // namespace dacl::gradcheck
