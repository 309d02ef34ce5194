#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dacl/matrix.hpp"

namespace dacl {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;  // added outside the square root
};

struct AdamState {
  Matrix m;  // first-moment estimate
  Matrix v;  // second-moment estimate
  std::uint64_t t = 0;
};

// One bias-corrected Adam step. sign=+1 descends the loss; sign=-1 ascends
// (i.e. descends the negated gradient). The state's shapes are fixed on
// first use.
void adam_update(Matrix& param, const Matrix& grad, AdamState& state, const AdamConfig& cfg,
                 double lr, double sign = 1.0);

// Optimizer state for named parameter groups. Each training step kind owns
// its own AdamOpt, so a group touched by two step kinds keeps two moment
// histories.
class AdamOpt {
 public:
  explicit AdamOpt(AdamConfig cfg = {}) : cfg_(cfg) {}

  // params[i] moves along sign * grads[i]; group order must be stable call
  // to call.
  void update(const std::string& group, std::span<Matrix* const> params,
              std::span<const Matrix* const> grads, double lr, double sign = 1.0);

  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::map<std::string, std::vector<AdamState>> states_;
};

}  // namespace dacl
