#include "dacl/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace dacl {

void adam_update(Matrix& param, const Matrix& grad, AdamState& state, const AdamConfig& cfg,
                 double lr, double sign) {
  if (!param.same_shape(grad)) {
    throw std::invalid_argument("adam_update: param " + param.shape_str() + " vs grad " +
                                grad.shape_str());
  }
  if (state.t == 0) {
    state.m = Matrix(param.rows(), param.cols());
    state.v = Matrix(param.rows(), param.cols());
  } else if (!state.m.same_shape(param)) {
    throw std::invalid_argument("adam_update: state shaped " + state.m.shape_str() +
                                " reused for param " + param.shape_str());
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  auto p = param.data();
  auto g = grad.data();
  auto m = state.m.data();
  auto v = state.v.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = sign * g[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void AdamOpt::update(const std::string& group, std::span<Matrix* const> params,
                     std::span<const Matrix* const> grads, double lr, double sign) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("AdamOpt::update: " + std::to_string(params.size()) +
                                " params vs " + std::to_string(grads.size()) + " grads");
  }
  std::vector<AdamState>& st = states_[group];
  if (st.empty()) st.resize(params.size());
  if (st.size() != params.size()) {
    throw std::invalid_argument("AdamOpt::update: group '" + group + "' has " +
                                std::to_string(st.size()) + " states, got " +
                                std::to_string(params.size()) + " params");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_update(*params[i], *grads[i], st[i], cfg_, lr, sign);
  }
}

}  // namespace dacl
