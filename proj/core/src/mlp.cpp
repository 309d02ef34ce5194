#include "dacl/mlp.hpp"

#include <cmath>
#include <string>

#include "dacl/errors.hpp"

namespace dacl {

void MlpSpec::validate() const {
  if (in_dim == 0) throw ConfigError("MlpSpec: in_dim must be positive");
  if (out_dim == 0) throw ConfigError("MlpSpec: out_dim must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("MlpSpec: hidden widths must be positive");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> MlpSpec::layer_dims() const {
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  std::size_t prev = in_dim;
  for (std::size_t h : hidden) {
    dims.emplace_back(prev, h);
    prev = h;
  }
  dims.emplace_back(prev, out_dim);
  return dims;
}

Mlp Mlp::init(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  Mlp net;
  net.spec = spec;
  for (auto [fan_in, fan_out] : spec.layer_dims()) {
    Matrix w(fan_in, fan_out);
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& x : w.data()) x = sd * rng.normal();
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(1, fan_out);
  }
  return net;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const Matrix& w : weights) n += w.size();
  for (const Matrix& b : biases) n += b.size();
  return n;
}

BoundMlp bind(ad::Tape& tape, const Mlp& net, bool requires_grad) {
  BoundMlp bound;
  bound.net = &net;
  for (const Matrix& w : net.weights) bound.w.push_back(tape.leaf_ref(&w, requires_grad));
  for (const Matrix& b : net.biases) bound.b.push_back(tape.leaf_ref(&b, requires_grad));
  return bound;
}

ad::Value BoundMlp::forward(ad::Value x) const {
  if (x.cols() != net->spec.in_dim) {
    throw std::invalid_argument("BoundMlp::forward: input has " + std::to_string(x.cols()) +
                                " columns, net expects " + std::to_string(net->spec.in_dim));
  }
  ad::Value h = x;
  const std::size_t layers = w.size();
  for (std::size_t i = 0; i < layers; ++i) {
    h = ad::add_rowvec(ad::matmul(h, w[i]), b[i]);
    if (i + 1 < layers) h = ad::relu(h);
  }
  if (net->spec.out_act == OutputActivation::kSoftmax) h = ad::row_softmax(h);
  return h;
}

}  // namespace dacl
