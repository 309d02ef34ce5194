#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dacl/matrix.hpp"
#include "dacl/rng.hpp"
#include "dacl/tape.hpp"

namespace dacl {

enum class OutputActivation { kNone, kSoftmax };

// Fully-connected net: ReLU after every hidden layer, then the output
// activation. in_dim -> hidden... -> out_dim.
struct MlpSpec {
  std::size_t in_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t out_dim = 0;
  OutputActivation out_act = OutputActivation::kNone;

  void validate() const;  // throws ConfigError on zero dims
  // Per-layer (fan_in, fan_out), hidden layers then the output layer.
  std::vector<std::pair<std::size_t, std::size_t>> layer_dims() const;
};

struct Mlp {
  MlpSpec spec;
  std::vector<Matrix> weights;  // layer i: fan_in x fan_out
  std::vector<Matrix> biases;   // layer i: 1 x fan_out

  // He-scaled normal weights (stddev sqrt(2/fan_in)), zero biases.
  static Mlp init(const MlpSpec& spec, Rng& rng);
  std::size_t param_count() const;
};

// Per-tape view of an Mlp: leaf_ref nodes over the net's matrices. Valid only
// while both the tape and the Mlp stay alive and unmodified.
struct BoundMlp {
  const Mlp* net = nullptr;
  std::vector<ad::Value> w;
  std::vector<ad::Value> b;

  ad::Value forward(ad::Value x) const;  // x: batch x in_dim
};

BoundMlp bind(ad::Tape& tape, const Mlp& net, bool requires_grad);

}  // namespace dacl
