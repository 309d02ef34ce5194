#pragma once

#include <span>

#include "dacl/tape.hpp"

namespace dacl {

// Probabilities are clamped here before the log so a confidently wrong
// classifier yields a large finite loss instead of -inf.
inline constexpr double kProbFloor = 1e-12;

// The five per-step scalars, in reporting order.
struct LossBundle {
  double lc1 = 0.0;
  double lc2 = 0.0;
  double lsep = 0.0;
  double ladv_d = 0.0;
  double ladv_u = 0.0;
};

struct HyperParams {
  double alpha = 0.1;
  double gamma = 0.1;
};

// Mean negative log-likelihood of integer labels under per-row probability
// distributions (batch x classes). Labels must lie in [0, classes).
ad::Value classification_loss(ad::Tape& tape, ad::Value probs, std::span<const int> labels);

// Squared Frobenius norm of the summed outer products of shared and
// domain-private feature rows: ||S^T D||_F^2 over the batch.
ad::Value separation_loss(ad::Value shared, ad::Value domain_feats);

// Mean log-probability the discriminator assigns to the true domain,
// E log D_m(f). Always <= 0.
ad::Value domain_adv_loss(ad::Tape& tape, ad::Value domain_probs, std::size_t domain_index);

// Mean L1 distance between two per-row probability distributions; lies in
// [0, 2] per domain batch.
ad::Value discrepancy_loss(ad::Value p1, ad::Value p2);

// Per-domain lists summed over domains, matching the equations' outer sums.
// Entry m of domain_probs is domain m's discriminator batch; its true column
// is m.
ad::Value separation_loss(std::span<const ad::Value> shared,
                          std::span<const ad::Value> domain_feats);
ad::Value domain_adv_loss(ad::Tape& tape, std::span<const ad::Value> domain_probs);
ad::Value discrepancy_loss(std::span<const ad::Value> p1, std::span<const ad::Value> p2);

}  // namespace dacl
