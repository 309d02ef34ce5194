#include "dacl/losses.hpp"

#include <stdexcept>
#include <string>

namespace dacl {

namespace {

// (1/B) sum_b sum_c mask .* log(max(p, floor)) as a tape value.
ad::Value masked_log_mean(ad::Tape& tape, ad::Value probs, Matrix mask) {
  ad::Value m = tape.leaf(std::move(mask));
  return ad::mean_rows(ad::mul(ad::log(ad::clamp_min(probs, kProbFloor)), m));
}

}  // namespace

ad::Value classification_loss(ad::Tape& tape, ad::Value probs, std::span<const int> labels) {
  const std::size_t batch = probs.rows();
  const std::size_t classes = probs.cols();
  if (labels.size() != batch) {
    throw std::invalid_argument("classification_loss: " + std::to_string(labels.size()) +
                                " labels for a batch of " + std::to_string(batch));
  }
  Matrix onehot(batch, classes);
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::invalid_argument("classification_loss: label " + std::to_string(y) +
                                  " outside [0, " + std::to_string(classes) + ")");
    }
    onehot(b, static_cast<std::size_t>(y)) = 1.0;
  }
  return ad::scale(masked_log_mean(tape, probs, std::move(onehot)), -1.0);
}

ad::Value separation_loss(ad::Value shared, ad::Value domain_feats) {
  if (shared.rows() != domain_feats.rows()) {
    throw std::invalid_argument("separation_loss: batch sizes disagree: " +
                                std::to_string(shared.rows()) + " vs " +
                                std::to_string(domain_feats.rows()));
  }
  return ad::frob_sq(ad::matmul(ad::transpose(shared), domain_feats));
}

ad::Value domain_adv_loss(ad::Tape& tape, ad::Value domain_probs, std::size_t domain_index) {
  if (domain_index >= domain_probs.cols()) {
    throw std::invalid_argument("domain_adv_loss: domain " + std::to_string(domain_index) +
                                " outside [0, " + std::to_string(domain_probs.cols()) + ")");
  }
  Matrix mask(domain_probs.rows(), domain_probs.cols());
  for (std::size_t b = 0; b < mask.rows(); ++b) mask(b, domain_index) = 1.0;
  return masked_log_mean(tape, domain_probs, std::move(mask));
}

ad::Value discrepancy_loss(ad::Value p1, ad::Value p2) {
  return ad::l1_rowdiff_mean(p1, p2);
}

namespace {

ad::Value sum_terms(std::span<const ad::Value> terms) {
  if (terms.empty()) throw std::invalid_argument("loss: need at least one domain term");
  ad::Value acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
  return acc;
}

}  // namespace

ad::Value separation_loss(std::span<const ad::Value> shared,
                          std::span<const ad::Value> domain_feats) {
  if (shared.size() != domain_feats.size()) {
    throw std::invalid_argument("separation_loss: " + std::to_string(shared.size()) +
                                " shared batches vs " + std::to_string(domain_feats.size()) +
                                " domain batches");
  }
  std::vector<ad::Value> terms;
  for (std::size_t m = 0; m < shared.size(); ++m) {
    terms.push_back(separation_loss(shared[m], domain_feats[m]));
  }
  return sum_terms(terms);
}

ad::Value domain_adv_loss(ad::Tape& tape, std::span<const ad::Value> domain_probs) {
  std::vector<ad::Value> terms;
  for (std::size_t m = 0; m < domain_probs.size(); ++m) {
    if (domain_probs[m].cols() != domain_probs.size()) {
      throw std::invalid_argument("domain_adv_loss: batch " + std::to_string(m) + " has " +
                                  std::to_string(domain_probs[m].cols()) + " columns for " +
                                  std::to_string(domain_probs.size()) + " domains");
    }
    terms.push_back(domain_adv_loss(tape, domain_probs[m], m));
  }
  return sum_terms(terms);
}

ad::Value discrepancy_loss(std::span<const ad::Value> p1, std::span<const ad::Value> p2) {
  if (p1.size() != p2.size()) {
    throw std::invalid_argument("discrepancy_loss: list sizes disagree");
  }
  std::vector<ad::Value> terms;
  for (std::size_t m = 0; m < p1.size(); ++m) terms.push_back(discrepancy_loss(p1[m], p2[m]));
  return sum_terms(terms);
}

}  // namespace dacl
