#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dacl/mlp.hpp"

namespace dacl {

// Shapes and gating for the shared-private model: one shared extractor, one
// private extractor per domain, twin classifiers over the concatenated
// features, and a multinomial domain discriminator over the shared features.
struct ModelSpec {
  std::size_t vocab = 0;
  std::size_t n_domains = 0;
  std::size_t n_classes = 2;
  std::size_t shared_dim = 128;
  std::size_t domain_dim = 64;
  std::vector<std::size_t> extractor_hidden = {1000, 500};
  std::size_t c1_hidden = 128;
  std::size_t c2_hidden = 64;
  std::size_t d_hidden = 128;
  bool with_c2 = true;
  bool with_discriminator = true;
  // Domains without a private extractor get zero domain features (used for
  // an unseen target domain). Empty means every domain has one.
  std::vector<std::uint8_t> extractor_present;

  void validate() const;
  bool has_extractor(std::size_t domain) const;
  std::size_t feature_dim() const { return shared_dim + domain_dim; }

  MlpSpec shared_spec() const;
  MlpSpec domain_spec() const;
  MlpSpec classifier_spec(std::size_t hidden) const;
  MlpSpec discriminator_spec() const;
};

struct ModelParams {
  ModelSpec spec;
  Mlp shared;
  std::vector<std::optional<Mlp>> domain;
  Mlp c1;
  std::optional<Mlp> c2;
  std::optional<Mlp> disc;

  // Each component draws from its own sub-seeded stream, so dropping C2 or
  // the discriminator leaves every other component's weights untouched.
  static ModelParams init(const ModelSpec& spec, std::uint64_t seed);
  std::size_t param_count() const;
};

// Stable walk over parameter groups in a fixed order: shared, domain_<m>,
// c1, c2, disc (absent components skipped). Matrices come in layer order,
// weight then bias. Snapshots and optimizer state key off these names.
using GroupVisitor =
    std::function<void(const std::string& name, const std::vector<Matrix*>& mats)>;
using ConstGroupVisitor =
    std::function<void(const std::string& name, const std::vector<const Matrix*>& mats)>;
void for_each_group(ModelParams& params, const GroupVisitor& visit);
void for_each_group(const ModelParams& params, const ConstGroupVisitor& visit);

// Which components backward() should reach on a given tape.
struct GroupMask {
  bool extractors = false;   // F_s and every F_d
  bool classifiers = false;  // C_1 and C_2
  bool discriminator = false;

  static GroupMask all() { return {true, true, true}; }
  static GroupMask none() { return {}; }
};

// Per-tape view of the model. Extraction applies a final ReLU on top of each
// extractor MLP, so features are always non-negative.
struct BoundModel {
  const ModelParams* params = nullptr;
  ad::Tape* tape = nullptr;
  BoundMlp shared;
  std::vector<std::optional<BoundMlp>> domain;
  BoundMlp c1;
  std::optional<BoundMlp> c2;
  std::optional<BoundMlp> disc;

  ad::Value extract_shared(ad::Value x) const;
  // Zero features when the domain has no extractor.
  ad::Value extract_domain(ad::Value x, std::size_t domain_index) const;
  ad::Value zero_domain_feats(std::size_t batch) const;
  ad::Value classify1(ad::Value feats) const;  // probabilities
  ad::Value classify2(ad::Value feats) const;  // requires C2
  ad::Value discriminate(ad::Value shared_feats) const;  // requires D
};

BoundModel bind(ad::Tape& tape, const ModelParams& params, GroupMask mask);

// Test-time probabilities: the average of the twin classifiers (or C1 alone
// under the no-C2 ablation). X is a dense batch x vocab matrix.
Matrix predict_proba(const ModelParams& params, const Matrix& x, std::size_t domain_index,
                     bool zero_domain = false);
// Argmax of predict_proba; ties resolve to the lowest class index.
std::vector<int> predict(const ModelParams& params, const Matrix& x, std::size_t domain_index,
                         bool zero_domain = false);

}  // namespace dacl
