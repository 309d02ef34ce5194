#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dacl {

enum class Ablation { kNone, kNoDiscriminator, kNoSecondClassifier };

// CLI spellings: none / no-d / no-c2.
std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

// Everything a training run needs beyond the dataset itself. Field defaults
// are the published hyperparameters.
struct TrainConfig {
  double alpha = 0.1;  // weight of the separation regularizer in the L-step
  double gamma = 0.1;  // weight of the domain-adversarial term in the R-step
  double lr = 1e-4;
  std::size_t batch = 8;  // per domain, per pool
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::kNone;
  std::size_t shared_dim = 128;
  std::size_t domain_dim = 64;
  std::vector<std::size_t> extractor_hidden = {1000, 500};
  std::size_t c1_hidden = 128;
  std::size_t c2_hidden = 64;
  std::size_t d_hidden = 128;
  bool binarize = false;

  void validate() const;  // throws ConfigError

  // Canonical key=value lines, one per field, fixed order. parse() of the
  // result reproduces the config exactly (doubles round-trip).
  std::string serialize() const;
  // Throws ConfigError on unknown keys or unparsable values.
  void apply(const std::string& key, const std::string& value);
  static TrainConfig parse_file(const std::string& path);

  // FNV-1a 64 over serialize(); reported as 16 hex digits.
  std::uint64_t fingerprint() const;
  std::string fingerprint_hex() const;
};

std::uint64_t fnv1a64(const std::string& s);

}  // namespace dacl
