#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dacl/matrix.hpp"

namespace dacl {

struct SparseExample {
  std::vector<std::uint32_t> indices;  // strictly increasing, < vocab
  std::vector<double> values;          // parallel to indices
  std::optional<int> label;            // 0/1; absent for unlabeled pools
  std::uint32_t domain = 0;

  bool operator==(const SparseExample&) const = default;
};

struct DomainData {
  std::string name;
  std::vector<SparseExample> labeled;
  std::vector<SparseExample> unlabeled;
};

struct MultiDomainDataset {
  std::size_t vocab = 0;
  std::vector<DomainData> domains;

  std::size_t n_domains() const { return domains.size(); }
  std::optional<std::size_t> domain_index(const std::string& name) const;
};

// Training/eval view after splitting: labeled pool partitioned into
// train/valid/test, unlabeled pool passed through. A domain with an empty
// train pool participates only through unlabeled batches (UDA target).
struct DomainSplit {
  std::string name;
  std::vector<SparseExample> train;
  std::vector<SparseExample> valid;
  std::vector<SparseExample> test;
  std::vector<SparseExample> unlabeled;
};

struct SplitDataset {
  std::size_t vocab = 0;
  std::vector<DomainSplit> domains;

  std::size_t n_domains() const { return domains.size(); }
};

// ---- corpus I/O ----
// Manifest: one domain per line, `name TAB labeled-path TAB unlabeled-path`;
// paths are resolved relative to the manifest's directory. Example lines are
// `<label>TAB<idx>:<val> <idx>:<val> ...`; unlabeled files drop the label
// column. Indices ascending, 0-based. Malformed input raises DataError with
// file and line number.
MultiDomainDataset load_corpus(const std::string& manifest_path, std::size_t vocab);

void write_pool(const std::string& path, std::span<const SparseExample> pool, bool labeled);
// Writes manifest + <name>.labeled/<name>.unlabeled files into dir, plus a
// `meta` key=value file when meta text is given.
void write_dataset(const MultiDomainDataset& ds, const std::string& dir,
                   const std::string& meta_text = "");

// ---- split protocols ----
struct PoolSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

// One seeded shuffle into five near-equal partitions; fold k takes partition
// k as test, k+1 (mod 5) as valid, the rest as train. The five test sets are
// disjoint and cover the pool.
PoolSplit five_fold_split(std::size_t pool_size, unsigned fold, std::uint64_t seed);
// Seeded shuffle then 70/10/20 with train absorbing the rounding remainder.
PoolSplit ratio_split(std::size_t pool_size, std::uint64_t seed);

std::vector<SparseExample> take(const std::vector<SparseExample>& pool,
                                const std::vector<std::size_t>& idx);
std::vector<SparseExample> strip_labels(std::vector<SparseExample> pool);

// ---- synthetic generator ----
// Vocabulary layout: [0, shared_words) shared sentiment block; then M blocks
// of flipped_words each; then one label-independent marker word per domain;
// the rest is background. Block j is positively correlated with the label in
// its home domain j and negatively everywhere else, which is the polarity
// conflict a pooled classifier cannot resolve.
struct SynthSpec {
  std::size_t n_domains = 3;
  std::size_t vocab = 5000;
  std::size_t shared_words = 20;
  std::size_t flipped_words = 20;  // per domain
  std::size_t labeled_per_domain = 100;
  std::size_t unlabeled_per_domain = 1000;
  double noise = 0.0;  // post-generation label flip rate
  std::uint64_t seed = 0;
  // Emission rates. Defaults make any single shared word a perfect stump at
  // noise 0: present iff the (pre-noise) label is positive.
  double shared_hi = 1.0;
  double shared_lo = 0.0;
  double flip_hi = 0.6;
  double flip_lo = 0.05;
  double marker_rate = 0.5;
  std::size_t background_tokens = 10;

  void validate() const;  // throws ConfigError
  std::string serialize() const;
  std::size_t marker_start() const { return shared_words + n_domains * flipped_words; }
  std::size_t background_start() const { return marker_start() + n_domains; }
  // Expected nonzero count per example (background collisions accounted).
  double expected_nnz() const;
};

MultiDomainDataset generate_synthetic(const SynthSpec& spec);

// ---- densification ----
Matrix to_dense_batch(std::span<const SparseExample> examples, std::size_t vocab,
                      bool binarize = false);
std::vector<int> labels_of(std::span<const SparseExample> examples);

}  // namespace dacl
