#pragma once

#include <cstdint>
#include <vector>

#include "dacl/data.hpp"
#include "dacl/rng.hpp"

namespace dacl {

// Without-replacement index stream: a seeded shuffle consumed in order,
// reshuffled whenever exhausted, so pools smaller than a batch wrap around.
class IndexStream {
 public:
  IndexStream() = default;
  IndexStream(std::size_t pool_size, std::uint64_t seed);

  std::size_t next();
  std::size_t pool_size() const { return order_.size(); }

 private:
  void reshuffle();

  std::vector<std::uint32_t> order_;
  std::size_t pos_ = 0;
  Rng rng_{0};
};

struct DomainBatch {
  Matrix xl;            // labeled rows; 0 x vocab when the domain has none
  std::vector<int> yl;  // parallel labels
  Matrix xu;            // unlabeled rows; 0 x vocab when the domain has none
};

struct Batches {
  std::vector<DomainBatch> domains;
};

// One labeled + one unlabeled minibatch per domain per draw, each from its
// own seeded stream. Domains with an empty pool yield empty batches for that
// pool; the trainer decides whether that is legal.
class BatchSampler {
 public:
  BatchSampler(const SplitDataset& data, std::size_t batch, bool binarize, std::uint64_t seed);

  Batches sample();
  // ceil(largest labeled train pool / batch): one epoch covers every labeled
  // example exactly once when pool sizes divide the batch evenly.
  std::size_t steps_per_epoch() const;
  // Labeled examples served so far for one domain (UDA isolation counter).
  std::uint64_t labeled_served(std::size_t domain) const;

 private:
  const SplitDataset* data_;
  std::size_t batch_;
  bool binarize_;
  std::vector<IndexStream> labeled_;
  std::vector<IndexStream> unlabeled_;
  std::vector<std::uint64_t> served_;
};

}  // namespace dacl
