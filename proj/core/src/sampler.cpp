#include "dacl/sampler.hpp"

#include <numeric>
#include <stdexcept>

namespace dacl {

IndexStream::IndexStream(std::size_t pool_size, std::uint64_t seed)
    : order_(pool_size), rng_(seed) {
  std::iota(order_.begin(), order_.end(), 0u);
  if (!order_.empty()) reshuffle();
}

void IndexStream::reshuffle() {
  rng_.shuffle(order_);
  pos_ = 0;
}

std::size_t IndexStream::next() {
  if (order_.empty()) throw std::logic_error("IndexStream::next on an empty pool");
  if (pos_ == order_.size()) reshuffle();
  return order_[pos_++];
}

namespace {

constexpr std::uint64_t kLabeledStreamBase = 2000;
constexpr std::uint64_t kUnlabeledStreamBase = 3000;

}  // namespace

BatchSampler::BatchSampler(const SplitDataset& data, std::size_t batch, bool binarize,
                           std::uint64_t seed)
    : data_(&data), batch_(batch), binarize_(binarize), served_(data.n_domains(), 0) {
  if (batch == 0) throw std::invalid_argument("BatchSampler: batch must be positive");
  for (std::size_t m = 0; m < data.n_domains(); ++m) {
    labeled_.emplace_back(data.domains[m].train.size(), mix_seed(seed, kLabeledStreamBase + m));
    unlabeled_.emplace_back(data.domains[m].unlabeled.size(),
                            mix_seed(seed, kUnlabeledStreamBase + m));
  }
}

Batches BatchSampler::sample() {
  Batches b;
  for (std::size_t m = 0; m < data_->n_domains(); ++m) {
    const DomainSplit& d = data_->domains[m];
    DomainBatch db;
    if (!d.train.empty()) {
      std::vector<SparseExample> rows;
      rows.reserve(batch_);
      for (std::size_t i = 0; i < batch_; ++i) rows.push_back(d.train[labeled_[m].next()]);
      served_[m] += batch_;
      db.xl = to_dense_batch(rows, data_->vocab, binarize_);
      db.yl = labels_of(rows);
    } else {
      db.xl = Matrix(0, data_->vocab);
    }
    if (!d.unlabeled.empty()) {
      std::vector<SparseExample> rows;
      rows.reserve(batch_);
      for (std::size_t i = 0; i < batch_; ++i) rows.push_back(d.unlabeled[unlabeled_[m].next()]);
      db.xu = to_dense_batch(rows, data_->vocab, binarize_);
    } else {
      db.xu = Matrix(0, data_->vocab);
    }
    b.domains.push_back(std::move(db));
  }
  return b;
}

std::size_t BatchSampler::steps_per_epoch() const {
  std::size_t largest = 0;
  for (const DomainSplit& d : data_->domains) largest = std::max(largest, d.train.size());
  if (largest == 0) return 0;
  return (largest + batch_ - 1) / batch_;
}

std::uint64_t BatchSampler::labeled_served(std::size_t domain) const {
  return served_.at(domain);
}

}  // namespace dacl
