#pragma once

#include <functional>
#include <optional>

#include "dacl/adam.hpp"
#include "dacl/config.hpp"
#include "dacl/losses.hpp"
#include "dacl/model.hpp"
#include "dacl/sampler.hpp"

namespace dacl {

struct StepReport {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // 1-based within the epoch
  LossBundle losses;      // ablated terms report 0
  double wall_ms = 0.0;
};

std::string step_report_csv_header();  // epoch,step,lc1,lc2,lsep,ladv_d,ladv_u,wall_ms
std::string to_csv_row(const StepReport& r);

struct TrainResult {
  ModelParams params;  // after the last step
  ModelParams best;    // best mean validation accuracy; equals params when
                       // no domain has a validation pool
  double best_valid_acc = -1.0;
  std::size_t best_epoch = 0;
};

using ReportSink = std::function<void(const StepReport&)>;

// Accuracy of the averaged-probability prediction over a labeled pool.
double pool_accuracy(const ModelParams& params, std::span<const SparseExample> pool,
                     std::size_t domain, bool zero_domain, std::size_t vocab, bool binarize);

// Model shape derived from config and data: a domain gets a private
// extractor iff it has labeled training data; ablations gate C2/D.
ModelSpec make_model_spec(const TrainConfig& cfg, const SplitDataset& data);

// The stepwise adversarial loop. One iteration = L-step (descend extractors
// and classifiers on L_c1 + L_c2 + alpha*L_sep), A-step (ascend C1/C2 on
// -(L_c1+L_c2) + L_adv_u, then ascend D on L_adv_d), R-step (descend
// extractors on L_adv_u + gamma*L_adv_d), all on the same sampled batches.
// Component gating follows the model spec: steps touching absent components
// degenerate as the ablation table prescribes.
class Trainer {
 public:
  Trainer(const SplitDataset& data, TrainConfig cfg);
  Trainer(const SplitDataset& data, TrainConfig cfg, ModelSpec spec);

  Batches sample() { return sampler_.sample(); }
  // Each step returns the terms it computed; absent terms stay 0.
  LossBundle l_step(const Batches& b);
  LossBundle a_step(const Batches& b);
  LossBundle r_step(const Batches& b);

  TrainResult run(const ReportSink& sink = {});

  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  const BatchSampler& sampler() const { return sampler_; }
  std::size_t steps_per_epoch() const { return sampler_.steps_per_epoch(); }

 private:
  void update_group(AdamOpt& opt, const std::string& name, Mlp& net, const BoundMlp& bound,
                    double sign);
  double mean_valid_accuracy() const;

  const SplitDataset* data_;
  TrainConfig cfg_;
  ModelParams params_;
  BatchSampler sampler_;
  AdamOpt opt_l_;
  AdamOpt opt_a_;
  AdamOpt opt_r_;
};

}  // namespace dacl
