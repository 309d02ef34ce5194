#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dacl/config.hpp"
#include "dacl/data.hpp"
#include "dacl/trainer.hpp"

namespace dacl {

struct EvalReport {
  // Kept in dataset order so reports mirror the corpus layout.
  std::vector<std::pair<std::string, double>> per_domain;
  double average = 0.0;
  std::string config_fingerprint;
  std::uint64_t seed = 0;
  std::string notes;

  // average = exact unweighted mean of the per-domain accuracies.
  void set_average();
  std::optional<double> accuracy_of(const std::string& domain) const;
};

// Accuracy on every domain's test pool. With `uda_target` set (or for any
// domain without a private extractor), prediction zeroes the domain features.
// Throws ConfigError on an empty test pool.
EvalReport evaluate(const ModelParams& params, const SplitDataset& data,
                    std::optional<std::size_t> uda_target, bool binarize);

// Split views over a raw corpus. Each domain's labeled pool is shuffled once
// per seed; unlabeled pools pass through untouched.
SplitDataset ratio_view(const MultiDomainDataset& raw, std::uint64_t seed);
SplitDataset fold_view(const MultiDomainDataset& raw, unsigned fold, std::uint64_t seed);

// Per-run callbacks for multi-run operations. `metrics` is asked once per run
// for a step sink; `snapshot` receives each run's best parameters. Run names:
// "run" (single split), "fold<k>", and "<arm>-..." prefixes for ablations.
struct RunHooks {
  std::function<ReportSink(const std::string& run)> metrics;
  std::function<void(const std::string& run, const ModelParams& best)> snapshot;
};

// Executes fn(0..n-1) on up to `threads` workers. Exceptions propagate after
// all workers join. Results must not depend on scheduling; every run here
// derives its randomness from its own config, so they do not.
void parallel_runs(std::size_t n, std::size_t threads,
                   const std::function<void(std::size_t)>& fn);

struct MdtcResult {
  EvalReport report;                    // averaged over folds
  std::vector<EvalReport> fold_reports;  // one per fold, fold order
};

// Multi-domain text classification: trains on each fold view (folds is 1 for
// a 70/10/20 split or 5 for cross-validation), evaluates the best-validation
// snapshot on the fold test pools, and averages.
MdtcResult run_mdtc(const MultiDomainDataset& raw, const TrainConfig& cfg, unsigned folds,
                    const RunHooks& hooks = {}, std::size_t threads = 1);

// A single shared MLP with one classifier over the pooled labeled data: no
// private extractors, no second classifier, no discriminator. The comparison
// point for the full model's multi-domain benefit.
ModelSpec pooled_baseline_spec(const TrainConfig& cfg, std::size_t vocab,
                               std::size_t n_domains);
MdtcResult run_mdtc_baseline(const MultiDomainDataset& raw, const TrainConfig& cfg,
                             unsigned folds, const RunHooks& hooks = {},
                             std::size_t threads = 1);

struct AblationResult {
  EvalReport full;
  EvalReport no_d;
  EvalReport no_c2;
};

// Three trainings differing only in the ablation flag, sharing the seed (and
// therefore the splits and the untouched components' initial weights).
AblationResult run_ablation(const MultiDomainDataset& raw, const TrainConfig& cfg,
                            unsigned folds, const RunHooks& hooks = {},
                            std::size_t threads = 1);

// Multi-source unsupervised domain adaptation. The target's labeled pool is
// withheld as the test set and reused, stripped of labels, as unlabeled
// training data (flagged in the report's notes); the target gets no private
// extractor and contributes no classification loss. Sources use ratio splits
// (their test portions are unused). The report carries the target's accuracy
// only. Throws ConfigError on an unknown target or one with no data.
EvalReport run_uda(const MultiDomainDataset& raw, const std::string& target,
                   const TrainConfig& cfg, const RunHooks& hooks = {});

// Pooled-source baseline for the same protocol: a single shared MLP with one
// classifier, no private extractors, no discriminator, trained on the pooled
// source labels and evaluated on the target test pool.
EvalReport run_uda_baseline(const MultiDomainDataset& raw, const std::string& target,
                            const TrainConfig& cfg, const RunHooks& hooks = {});

enum class SweepParameter { kAlpha, kGamma };

std::string to_string(SweepParameter p);
SweepParameter sweep_parameter_from_string(const std::string& s);

struct SweepSpec {
  SweepParameter parameter = SweepParameter::kAlpha;
  std::vector<double> values = {0.001, 0.01, 0.1, 1.0, 10.0};
  double fixed_other = 0.1;

  void validate() const;  // values nonempty and positive
};

// One full MDTC run per value, shared seed; reports in value order.
std::vector<EvalReport> run_sweep(const MultiDomainDataset& raw, const SweepSpec& spec,
                                  const TrainConfig& cfg, unsigned folds,
                                  const RunHooks& hooks = {}, std::size_t threads = 1);

// ---- report rendering (deterministic bytes) ----
// CSV: header `domain,accuracy`, one row per domain, then an AVG row.
std::string report_csv(const EvalReport& report);
// Aligned two-column table, accuracies in percent, AVG last, followed by
// config/seed and notes lines.
std::string report_table(const EvalReport& report);
// CSV across sweep points: `parameter,value,average` plus a column per domain.
std::string sweep_csv(const SweepSpec& spec, std::span<const EvalReport> reports);

}  // namespace dacl
