#include "dacl/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "dacl/errors.hpp"
#include "dacl/rng.hpp"

namespace dacl {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

ReportSink sink_for(const RunHooks& hooks, const std::string& run) {
  return hooks.metrics ? hooks.metrics(run) : ReportSink{};
}

void snapshot_to(const RunHooks& hooks, const std::string& run, const ModelParams& best) {
  if (hooks.snapshot) hooks.snapshot(run, best);
}

RunHooks prefixed(const RunHooks& hooks, const std::string& prefix) {
  RunHooks out;
  if (hooks.metrics) {
    out.metrics = [&hooks, prefix](const std::string& run) {
      return hooks.metrics(prefix + "-" + run);
    };
  }
  if (hooks.snapshot) {
    out.snapshot = [&hooks, prefix](const std::string& run, const ModelParams& best) {
      hooks.snapshot(prefix + "-" + run, best);
    };
  }
  return out;
}

}  // namespace

void EvalReport::set_average() {
  if (per_domain.empty()) {
    average = 0.0;
    return;
  }
  double sum = 0.0;
  for (const auto& [name, acc] : per_domain) sum += acc;
  average = sum / static_cast<double>(per_domain.size());
}

std::optional<double> EvalReport::accuracy_of(const std::string& domain) const {
  for (const auto& [name, acc] : per_domain) {
    if (name == domain) return acc;
  }
  return std::nullopt;
}

EvalReport evaluate(const ModelParams& params, const SplitDataset& data,
                    std::optional<std::size_t> uda_target, bool binarize) {
  if (params.spec.n_domains != data.n_domains()) {
    throw ConfigError("evaluate: model has " + std::to_string(params.spec.n_domains) +
                      " domains, data has " + std::to_string(data.n_domains()));
  }
  EvalReport report;
  for (std::size_t m = 0; m < data.n_domains(); ++m) {
    const DomainSplit& d = data.domains[m];
    if (d.test.empty()) throw ConfigError("evaluate: domain '" + d.name + "' has no test pool");
    const bool zero_domain =
        (uda_target && *uda_target == m) || !params.spec.has_extractor(m);
    report.per_domain.emplace_back(
        d.name, pool_accuracy(params, d.test, m, zero_domain, data.vocab, binarize));
  }
  report.set_average();
  return report;
}

SplitDataset ratio_view(const MultiDomainDataset& raw, std::uint64_t seed) {
  SplitDataset out;
  out.vocab = raw.vocab;
  for (std::size_t m = 0; m < raw.n_domains(); ++m) {
    const DomainData& d = raw.domains[m];
    const PoolSplit ps = ratio_split(d.labeled.size(), mix_seed(seed, m));
    DomainSplit s;
    s.name = d.name;
    s.train = take(d.labeled, ps.train);
    s.valid = take(d.labeled, ps.valid);
    s.test = take(d.labeled, ps.test);
    s.unlabeled = d.unlabeled;
    out.domains.push_back(std::move(s));
  }
  return out;
}

SplitDataset fold_view(const MultiDomainDataset& raw, unsigned fold, std::uint64_t seed) {
  SplitDataset out;
  out.vocab = raw.vocab;
  for (std::size_t m = 0; m < raw.n_domains(); ++m) {
    const DomainData& d = raw.domains[m];
    const PoolSplit ps = five_fold_split(d.labeled.size(), fold, mix_seed(seed, m));
    DomainSplit s;
    s.name = d.name;
    s.train = take(d.labeled, ps.train);
    s.valid = take(d.labeled, ps.valid);
    s.test = take(d.labeled, ps.test);
    s.unlabeled = d.unlabeled;
    out.domains.push_back(std::move(s));
  }
  return out;
}

void parallel_runs(std::size_t n, std::size_t threads,
                   const std::function<void(std::size_t)>& fn) {
  if (threads < 1) threads = 1;
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (failure || next >= n) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

MdtcResult mdtc_impl(const MultiDomainDataset& raw, const TrainConfig& cfg, unsigned folds,
                     const RunHooks& hooks, std::size_t threads,
                     const std::optional<ModelSpec>& spec) {
  cfg.validate();
  if (folds != 1 && folds != 5) {
    throw ConfigError("run_mdtc: folds must be 1 or 5, got " + std::to_string(folds));
  }
  MdtcResult result;
  result.fold_reports.resize(folds);
  parallel_runs(folds, threads, [&](std::size_t fold) {
    const SplitDataset view = folds == 1
                                  ? ratio_view(raw, cfg.seed)
                                  : fold_view(raw, static_cast<unsigned>(fold), cfg.seed);
    const std::string run = folds == 1 ? "run" : "fold" + std::to_string(fold);
    Trainer trainer = spec ? Trainer(view, cfg, *spec) : Trainer(view, cfg);
    const TrainResult trained = trainer.run(sink_for(hooks, run));
    snapshot_to(hooks, run, trained.best);
    result.fold_reports[fold] = evaluate(trained.best, view, std::nullopt, cfg.binarize);
  });

  EvalReport& avg = result.report;
  for (std::size_t m = 0; m < raw.n_domains(); ++m) {
    double sum = 0.0;
    for (const EvalReport& r : result.fold_reports) sum += r.per_domain[m].second;
    avg.per_domain.emplace_back(raw.domains[m].name, sum / static_cast<double>(folds));
  }
  avg.set_average();
  avg.config_fingerprint = cfg.fingerprint_hex();
  avg.seed = cfg.seed;
  for (EvalReport& r : result.fold_reports) {
    r.config_fingerprint = avg.config_fingerprint;
    r.seed = cfg.seed;
  }
  return result;
}

}  // namespace

MdtcResult run_mdtc(const MultiDomainDataset& raw, const TrainConfig& cfg, unsigned folds,
                    const RunHooks& hooks, std::size_t threads) {
  return mdtc_impl(raw, cfg, folds, hooks, threads, std::nullopt);
}

ModelSpec pooled_baseline_spec(const TrainConfig& cfg, std::size_t vocab,
                               std::size_t n_domains) {
  ModelSpec spec;
  spec.vocab = vocab;
  spec.n_domains = n_domains;
  spec.shared_dim = cfg.shared_dim;
  spec.domain_dim = cfg.domain_dim;
  spec.extractor_hidden = cfg.extractor_hidden;
  spec.c1_hidden = cfg.c1_hidden;
  spec.c2_hidden = cfg.c2_hidden;
  spec.d_hidden = cfg.d_hidden;
  spec.with_c2 = false;
  spec.with_discriminator = false;
  spec.extractor_present.assign(n_domains, 0);
  return spec;
}

MdtcResult run_mdtc_baseline(const MultiDomainDataset& raw, const TrainConfig& cfg,
                             unsigned folds, const RunHooks& hooks, std::size_t threads) {
  return mdtc_impl(raw, cfg, folds, hooks, threads,
                   pooled_baseline_spec(cfg, raw.vocab, raw.n_domains()));
}

AblationResult run_ablation(const MultiDomainDataset& raw, const TrainConfig& cfg,
                            unsigned folds, const RunHooks& hooks, std::size_t threads) {
  AblationResult out;
  struct Arm {
    Ablation ablation;
    EvalReport* slot;
  };
  const Arm arms[] = {{Ablation::kNone, &out.full},
                      {Ablation::kNoDiscriminator, &out.no_d},
                      {Ablation::kNoSecondClassifier, &out.no_c2}};
  for (const Arm& arm : arms) {
    TrainConfig arm_cfg = cfg;
    arm_cfg.ablation = arm.ablation;
    const std::string name = to_string(arm.ablation);
    *arm.slot = run_mdtc(raw, arm_cfg, folds, prefixed(hooks, name), threads).report;
  }
  return out;
}

namespace {

// Shared setup for UDA runs: the target's labeled pool becomes its test set
// and, stripped, joins its unlabeled pool; sources get ratio splits.
struct UdaView {
  SplitDataset data;
  std::size_t target = 0;
};

UdaView make_uda_view(const MultiDomainDataset& raw, const std::string& target,
                      std::uint64_t seed) {
  const std::optional<std::size_t> idx = raw.domain_index(target);
  if (!idx) throw ConfigError("uda: unknown target domain '" + target + "'");
  if (raw.n_domains() < 2) throw ConfigError("uda: need at least one source domain");
  UdaView view;
  view.target = *idx;
  view.data.vocab = raw.vocab;
  for (std::size_t m = 0; m < raw.n_domains(); ++m) {
    const DomainData& d = raw.domains[m];
    DomainSplit s;
    s.name = d.name;
    if (m == *idx) {
      s.test = d.labeled;
      s.unlabeled = d.unlabeled;
      std::vector<SparseExample> reused = strip_labels(d.labeled);
      s.unlabeled.insert(s.unlabeled.end(), reused.begin(), reused.end());
      if (s.unlabeled.empty()) {
        throw ConfigError("uda: target '" + target + "' has no unlabeled pool");
      }
      if (s.test.empty()) {
        throw ConfigError("uda: target '" + target + "' has no labeled pool to test on");
      }
    } else {
      const PoolSplit ps = ratio_split(d.labeled.size(), mix_seed(seed, m));
      s.train = take(d.labeled, ps.train);
      s.valid = take(d.labeled, ps.valid);
      // The source test portions are deliberately unused: UDA reports target
      // accuracy only.
      s.unlabeled = d.unlabeled;
    }
    view.data.domains.push_back(std::move(s));
  }
  return view;
}

EvalReport uda_run_common(const MultiDomainDataset& raw, const std::string& target,
                          const TrainConfig& cfg, const RunHooks& hooks,
                          const std::optional<ModelSpec>& spec, const std::string& run_name) {
  cfg.validate();
  const UdaView view = make_uda_view(raw, target, cfg.seed);
  Trainer trainer = spec ? Trainer(view.data, cfg, *spec) : Trainer(view.data, cfg);
  const TrainResult trained = trainer.run(sink_for(hooks, run_name));
  if (trainer.sampler().labeled_served(view.target) != 0) {
    throw std::logic_error("uda: target labels were read during training");
  }
  snapshot_to(hooks, run_name, trained.best);

  EvalReport report;
  report.per_domain.emplace_back(
      target, pool_accuracy(trained.best, view.data.domains[view.target].test, view.target,
                            /*zero_domain=*/true, view.data.vocab, cfg.binarize));
  report.set_average();
  report.config_fingerprint = cfg.fingerprint_hex();
  report.seed = cfg.seed;
  report.notes = "target '" + target +
                 "' labeled pool reused as unlabeled training data; labels read only at test "
                 "time";
  return report;
}

}  // namespace

EvalReport run_uda(const MultiDomainDataset& raw, const std::string& target,
                   const TrainConfig& cfg, const RunHooks& hooks) {
  return uda_run_common(raw, target, cfg, hooks, std::nullopt, "uda");
}

EvalReport run_uda_baseline(const MultiDomainDataset& raw, const std::string& target,
                            const TrainConfig& cfg, const RunHooks& hooks) {
  // A pooled-source MLP: shared extractor + C1, nothing domain-aware.
  EvalReport report =
      uda_run_common(raw, target, cfg, hooks,
                     pooled_baseline_spec(cfg, raw.vocab, raw.n_domains()), "uda-baseline");
  report.notes = "pooled-source baseline; " + report.notes;
  return report;
}

std::string to_string(SweepParameter p) {
  return p == SweepParameter::kAlpha ? "alpha" : "gamma";
}

SweepParameter sweep_parameter_from_string(const std::string& s) {
  if (s == "alpha") return SweepParameter::kAlpha;
  if (s == "gamma") return SweepParameter::kGamma;
  throw ConfigError("sweep parameter must be 'alpha' or 'gamma', got '" + s + "'");
}

void SweepSpec::validate() const {
  if (values.empty()) throw ConfigError("sweep: no values given");
  for (double v : values) {
    if (!(v > 0.0)) throw ConfigError("sweep: values must be positive, got " + fmt("%g", v));
  }
  if (!(fixed_other > 0.0)) {
    throw ConfigError("sweep: fixed value must be positive, got " + fmt("%g", fixed_other));
  }
}

std::vector<EvalReport> run_sweep(const MultiDomainDataset& raw, const SweepSpec& spec,
                                  const TrainConfig& cfg, unsigned folds,
                                  const RunHooks& hooks, std::size_t threads) {
  spec.validate();
  std::vector<EvalReport> reports;
  for (double v : spec.values) {
    TrainConfig point = cfg;
    if (spec.parameter == SweepParameter::kAlpha) {
      point.alpha = v;
      point.gamma = spec.fixed_other;
    } else {
      point.gamma = v;
      point.alpha = spec.fixed_other;
    }
    const std::string name = to_string(spec.parameter) + "_" + fmt("%g", v);
    reports.push_back(run_mdtc(raw, point, folds, prefixed(hooks, name), threads).report);
  }
  return reports;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "domain,accuracy\n";
  for (const auto& [name, acc] : report.per_domain) {
    out += name + "," + fmt("%.17g", acc) + "\n";
  }
  out += "AVG," + fmt("%.17g", report.average) + "\n";
  return out;
}

std::string report_table(const EvalReport& report) {
  std::size_t width = 6;  // "domain"
  for (const auto& [name, acc] : report.per_domain) width = std::max(width, name.size());
  auto row = [&](const std::string& name, const std::string& value) {
    std::string line = name;
    line.append(width + 2 - name.size(), ' ');
    for (std::size_t pad = value.size(); pad < 8; ++pad) line += ' ';
    return line + value + "\n";
  };
  std::string out = row("domain", "acc %");
  out += row(std::string(width, '-'), "--------");
  for (const auto& [name, acc] : report.per_domain) out += row(name, fmt("%.2f", acc * 100.0));
  out += row("AVG", fmt("%.2f", report.average * 100.0));
  out += "config " + report.config_fingerprint + ", seed " + std::to_string(report.seed) + "\n";
  if (!report.notes.empty()) out += "note: " + report.notes + "\n";
  return out;
}

std::string sweep_csv(const SweepSpec& spec, std::span<const EvalReport> reports) {
  std::string out = "parameter,value,average";
  if (!reports.empty()) {
    for (const auto& [name, acc] : reports.front().per_domain) out += "," + name;
  }
  out += "\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out += to_string(spec.parameter) + "," + fmt("%g", spec.values[i]) + "," +
           fmt("%.17g", reports[i].average);
    for (const auto& [name, acc] : reports[i].per_domain) out += "," + fmt("%.17g", acc);
    out += "\n";
  }
  return out;
}

}  // namespace dacl
