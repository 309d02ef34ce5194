#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "dacl/errors.hpp"
#include "dacl/eval.hpp"
#include "dacl/gradcheck.hpp"
#include "dacl/snapshot.hpp"

namespace fs = std::filesystem;
using namespace dacl;

namespace {

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw DataError("write to '" + path + "' failed");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
}

// Flags shared by the training-style commands, resolved with the precedence
// defaults < --config file < explicit flags.
struct TrainFlags {
  TrainConfig vals;
  std::string config_path;
  std::string hidden_csv;
  std::string ablation_str = "none";

  CLI::Option* alpha = nullptr;
  CLI::Option* gamma = nullptr;
  CLI::Option* lr = nullptr;
  CLI::Option* batch = nullptr;
  CLI::Option* epochs = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* ablation = nullptr;
  CLI::Option* shared_dim = nullptr;
  CLI::Option* domain_dim = nullptr;
  CLI::Option* extractor_hidden = nullptr;
  CLI::Option* c1_hidden = nullptr;
  CLI::Option* c2_hidden = nullptr;
  CLI::Option* d_hidden = nullptr;
  CLI::Option* binarize = nullptr;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "flat key=value config file");
    alpha = cmd.add_option("--alpha", vals.alpha, "separation regularizer weight");
    gamma = cmd.add_option("--gamma", vals.gamma, "domain-adversarial weight in the R-step");
    lr = cmd.add_option("--lr", vals.lr, "Adam learning rate");
    batch = cmd.add_option("--batch", vals.batch, "batch size per domain and pool");
    epochs = cmd.add_option("--epochs", vals.epochs, "training epochs");
    seed = cmd.add_option("--seed", vals.seed, "master seed");
    ablation = cmd.add_option("--ablation", ablation_str, "none | no-d | no-c2");
    shared_dim = cmd.add_option("--shared-dim", vals.shared_dim, "shared feature width");
    domain_dim = cmd.add_option("--domain-dim", vals.domain_dim, "domain feature width");
    extractor_hidden = cmd.add_option("--extractor-hidden", hidden_csv,
                                      "comma-separated extractor hidden sizes");
    c1_hidden = cmd.add_option("--c1-hidden", vals.c1_hidden, "C1 hidden width");
    c2_hidden = cmd.add_option("--c2-hidden", vals.c2_hidden, "C2 hidden width");
    d_hidden = cmd.add_option("--d-hidden", vals.d_hidden, "discriminator hidden width");
    binarize = cmd.add_flag("--binarize,!--no-binarize", vals.binarize,
                            "clamp feature counts to 0/1");
  }

  TrainConfig resolve() const {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = TrainConfig::parse_file(config_path);
    if (*alpha) cfg.alpha = vals.alpha;
    if (*gamma) cfg.gamma = vals.gamma;
    if (*lr) cfg.lr = vals.lr;
    if (*batch) cfg.batch = vals.batch;
    if (*epochs) cfg.epochs = vals.epochs;
    if (*seed) cfg.seed = vals.seed;
    if (*ablation) cfg.ablation = ablation_from_string(ablation_str);
    if (*shared_dim) cfg.shared_dim = vals.shared_dim;
    if (*domain_dim) cfg.domain_dim = vals.domain_dim;
    if (*extractor_hidden) cfg.apply("extractor_hidden", hidden_csv);
    if (*c1_hidden) cfg.c1_hidden = vals.c1_hidden;
    if (*c2_hidden) cfg.c2_hidden = vals.c2_hidden;
    if (*d_hidden) cfg.d_hidden = vals.d_hidden;
    if (*binarize) cfg.binarize = vals.binarize;
    cfg.validate();
    return cfg;
  }
};

struct RunOpts {
  std::string data_path;
  std::string out_dir;
  unsigned folds = 1;
  std::size_t threads = 1;
  std::size_t vocab = 0;  // 0: take from dataset meta, else 5000
};

void attach_run_opts(CLI::App& cmd, RunOpts& opts, bool with_folds = true) {
  cmd.add_option("--data", opts.data_path, "dataset manifest path")->required();
  cmd.add_option("--out", opts.out_dir, "output directory")->required();
  if (with_folds) {
    cmd.add_option("--folds", opts.folds, "1 (70/10/20 split) or 5 (cross-validation)");
  }
  cmd.add_option("--threads", opts.threads, "parallelism across independent runs");
  cmd.add_option("--vocab", opts.vocab, "vocabulary size (default: dataset meta, else 5000)");
}

MultiDomainDataset load_data(const RunOpts& opts) {
  std::size_t vocab = opts.vocab;
  if (vocab == 0) {
    const fs::path meta = fs::path(opts.data_path).parent_path() / "meta";
    std::ifstream in(meta);
    std::string line;
    while (in && std::getline(in, line)) {
      if (line.rfind("vocab=", 0) == 0) {
        vocab = std::stoull(line.substr(6));
        break;
      }
    }
  }
  if (vocab == 0) vocab = 5000;
  return load_corpus(opts.data_path, vocab);
}

// Every run directory is self-describing: config.txt reproduces the run via
// --config, run_manifest.txt records the full provenance.
void write_run_artifacts(const std::string& command, const TrainConfig& cfg,
                         const RunOpts& opts, const std::string& extra = "") {
  ensure_dir(opts.out_dir);
  write_text((fs::path(opts.out_dir) / "config.txt").string(), cfg.serialize());
  std::string manifest;
  manifest += "command=" + command + "\n";
  manifest += "data=" + opts.data_path + "\n";
  manifest += "out=" + opts.out_dir + "\n";
  manifest += "folds=" + std::to_string(opts.folds) + "\n";
  manifest += "threads=" + std::to_string(opts.threads) + "\n";
  manifest += "timestamp=" + timestamp_utc() + "\n";
  if (!extra.empty()) manifest += extra;
  manifest += cfg.serialize();
  write_text((fs::path(opts.out_dir) / "run_manifest.txt").string(), manifest);
}

RunHooks file_hooks(const std::string& out_dir) {
  RunHooks hooks;
  hooks.metrics = [out_dir](const std::string& run) -> ReportSink {
    const std::string path = (fs::path(out_dir) / ("metrics_" + run + ".csv")).string();
    auto stream = std::make_shared<std::ofstream>(path, std::ios::binary);
    if (!*stream) throw DataError("cannot open '" + path + "' for writing");
    *stream << step_report_csv_header() << "\n";
    return [stream](const StepReport& r) { *stream << to_csv_row(r) << "\n"; };
  };
  hooks.snapshot = [out_dir](const std::string& run, const ModelParams& best) {
    save_snapshot((fs::path(out_dir) / ("snapshot_" + run + ".bin")).string(), best);
  };
  return hooks;
}

void write_report(const std::string& out_dir, const std::string& stem,
                  const EvalReport& report) {
  write_text((fs::path(out_dir) / (stem + ".csv")).string(), report_csv(report));
  write_text((fs::path(out_dir) / (stem + ".txt")).string(), report_table(report));
}

int cmd_gradcheck(std::uint64_t seed) {
  using gradcheck::SuiteEntry;
  const std::vector<SuiteEntry> entries = gradcheck::run_standard_suite(seed);
  std::size_t width = 4;
  for (const SuiteEntry& e : entries) width = std::max(width, e.name.size());
  for (const SuiteEntry& e : entries) {
    std::printf("%-*s  max_rel_err %.3e  (tol %.0e, %zu coords)  %s\n",
                static_cast<int>(width), e.name.c_str(), e.report.max_rel_err, e.tol,
                e.report.coords_checked, e.passed ? "PASS" : "FAIL");
    if (!e.passed) std::printf("  worst: %s\n", e.report.worst.c_str());
  }
  if (!gradcheck::all_passed(entries)) {
    std::printf("gradcheck: FAIL\n");
    return 4;
  }
  std::printf("gradcheck: all %zu checks passed\n", entries.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual adversarial co-learning for multi-domain text classification"};
  app.require_subcommand(1);
  int rc = 0;

  // gradcheck
  std::uint64_t gc_seed = 42;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference oracle self-check");
  gradcheck->add_option("--seed", gc_seed, "suite seed");
  gradcheck->callback([&] { rc = cmd_gradcheck(gc_seed); });

  // synth
  SynthSpec synth_spec;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic polarity-flip dataset");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--domains", synth_spec.n_domains, "number of domains");
  synth->add_option("--vocab", synth_spec.vocab, "vocabulary size");
  synth->add_option("--shared-words", synth_spec.shared_words, "shared sentiment block size");
  synth->add_option("--flipped-words", synth_spec.flipped_words, "per-domain flipped block");
  synth->add_option("--labeled", synth_spec.labeled_per_domain, "labeled examples per domain");
  synth->add_option("--unlabeled", synth_spec.unlabeled_per_domain,
                    "unlabeled examples per domain");
  synth->add_option("--noise", synth_spec.noise, "label flip rate");
  synth->add_option("--seed", synth_spec.seed, "generator seed");
  synth->add_option("--shared-hi", synth_spec.shared_hi, "shared word rate, positive label");
  synth->add_option("--shared-lo", synth_spec.shared_lo, "shared word rate, negative label");
  synth->add_option("--flip-hi", synth_spec.flip_hi, "flipped word rate when aligned");
  synth->add_option("--flip-lo", synth_spec.flip_lo, "flipped word rate otherwise");
  synth->add_option("--marker-rate", synth_spec.marker_rate, "domain marker word rate");
  synth->add_option("--background-tokens", synth_spec.background_tokens,
                    "uniform background draws per example");
  synth->callback([&] {
    synth_spec.validate();
    const MultiDomainDataset ds = generate_synthetic(synth_spec);
    ensure_dir(synth_out);
    write_dataset(ds, synth_out, synth_spec.serialize());
    std::printf("wrote %zu domains, vocab %zu -> %s\n", ds.n_domains(), ds.vocab,
                synth_out.c_str());
  });

  // train
  TrainFlags train_flags;
  RunOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "train and evaluate on the test split(s)");
  train_flags.attach(*train);
  attach_run_opts(*train, train_opts);
  train->callback([&] {
    const TrainConfig cfg = train_flags.resolve();
    const MultiDomainDataset data = load_data(train_opts);
    write_run_artifacts("train", cfg, train_opts);
    const MdtcResult res = run_mdtc(data, cfg, train_opts.folds, file_hooks(train_opts.out_dir),
                                    train_opts.threads);
    write_report(train_opts.out_dir, "report", res.report);
    std::printf("%s", report_table(res.report).c_str());
  });

  // eval
  TrainFlags eval_flags;
  RunOpts eval_opts;
  std::string eval_snapshot;
  unsigned eval_fold = 0;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a saved snapshot on a test split");
  eval_flags.attach(*eval);
  attach_run_opts(*eval, eval_opts);
  eval->add_option("--snapshot", eval_snapshot, "snapshot file from a training run")
      ->required();
  eval->add_option("--fold", eval_fold, "fold index the snapshot was trained on (folds=5)");
  eval->callback([&] {
    const TrainConfig cfg = eval_flags.resolve();
    if (eval_opts.folds != 1 && eval_opts.folds != 5) {
      throw ConfigError("--folds must be 1 or 5");
    }
    if (eval_fold >= eval_opts.folds) {
      throw ConfigError("--fold " + std::to_string(eval_fold) + " out of range for --folds " +
                        std::to_string(eval_opts.folds));
    }
    const MultiDomainDataset data = load_data(eval_opts);
    const SplitDataset view = eval_opts.folds == 1 ? ratio_view(data, cfg.seed)
                                                   : fold_view(data, eval_fold, cfg.seed);
    ModelParams params = ModelParams::init(make_model_spec(cfg, view), cfg.seed);
    load_snapshot(eval_snapshot, params);
    EvalReport report = evaluate(params, view, std::nullopt, cfg.binarize);
    report.config_fingerprint = cfg.fingerprint_hex();
    report.seed = cfg.seed;
    write_run_artifacts("eval", cfg, eval_opts, "snapshot=" + eval_snapshot + "\n");
    write_report(eval_opts.out_dir, "report", report);
    std::printf("%s", report_table(report).c_str());
  });

  // ablate
  TrainFlags ablate_flags;
  RunOpts ablate_opts;
  CLI::App* ablate = app.add_subcommand("ablate", "full vs no-D vs no-C2, shared seed");
  ablate_flags.attach(*ablate);
  attach_run_opts(*ablate, ablate_opts);
  ablate->callback([&] {
    if (*ablate_flags.ablation) {
      throw ConfigError("ablate runs all three arms; --ablation is not allowed here");
    }
    const TrainConfig cfg = ablate_flags.resolve();
    const MultiDomainDataset data = load_data(ablate_opts);
    write_run_artifacts("ablate", cfg, ablate_opts);
    const AblationResult res = run_ablation(data, cfg, ablate_opts.folds,
                                            file_hooks(ablate_opts.out_dir),
                                            ablate_opts.threads);
    write_report(ablate_opts.out_dir, "report_none", res.full);
    write_report(ablate_opts.out_dir, "report_no-d", res.no_d);
    write_report(ablate_opts.out_dir, "report_no-c2", res.no_c2);
    std::printf("== full ==\n%s== no-d ==\n%s== no-c2 ==\n%s",
                report_table(res.full).c_str(), report_table(res.no_d).c_str(),
                report_table(res.no_c2).c_str());
  });

  // uda
  TrainFlags uda_flags;
  RunOpts uda_opts;
  std::string uda_target;
  CLI::App* uda = app.add_subcommand("uda", "multi-source unsupervised domain adaptation");
  uda_flags.attach(*uda);
  attach_run_opts(*uda, uda_opts);
  uda->add_option("--uda-target", uda_target, "target domain name")->required();
  uda->callback([&] {
    if (uda_opts.folds != 1) {
      throw ConfigError("--uda-target conflicts with --folds " +
                        std::to_string(uda_opts.folds) + "; UDA uses ratio splits");
    }
    const TrainConfig cfg = uda_flags.resolve();
    const MultiDomainDataset data = load_data(uda_opts);
    write_run_artifacts("uda", cfg, uda_opts, "uda_target=" + uda_target + "\n");
    const EvalReport report =
        run_uda(data, uda_target, cfg, file_hooks(uda_opts.out_dir));
    write_report(uda_opts.out_dir, "report", report);
    std::printf("%s", report_table(report).c_str());
  });

  // sweep
  TrainFlags sweep_flags;
  RunOpts sweep_opts;
  std::string sweep_param = "alpha";
  std::vector<double> sweep_values;
  double sweep_fixed = 0.1;
  CLI::App* sweep = app.add_subcommand("sweep", "parameter sensitivity sweep");
  sweep_flags.attach(*sweep);
  attach_run_opts(*sweep, sweep_opts);
  sweep->add_option("--parameter", sweep_param, "alpha or gamma");
  sweep->add_option("--values", sweep_values, "sweep values")->delimiter(',');
  sweep->add_option("--fixed-other", sweep_fixed, "value of the non-swept parameter");
  sweep->callback([&] {
    const TrainConfig cfg = sweep_flags.resolve();
    SweepSpec spec;
    spec.parameter = sweep_parameter_from_string(sweep_param);
    if (!sweep_values.empty()) spec.values = sweep_values;
    spec.fixed_other = sweep_fixed;
    const MultiDomainDataset data = load_data(sweep_opts);
    write_run_artifacts("sweep", cfg, sweep_opts,
                        "sweep_parameter=" + sweep_param + "\n");
    const std::vector<EvalReport> reports =
        run_sweep(data, spec, cfg, sweep_opts.folds, file_hooks(sweep_opts.out_dir),
                  sweep_opts.threads);
    const std::string csv = sweep_csv(spec, reports);
    write_text((fs::path(sweep_opts.out_dir) / "sweep.csv").string(), csv);
    std::printf("%s", csv.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
