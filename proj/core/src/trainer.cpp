#include "dacl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "dacl/errors.hpp"

namespace dacl {

std::string step_report_csv_header() {
  return "epoch,step,lc1,lc2,lsep,ladv_d,ladv_u,wall_ms";
}

std::string to_csv_row(const StepReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f", r.epoch,
                r.step, r.losses.lc1, r.losses.lc2, r.losses.lsep, r.losses.ladv_d,
                r.losses.ladv_u, r.wall_ms);
  return buf;
}

double pool_accuracy(const ModelParams& params, std::span<const SparseExample> pool,
                     std::size_t domain, bool zero_domain, std::size_t vocab, bool binarize) {
  if (pool.empty()) throw ConfigError("pool_accuracy: empty pool");
  const Matrix x = to_dense_batch(pool, vocab, binarize);
  const std::vector<int> pred = predict(params, x, domain, zero_domain);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].label) throw DataError("pool_accuracy: example without a label");
    if (pred[i] == *pool[i].label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pool.size());
}

ModelSpec make_model_spec(const TrainConfig& cfg, const SplitDataset& data) {
  ModelSpec spec;
  spec.vocab = data.vocab;
  spec.n_domains = data.n_domains();
  spec.shared_dim = cfg.shared_dim;
  spec.domain_dim = cfg.domain_dim;
  spec.extractor_hidden = cfg.extractor_hidden;
  spec.c1_hidden = cfg.c1_hidden;
  spec.c2_hidden = cfg.c2_hidden;
  spec.d_hidden = cfg.d_hidden;
  spec.with_c2 = cfg.ablation != Ablation::kNoSecondClassifier;
  spec.with_discriminator = cfg.ablation != Ablation::kNoDiscriminator;
  bool all = true;
  std::vector<std::uint8_t> present;
  for (const DomainSplit& d : data.domains) {
    present.push_back(d.train.empty() ? 0 : 1);
    all = all && !d.train.empty();
  }
  if (!all) spec.extractor_present = std::move(present);
  return spec;
}

namespace {

double checked(const char* step, const char* term, ad::Value v) {
  const double x = v.scalar();
  if (!std::isfinite(x)) {
    throw NumericalError(std::string(step) + ": " + term + " is not finite (" +
                         std::to_string(x) + ")");
  }
  return x;
}

}  // namespace

Trainer::Trainer(const SplitDataset& data, TrainConfig cfg)
    : Trainer(data, cfg, make_model_spec(cfg, data)) {}

Trainer::Trainer(const SplitDataset& data, TrainConfig cfg, ModelSpec spec)
    : data_(&data),
      cfg_(std::move(cfg)),
      params_(ModelParams::init(spec, cfg_.seed)),
      sampler_(data, cfg_.batch, cfg_.binarize, cfg_.seed) {
  cfg_.validate();
  if (spec.n_domains != data.n_domains()) {
    throw ConfigError("Trainer: model has " + std::to_string(spec.n_domains) +
                      " domains, data has " + std::to_string(data.n_domains()));
  }
  if (spec.vocab != data.vocab) {
    throw ConfigError("Trainer: model vocab " + std::to_string(spec.vocab) +
                      " != data vocab " + std::to_string(data.vocab));
  }
  bool any_labeled = false;
  for (const DomainSplit& d : data.domains) {
    if (d.train.empty() && d.unlabeled.empty()) {
      throw ConfigError("Trainer: domain '" + d.name + "' has no data at all");
    }
    any_labeled = any_labeled || !d.train.empty();
    for (const SparseExample& ex : d.train) {
      if (!ex.label) {
        throw ConfigError("Trainer: unlabeled example in the train pool of '" + d.name + "'");
      }
    }
  }
  if (!any_labeled) throw ConfigError("Trainer: no domain has labeled training data");
}

void Trainer::update_group(AdamOpt& opt, const std::string& name, Mlp& net,
                           const BoundMlp& bound, double sign) {
  std::vector<Matrix*> params;
  std::vector<const Matrix*> grads;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    params.push_back(&net.weights[i]);
    grads.push_back(&bound.w[i].grad());
    params.push_back(&net.biases[i]);
    grads.push_back(&bound.b[i].grad());
  }
  opt.update(name, params, grads, cfg_.lr, sign);
}

LossBundle Trainer::l_step(const Batches& b) {
  LossBundle out;
  ad::Tape tape;
  BoundModel m = bind(tape, params_, {.extractors = true, .classifiers = true});

  std::vector<ad::Value> lc1_terms, lc2_terms, sep_terms;
  std::vector<std::size_t> touched;
  for (std::size_t dom = 0; dom < b.domains.size(); ++dom) {
    const DomainBatch& db = b.domains[dom];
    if (db.xl.rows() == 0) continue;
    touched.push_back(dom);
    ad::Value x = tape.leaf_ref(&db.xl);
    ad::Value s = m.extract_shared(x);
    ad::Value d = m.extract_domain(x, dom);
    ad::Value feats = ad::concat_cols(s, d);
    lc1_terms.push_back(classification_loss(tape, m.classify1(feats), db.yl));
    if (m.c2) lc2_terms.push_back(classification_loss(tape, m.classify2(feats), db.yl));
    if (params_.domain[dom]) sep_terms.push_back(separation_loss(s, d));
  }
  if (lc1_terms.empty()) return out;

  auto sum = [](std::vector<ad::Value>& terms) {
    ad::Value acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
    return acc;
  };
  ad::Value lc1 = sum(lc1_terms);
  ad::Value total = lc1;
  out.lc1 = checked("l_step", "lc1", lc1);
  if (!lc2_terms.empty()) {
    ad::Value lc2 = sum(lc2_terms);
    out.lc2 = checked("l_step", "lc2", lc2);
    total = ad::add(total, lc2);
  }
  if (!sep_terms.empty()) {
    ad::Value lsep = sum(sep_terms);
    out.lsep = checked("l_step", "lsep", lsep);
    total = ad::add(total, ad::scale(lsep, cfg_.alpha));
  }
  tape.backward(total);

  update_group(opt_l_, "shared", params_.shared, m.shared, 1.0);
  for (std::size_t dom : touched) {
    if (params_.domain[dom]) {
      update_group(opt_l_, "domain_" + std::to_string(dom), *params_.domain[dom],
                   *m.domain[dom], 1.0);
    }
  }
  update_group(opt_l_, "c1", params_.c1, m.c1, 1.0);
  if (params_.c2) update_group(opt_l_, "c2", *params_.c2, *m.c2, 1.0);
  return out;
}

LossBundle Trainer::a_step(const Batches& b) {
  LossBundle out;

  bool any_unlabeled = false;
  for (const DomainBatch& db : b.domains) any_unlabeled = any_unlabeled || db.xu.rows() > 0;

  // Ascend the classifiers on -(L_c1 + L_c2) + L_adv_u. Skipped entirely
  // under the no-C2 ablation, where the discrepancy game does not exist.
  if (params_.c2 && any_unlabeled) {
    ad::Tape tape;
    BoundModel m = bind(tape, params_, {.classifiers = true});
    std::vector<ad::Value> lc_terms, disc_terms;
    for (std::size_t dom = 0; dom < b.domains.size(); ++dom) {
      const DomainBatch& db = b.domains[dom];
      if (db.xl.rows() > 0) {
        ad::Value x = tape.leaf_ref(&db.xl);
        ad::Value feats = ad::concat_cols(m.extract_shared(x), m.extract_domain(x, dom));
        lc_terms.push_back(classification_loss(tape, m.classify1(feats), db.yl));
        lc_terms.push_back(classification_loss(tape, m.classify2(feats), db.yl));
      }
      if (db.xu.rows() > 0) {
        ad::Value x = tape.leaf_ref(&db.xu);
        ad::Value feats = ad::concat_cols(m.extract_shared(x), m.extract_domain(x, dom));
        disc_terms.push_back(discrepancy_loss(m.classify1(feats), m.classify2(feats)));
      }
    }
    ad::Value ladv_u = disc_terms[0];
    for (std::size_t i = 1; i < disc_terms.size(); ++i) ladv_u = ad::add(ladv_u, disc_terms[i]);
    out.ladv_u = checked("a_step", "ladv_u", ladv_u);
    ad::Value objective = ladv_u;
    if (!lc_terms.empty()) {
      ad::Value lc = lc_terms[0];
      for (std::size_t i = 1; i < lc_terms.size(); ++i) lc = ad::add(lc, lc_terms[i]);
      checked("a_step", "lc", lc);
      objective = ad::add(objective, ad::scale(lc, -1.0));
    }
    tape.backward(objective);
    update_group(opt_a_, "c1", params_.c1, m.c1, -1.0);
    update_group(opt_a_, "c2", *params_.c2, *m.c2, -1.0);
  }

  // Ascend the discriminator on L_adv_d over labeled + unlabeled rows.
  if (params_.disc) {
    ad::Tape tape;
    BoundModel m = bind(tape, params_, {.discriminator = true});
    std::vector<ad::Value> terms;
    std::vector<Matrix> stacked(b.domains.size());
    for (std::size_t dom = 0; dom < b.domains.size(); ++dom) {
      const DomainBatch& db = b.domains[dom];
      stacked[dom] = vstack(db.xl, db.xu);
      if (stacked[dom].rows() == 0) continue;
      ad::Value x = tape.leaf_ref(&stacked[dom]);
      ad::Value probs = m.discriminate(m.extract_shared(x));
      terms.push_back(domain_adv_loss(tape, probs, dom));
    }
    if (!terms.empty()) {
      ad::Value ladv_d = terms[0];
      for (std::size_t i = 1; i < terms.size(); ++i) ladv_d = ad::add(ladv_d, terms[i]);
      out.ladv_d = checked("a_step", "ladv_d", ladv_d);
      tape.backward(ladv_d);
      update_group(opt_a_, "disc", *params_.disc, *m.disc, -1.0);
    }
  }
  return out;
}

LossBundle Trainer::r_step(const Batches& b) {
  LossBundle out;
  bool any_unlabeled = false;
  for (const DomainBatch& db : b.domains) any_unlabeled = any_unlabeled || db.xu.rows() > 0;
  const bool want_disc = params_.disc != std::nullopt;
  const bool want_discrepancy = params_.c2 && any_unlabeled;
  if (!want_disc && !want_discrepancy) return out;

  ad::Tape tape;
  BoundModel m = bind(tape, params_, {.extractors = true});
  std::optional<ad::Value> objective;
  std::vector<std::size_t> touched_domains;

  if (want_discrepancy) {
    std::vector<ad::Value> terms;
    for (std::size_t dom = 0; dom < b.domains.size(); ++dom) {
      const DomainBatch& db = b.domains[dom];
      if (db.xu.rows() == 0) continue;
      if (params_.domain[dom]) touched_domains.push_back(dom);
      ad::Value x = tape.leaf_ref(&db.xu);
      ad::Value feats = ad::concat_cols(m.extract_shared(x), m.extract_domain(x, dom));
      terms.push_back(discrepancy_loss(m.classify1(feats), m.classify2(feats)));
    }
    ad::Value ladv_u = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) ladv_u = ad::add(ladv_u, terms[i]);
    out.ladv_u = checked("r_step", "ladv_u", ladv_u);
    objective = ladv_u;
  }
  std::vector<Matrix> stacked(b.domains.size());
  if (want_disc) {
    std::vector<ad::Value> terms;
    for (std::size_t dom = 0; dom < b.domains.size(); ++dom) {
      const DomainBatch& db = b.domains[dom];
      stacked[dom] = vstack(db.xl, db.xu);
      if (stacked[dom].rows() == 0) continue;
      ad::Value x = tape.leaf_ref(&stacked[dom]);
      ad::Value probs = m.discriminate(m.extract_shared(x));
      terms.push_back(domain_adv_loss(tape, probs, dom));
    }
    if (!terms.empty()) {
      ad::Value ladv_d = terms[0];
      for (std::size_t i = 1; i < terms.size(); ++i) ladv_d = ad::add(ladv_d, terms[i]);
      out.ladv_d = checked("r_step", "ladv_d", ladv_d);
      ad::Value weighted = ad::scale(ladv_d, cfg_.gamma);
      objective = objective ? ad::add(*objective, weighted) : weighted;
    }
  }
  if (!objective) return out;
  tape.backward(*objective);

  update_group(opt_r_, "shared", params_.shared, m.shared, 1.0);
  for (std::size_t dom : touched_domains) {
    update_group(opt_r_, "domain_" + std::to_string(dom), *params_.domain[dom], *m.domain[dom],
                 1.0);
  }
  return out;
}

double Trainer::mean_valid_accuracy() const {
  double acc = 0.0;
  std::size_t counted = 0;
  for (std::size_t dom = 0; dom < data_->n_domains(); ++dom) {
    const DomainSplit& d = data_->domains[dom];
    if (d.valid.empty()) continue;
    acc += pool_accuracy(params_, d.valid, dom, !params_.spec.has_extractor(dom), data_->vocab,
                         cfg_.binarize);
    ++counted;
  }
  return counted == 0 ? -1.0 : acc / static_cast<double>(counted);
}

TrainResult Trainer::run(const ReportSink& sink) {
  TrainResult result{params_, params_, -1.0, 0};
  const std::size_t steps = sampler_.steps_per_epoch();
  for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
    for (std::size_t step = 1; step <= steps; ++step) {
      const auto t0 = std::chrono::steady_clock::now();
      const Batches b = sample();
      StepReport report;
      report.epoch = epoch;
      report.step = step;
      const LossBundle l = l_step(b);
      const LossBundle a = a_step(b);
      r_step(b);
      report.losses.lc1 = l.lc1;
      report.losses.lc2 = l.lc2;
      report.losses.lsep = l.lsep;
      report.losses.ladv_d = a.ladv_d;
      report.losses.ladv_u = a.ladv_u;
      report.wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
              .count();
      if (sink) sink(report);
    }
    const double acc = mean_valid_accuracy();
    if (acc > result.best_valid_acc) {
      result.best_valid_acc = acc;
      result.best_epoch = epoch;
      result.best = params_;
    }
  }
  result.params = params_;
  if (result.best_valid_acc < 0.0) result.best = params_;
  return result;
}

}  // namespace dacl
