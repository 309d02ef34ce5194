#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "dacl/adam.hpp"
#include "dacl/errors.hpp"
#include "dacl/eval.hpp"
#include "dacl/losses.hpp"
#include "dacl/snapshot.hpp"
#include "dacl/trainer.hpp"

using namespace dacl;

namespace {

// A small two-domain view with full-pool batches (train pools of 8, batch 8).
SplitDataset toy_view(std::uint64_t seed = 7) {
  SynthSpec spec;
  spec.n_domains = 2;
  spec.vocab = 48;
  spec.shared_words = 4;
  spec.flipped_words = 8;
  spec.labeled_per_domain = 16;
  spec.unlabeled_per_domain = 8;
  spec.shared_hi = 0.8;
  spec.shared_lo = 0.2;
  spec.seed = seed;
  const MultiDomainDataset raw = generate_synthetic(spec);
  SplitDataset view;
  view.vocab = raw.vocab;
  for (const DomainData& d : raw.domains) {
    DomainSplit s;
    s.name = d.name;
    s.train.assign(d.labeled.begin(), d.labeled.begin() + 8);
    s.valid.assign(d.labeled.begin() + 8, d.labeled.begin() + 12);
    s.test.assign(d.labeled.begin() + 12, d.labeled.end());
    s.unlabeled = d.unlabeled;
    view.domains.push_back(std::move(s));
  }
  return view;
}

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch = 8;
  cfg.epochs = 3;
  cfg.seed = 5;
  cfg.shared_dim = 8;
  cfg.domain_dim = 4;
  cfg.extractor_hidden = {16};
  cfg.c1_hidden = 8;
  cfg.c2_hidden = 4;
  cfg.d_hidden = 8;
  return cfg;
}

bool name_matches(const std::string& name, std::span<const char* const> prefixes) {
  for (const char* p : prefixes) {
    if (name.rfind(p, 0) == 0) return true;
  }
  return false;
}

std::string group_bytes(const ModelParams& params, std::span<const char* const> prefixes) {
  std::string out;
  const ConstGroupVisitor visit = [&](const std::string& name,
                                      const std::vector<const Matrix*>& mats) {
    if (!name_matches(name, prefixes)) return;
    for (const Matrix* m : mats) {
      const auto span = m->data();
      out.append(reinterpret_cast<const char*>(span.data()), span.size() * sizeof(double));
    }
  };
  for_each_group(params, visit);
  return out;
}

double eval_ladv_d(const ModelParams& params, const Batches& b) {
  ad::Tape tape;
  BoundModel m = bind(tape, params, GroupMask::none());
  std::vector<Matrix> stacked(b.domains.size());
  double total = 0.0;
  for (std::size_t dom = 0; dom < b.domains.size(); ++dom) {
    stacked[dom] = vstack(b.domains[dom].xl, b.domains[dom].xu);
    if (stacked[dom].rows() == 0) continue;
    ad::Value x = tape.leaf_ref(&stacked[dom]);
    total += domain_adv_loss(tape, m.discriminate(m.extract_shared(x)), dom).payload()(0, 0);
  }
  return total;
}

double eval_ladv_u(const ModelParams& params, const Batches& b) {
  ad::Tape tape;
  BoundModel m = bind(tape, params, GroupMask::none());
  double total = 0.0;
  for (std::size_t dom = 0; dom < b.domains.size(); ++dom) {
    const Matrix& xu = b.domains[dom].xu;
    if (xu.rows() == 0) continue;
    ad::Value x = tape.leaf_ref(&xu);
    ad::Value feats = ad::concat_cols(m.extract_shared(x), m.extract_domain(x, dom));
    total += discrepancy_loss(m.classify1(feats), m.classify2(feats)).payload()(0, 0);
  }
  return total;
}

}  // namespace

TEST_CASE("adam: zero gradient leaves the parameter unchanged") {
  Matrix p(2, 2, 3.0);
  const Matrix g(2, 2, 0.0);
  AdamState state;
  adam_update(p, g, state, AdamConfig{}, 0.1, 1.0);
  CHECK(p == Matrix(2, 2, 3.0));
  CHECK(state.t == 1);
}

TEST_CASE("adam: first step moves by about lr, sign flips direction") {
  const double lr = 0.01;
  Matrix p(1, 1, 1.0);
  Matrix g(1, 1, 2.5);
  AdamState down;
  adam_update(p, g, down, AdamConfig{}, lr, 1.0);
  CHECK(std::abs((1.0 - p(0, 0)) - lr) < 1e-6 * lr);

  Matrix q(1, 1, 1.0);
  AdamState up;
  adam_update(q, g, up, AdamConfig{}, lr, -1.0);
  CHECK(std::abs((q(0, 0) - 1.0) - lr) < 1e-6 * lr);
}

TEST_CASE("sampler: per-domain batches of the requested size, wrap-around included") {
  SplitDataset view = toy_view();
  DomainSplit third;
  third.name = "tiny";
  third.train.assign(view.domains[0].train.begin(), view.domains[0].train.begin() + 3);
  third.unlabeled = view.domains[0].unlabeled;
  view.domains.push_back(third);

  BatchSampler sampler(view, 8, false, 1);
  const Batches b = sampler.sample();
  REQUIRE(b.domains.size() == 3);
  for (const DomainBatch& db : b.domains) {
    CHECK(db.xl.rows() == 8);  // the 3-example pool wraps around
    CHECK(db.xu.rows() == 8);
    CHECK(db.xl.cols() == view.vocab);
    CHECK(db.yl.size() == 8);
  }
}

TEST_CASE("index stream covers the pool exactly once per epoch") {
  IndexStream stream(12, 3);
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::vector<std::size_t> seen;
    for (int i = 0; i < 12; ++i) seen.push_back(stream.next());
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < 12; ++i) CHECK(seen[i] == i);
  }
}

TEST_CASE("same seed gives an identical batch sequence") {
  const SplitDataset view = toy_view();
  BatchSampler a(view, 4, false, 9);
  BatchSampler b(view, 4, false, 9);
  for (int i = 0; i < 10; ++i) {
    const Batches ba = a.sample();
    const Batches bb = b.sample();
    for (std::size_t m = 0; m < ba.domains.size(); ++m) {
      CHECK(ba.domains[m].xl == bb.domains[m].xl);
      CHECK(ba.domains[m].xu == bb.domains[m].xu);
      CHECK(ba.domains[m].yl == bb.domains[m].yl);
    }
  }
}

TEST_CASE("step/group exclusivity over 50 steps, exact equality") {
  const SplitDataset view = toy_view();
  TrainConfig cfg = toy_config();
  Trainer t(view, cfg);

  const char* disc_only[] = {"disc"};
  const char* extractors[] = {"shared", "domain_"};
  const char* heads[] = {"c1", "c2", "disc"};
  for (int step = 0; step < 50; ++step) {
    const Batches b = t.sample();

    const std::string disc_before = group_bytes(t.params(), disc_only);
    t.l_step(b);
    CHECK(group_bytes(t.params(), disc_only) == disc_before);

    const std::string ext_before = group_bytes(t.params(), extractors);
    t.a_step(b);
    CHECK(group_bytes(t.params(), extractors) == ext_before);

    const std::string heads_before = group_bytes(t.params(), heads);
    t.r_step(b);
    CHECK(group_bytes(t.params(), heads) == heads_before);
  }
}

TEST_CASE("l_step descends the labeled objective on a fixed full batch") {
  const SplitDataset view = toy_view();
  TrainConfig cfg = toy_config();
  Trainer t(view, cfg);
  const Batches b = t.sample();  // batch == pool, so content is fixed
  const LossBundle first = t.l_step(b);
  LossBundle last = first;
  for (int i = 0; i < 99; ++i) last = t.l_step(b);
  const double before = first.lc1 + first.lc2 + cfg.alpha * first.lsep;
  const double after = last.lc1 + last.lc2 + cfg.alpha * last.lsep;
  CHECK(after < before);
}

TEST_CASE("a_step locally improves the discriminator objective") {
  const SplitDataset view = toy_view();
  Trainer t(view, toy_config());
  const Batches b = t.sample();
  t.l_step(b);  // give features some structure first
  const double before = eval_ladv_d(t.params(), b);
  t.a_step(b);
  const double after = eval_ladv_d(t.params(), b);
  CHECK(after >= before - 1e-12);
}

TEST_CASE("r_step with gamma=0 descends the discrepancy objective") {
  const SplitDataset view = toy_view();
  TrainConfig cfg = toy_config();
  cfg.gamma = 0.0;
  Trainer t(view, cfg);
  const Batches b = t.sample();
  t.l_step(b);
  t.a_step(b);  // sharpen the disagreement first
  const double before = eval_ladv_u(t.params(), b);
  t.r_step(b);
  const double after = eval_ladv_u(t.params(), b);
  CHECK(after <= before + 1e-12);
}

TEST_CASE("alpha=0 degenerates the l_step to twin cross-entropy") {
  const SplitDataset view = toy_view();
  TrainConfig cfg = toy_config();
  cfg.alpha = 0.0;
  Trainer t(view, cfg);
  const Batches b = t.sample();
  const LossBundle r1 = t.l_step(b);
  LossBundle rn = r1;
  for (int i = 0; i < 60; ++i) rn = t.l_step(b);
  CHECK(rn.lc1 + rn.lc2 < r1.lc1 + r1.lc2);
  CHECK(rn.lsep >= 0.0);  // still reported, just unweighted
}

TEST_CASE("deterministic replay: identical loss stream and final parameters") {
  const SplitDataset view = toy_view();
  const TrainConfig cfg = toy_config();

  auto collect = [&](std::vector<LossBundle>& out) {
    Trainer t(view, cfg);
    TrainResult res = t.run([&](const StepReport& r) { out.push_back(r.losses); });
    return snapshot_bytes(res.params);
  };
  std::vector<LossBundle> a, b;
  const auto bytes_a = collect(a);
  const auto bytes_b = collect(b);
  REQUIRE(a.size() == b.size());
  REQUIRE(!a.empty());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].lc1 == b[i].lc1);
    CHECK(a[i].lc2 == b[i].lc2);
    CHECK(a[i].lsep == b[i].lsep);
    CHECK(a[i].ladv_d == b[i].ladv_d);
    CHECK(a[i].ladv_u == b[i].ladv_u);
  }
  CHECK(bytes_a == bytes_b);
}

TEST_CASE("epochs=0 returns the initialized parameters unchanged") {
  const SplitDataset view = toy_view();
  TrainConfig cfg = toy_config();
  cfg.epochs = 0;
  Trainer t(view, cfg);
  const auto init_bytes = snapshot_bytes(t.params());
  const TrainResult res = t.run();
  CHECK(snapshot_bytes(res.params) == init_bytes);
  CHECK(snapshot_bytes(res.best) == init_bytes);
}

TEST_CASE("NaN loss aborts with a diagnostic naming the term") {
  // Poke the head, not a hidden layer: relu(x>0?x:0) silently zeroes a NaN
  // pre-activation, but the softmax/log path propagates it to the loss.
  const SplitDataset view = toy_view();
  Trainer t(view, toy_config());
  t.params().c1.biases.back()(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(t.run(), NumericalError);
  try {
    Trainer t2(view, toy_config());
    t2.params().c1.biases.back()(0, 0) = std::numeric_limits<double>::quiet_NaN();
    t2.run();
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("lc1") != std::string::npos);
  }
}

TEST_CASE("ablation no-d allocates no discriminator and reports ladv_d=0") {
  const SplitDataset view = toy_view();
  TrainConfig cfg = toy_config();
  cfg.ablation = Ablation::kNoDiscriminator;
  cfg.epochs = 1;
  Trainer t(view, cfg);
  CHECK(!t.params().disc.has_value());
  std::vector<StepReport> reports;
  t.run([&](const StepReport& r) { reports.push_back(r); });
  for (const StepReport& r : reports) {
    CHECK(r.losses.ladv_d == 0.0);
    CHECK(r.losses.ladv_u > 0.0);  // discrepancy game still on
  }
}

TEST_CASE("ablation no-c2 allocates no second classifier and skips L_adv_u") {
  const SplitDataset view = toy_view();
  TrainConfig cfg = toy_config();
  cfg.ablation = Ablation::kNoSecondClassifier;
  cfg.epochs = 1;
  Trainer t(view, cfg);
  CHECK(!t.params().c2.has_value());
  std::vector<StepReport> reports;
  t.run([&](const StepReport& r) { reports.push_back(r); });
  for (const StepReport& r : reports) {
    CHECK(r.losses.lc2 == 0.0);
    CHECK(r.losses.ladv_u == 0.0);
    CHECK(r.losses.ladv_d < 0.0);  // the discriminator game is still on
  }
}

TEST_CASE("training lifts validation accuracy well above the initial model") {
  const SplitDataset view = toy_view();
  TrainConfig cfg = toy_config();
  cfg.epochs = 40;

  TrainConfig zero = cfg;
  zero.epochs = 0;
  Trainer t0(view, zero);
  const ModelParams init = t0.run().params;
  double init_acc = 0.0;
  for (std::size_t m = 0; m < view.n_domains(); ++m) {
    init_acc += pool_accuracy(init, view.domains[m].valid, m, false, view.vocab, false);
  }
  init_acc /= static_cast<double>(view.n_domains());

  Trainer t(view, cfg);
  const TrainResult res = t.run();
  CHECK(res.best_valid_acc >= init_acc + 0.20);
}

TEST_CASE("trainer rejects datasets without labeled data or with empty domains") {
  SplitDataset view = toy_view();
  TrainConfig cfg = toy_config();

  SplitDataset no_labels = view;
  for (DomainSplit& d : no_labels.domains) d.train.clear();
  CHECK_THROWS_AS(Trainer(no_labels, cfg), ConfigError);

  SplitDataset hollow = view;
  hollow.domains[1].train.clear();
  hollow.domains[1].unlabeled.clear();
  CHECK_THROWS_AS(Trainer(hollow, cfg), ConfigError);
}

TEST_CASE("step report csv layout") {
  CHECK(step_report_csv_header() == "epoch,step,lc1,lc2,lsep,ladv_d,ladv_u,wall_ms");
  StepReport r;
  r.epoch = 2;
  r.step = 7;
  r.losses = {0.5, 0.25, 1.5, -1.0, 0.125};
  r.wall_ms = 3.25;
  CHECK(to_csv_row(r) == "2,7,0.5,0.25,1.5,-1,0.125,3.250");
}
