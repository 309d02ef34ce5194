#include "dacl/model.hpp"

#include <stdexcept>

#include "dacl/errors.hpp"
#include "dacl/rng.hpp"

namespace dacl {

namespace {

// Sub-seed stream ids. Fixed forever: changing them silently reshuffles
// every initialization.
constexpr std::uint64_t kStreamShared = 1;
constexpr std::uint64_t kStreamC1 = 2;
constexpr std::uint64_t kStreamC2 = 3;
constexpr std::uint64_t kStreamDisc = 4;
constexpr std::uint64_t kStreamDomainBase = 100;

}  // namespace

void ModelSpec::validate() const {
  if (vocab == 0) throw ConfigError("ModelSpec: vocab must be positive");
  if (n_domains == 0) throw ConfigError("ModelSpec: need at least one domain");
  if (n_classes < 2) throw ConfigError("ModelSpec: need at least two classes");
  if (shared_dim == 0 || domain_dim == 0) {
    throw ConfigError("ModelSpec: feature dims must be positive");
  }
  if (!extractor_present.empty() && extractor_present.size() != n_domains) {
    throw ConfigError("ModelSpec: extractor_present must have one entry per domain");
  }
  shared_spec().validate();
  domain_spec().validate();
  classifier_spec(c1_hidden).validate();
  if (with_c2) classifier_spec(c2_hidden).validate();
  if (with_discriminator) discriminator_spec().validate();
}

bool ModelSpec::has_extractor(std::size_t domain) const {
  if (extractor_present.empty()) return true;
  return extractor_present.at(domain) != 0;
}

MlpSpec ModelSpec::shared_spec() const {
  return {vocab, extractor_hidden, shared_dim, OutputActivation::kNone};
}

MlpSpec ModelSpec::domain_spec() const {
  return {vocab, extractor_hidden, domain_dim, OutputActivation::kNone};
}

MlpSpec ModelSpec::classifier_spec(std::size_t hidden) const {
  return {feature_dim(), {hidden}, n_classes, OutputActivation::kSoftmax};
}

MlpSpec ModelSpec::discriminator_spec() const {
  return {shared_dim, {d_hidden}, n_domains, OutputActivation::kSoftmax};
}

ModelParams ModelParams::init(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelParams p;
  p.spec = spec;
  {
    Rng rng(mix_seed(seed, kStreamShared));
    p.shared = Mlp::init(spec.shared_spec(), rng);
  }
  for (std::size_t m = 0; m < spec.n_domains; ++m) {
    if (!spec.has_extractor(m)) {
      p.domain.emplace_back(std::nullopt);
      continue;
    }
    Rng rng(mix_seed(seed, kStreamDomainBase + m));
    p.domain.emplace_back(Mlp::init(spec.domain_spec(), rng));
  }
  {
    Rng rng(mix_seed(seed, kStreamC1));
    p.c1 = Mlp::init(spec.classifier_spec(spec.c1_hidden), rng);
  }
  if (spec.with_c2) {
    Rng rng(mix_seed(seed, kStreamC2));
    p.c2 = Mlp::init(spec.classifier_spec(spec.c2_hidden), rng);
  }
  if (spec.with_discriminator) {
    Rng rng(mix_seed(seed, kStreamDisc));
    p.disc = Mlp::init(spec.discriminator_spec(), rng);
  }
  return p;
}

std::size_t ModelParams::param_count() const {
  std::size_t n = shared.param_count();
  for (const auto& d : domain) {
    if (d) n += d->param_count();
  }
  n += c1.param_count();
  if (c2) n += c2->param_count();
  if (disc) n += disc->param_count();
  return n;
}

namespace {

template <typename Net, typename Visitor>
void visit_mlp(const std::string& name, Net& net, const Visitor& visit) {
  std::vector<decltype(&net.weights[0])> mats;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    mats.push_back(&net.weights[i]);
    mats.push_back(&net.biases[i]);
  }
  visit(name, mats);
}

template <typename Params, typename Visitor>
void walk_groups(Params& params, const Visitor& visit) {
  visit_mlp("shared", params.shared, visit);
  for (std::size_t m = 0; m < params.domain.size(); ++m) {
    if (params.domain[m]) visit_mlp("domain_" + std::to_string(m), *params.domain[m], visit);
  }
  visit_mlp("c1", params.c1, visit);
  if (params.c2) visit_mlp("c2", *params.c2, visit);
  if (params.disc) visit_mlp("disc", *params.disc, visit);
}

}  // namespace

void for_each_group(ModelParams& params, const GroupVisitor& visit) {
  walk_groups(params, visit);
}

void for_each_group(const ModelParams& params, const ConstGroupVisitor& visit) {
  walk_groups(params, visit);
}

BoundModel bind(ad::Tape& tape, const ModelParams& params, GroupMask mask) {
  BoundModel m;
  m.params = &params;
  m.tape = &tape;
  m.shared = bind(tape, params.shared, mask.extractors);
  for (const auto& d : params.domain) {
    if (d) {
      m.domain.emplace_back(bind(tape, *d, mask.extractors));
    } else {
      m.domain.emplace_back(std::nullopt);
    }
  }
  m.c1 = bind(tape, params.c1, mask.classifiers);
  if (params.c2) m.c2 = bind(tape, *params.c2, mask.classifiers);
  if (params.disc) m.disc = bind(tape, *params.disc, mask.discriminator);
  return m;
}

ad::Value BoundModel::extract_shared(ad::Value x) const {
  return ad::relu(shared.forward(x));
}

ad::Value BoundModel::extract_domain(ad::Value x, std::size_t domain_index) const {
  if (domain_index >= domain.size()) {
    throw std::invalid_argument("extract_domain: domain " + std::to_string(domain_index) +
                                " outside [0, " + std::to_string(domain.size()) + ")");
  }
  if (!domain[domain_index]) return zero_domain_feats(x.rows());
  return ad::relu(domain[domain_index]->forward(x));
}

ad::Value BoundModel::zero_domain_feats(std::size_t batch) const {
  return tape->leaf(Matrix(batch, params->spec.domain_dim));
}

ad::Value BoundModel::classify1(ad::Value feats) const { return c1.forward(feats); }

ad::Value BoundModel::classify2(ad::Value feats) const {
  if (!c2) throw std::logic_error("classify2: model has no C2");
  return c2->forward(feats);
}

ad::Value BoundModel::discriminate(ad::Value shared_feats) const {
  if (!disc) throw std::logic_error("discriminate: model has no discriminator");
  return disc->forward(shared_feats);
}

Matrix predict_proba(const ModelParams& params, const Matrix& x, std::size_t domain_index,
                     bool zero_domain) {
  ad::Tape tape;
  BoundModel m = bind(tape, params, GroupMask::none());
  ad::Value xin = tape.leaf_ref(&x);
  ad::Value s = m.extract_shared(xin);
  ad::Value d = zero_domain ? m.zero_domain_feats(x.rows()) : m.extract_domain(xin, domain_index);
  ad::Value feats = ad::concat_cols(s, d);
  ad::Value p = m.classify1(feats);
  if (m.c2) p = ad::scale(ad::add(p, m.classify2(feats)), 0.5);
  return p.payload();
}

std::vector<int> predict(const ModelParams& params, const Matrix& x, std::size_t domain_index,
                         bool zero_domain) {
  const Matrix proba = predict_proba(params, x, domain_index, zero_domain);
  std::vector<int> labels(proba.rows());
  for (std::size_t r = 0; r < proba.rows(); ++r) {
    const double* row = proba.row_ptr(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < proba.cols(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    labels[r] = static_cast<int>(best);
  }
  return labels;
}

}  // namespace dacl
