#include "dacl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "dacl/errors.hpp"
#include "dacl/rng.hpp"

namespace fs = std::filesystem;

namespace dacl {

std::optional<std::size_t> MultiDomainDataset::domain_index(const std::string& name) const {
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (domains[i].name == name) return i;
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void parse_fail(const std::string& file, std::size_t line, const std::string& what) {
  throw DataError(file + ":" + std::to_string(line) + ": " + what);
}

// Parses `idx:val idx:val ...` (possibly empty) into ex.
void parse_pairs(const std::string& file, std::size_t lineno, const std::string& text,
                 std::size_t vocab, SparseExample& ex) {
  std::istringstream ss(text);
  std::string pair;
  while (ss >> pair) {
    const std::size_t colon = pair.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == pair.size()) {
      parse_fail(file, lineno, "expected idx:val, got '" + pair + "'");
    }
    std::uint32_t idx = 0;
    const char* ib = pair.data();
    const auto [ip, iec] = std::from_chars(ib, ib + colon, idx);
    if (iec != std::errc() || ip != ib + colon) {
      parse_fail(file, lineno, "bad feature index in '" + pair + "'");
    }
    if (idx >= vocab) {
      parse_fail(file, lineno, "feature index " + std::to_string(idx) + " >= vocab " +
                                   std::to_string(vocab));
    }
    double val = 0.0;
    try {
      std::size_t used = 0;
      val = std::stod(pair.substr(colon + 1), &used);
      if (used != pair.size() - colon - 1) throw std::invalid_argument(pair);
    } catch (const std::exception&) {
      parse_fail(file, lineno, "bad feature value in '" + pair + "'");
    }
    if (!std::isfinite(val)) parse_fail(file, lineno, "non-finite value in '" + pair + "'");
    if (!ex.indices.empty() && idx <= ex.indices.back()) {
      parse_fail(file, lineno, "indices not strictly increasing at " + std::to_string(idx));
    }
    ex.indices.push_back(idx);
    ex.values.push_back(val);
  }
}

std::vector<SparseExample> load_pool(const std::string& path, std::size_t vocab, bool labeled,
                                     std::uint32_t domain) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open data file '" + path + "'");
  std::vector<SparseExample> pool;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    SparseExample ex;
    ex.domain = domain;
    if (labeled) {
      const std::size_t tab = line.find('\t');
      const std::string head = line.substr(0, tab);
      if (head == "0") {
        ex.label = 0;
      } else if (head == "1") {
        ex.label = 1;
      } else {
        parse_fail(path, lineno, "expected label 0 or 1, got '" + head + "'");
      }
      parse_pairs(path, lineno, tab == std::string::npos ? "" : line.substr(tab + 1), vocab, ex);
    } else {
      parse_pairs(path, lineno, line, vocab, ex);
    }
    pool.push_back(std::move(ex));
  }
  return pool;
}

}  // namespace

MultiDomainDataset load_corpus(const std::string& manifest_path, std::size_t vocab) {
  if (vocab == 0) throw DataError("load_corpus: vocab must be positive");
  std::ifstream f(manifest_path);
  if (!f) throw DataError("cannot open manifest '" + manifest_path + "'");
  const fs::path base = fs::path(manifest_path).parent_path();

  MultiDomainDataset ds;
  ds.vocab = vocab;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      parse_fail(manifest_path, lineno, "expected `name TAB labeled TAB unlabeled`");
    }
    DomainData d;
    d.name = line.substr(0, t1);
    if (d.name.empty()) parse_fail(manifest_path, lineno, "empty domain name");
    if (!seen.insert(d.name).second) {
      parse_fail(manifest_path, lineno, "duplicate domain '" + d.name + "'");
    }
    const std::string lp = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string up = line.substr(t2 + 1);
    const auto domain = static_cast<std::uint32_t>(ds.domains.size());
    d.labeled = load_pool((base / lp).string(), vocab, true, domain);
    d.unlabeled = load_pool((base / up).string(), vocab, false, domain);
    ds.domains.push_back(std::move(d));
  }
  if (ds.domains.empty()) throw DataError("manifest '" + manifest_path + "' lists no domains");
  return ds;
}

void write_pool(const std::string& path, std::span<const SparseExample> pool, bool labeled) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  std::ostringstream out;
  out.precision(17);
  for (const SparseExample& ex : pool) {
    if (labeled) {
      if (!ex.label) throw DataError("write_pool: unlabeled example in labeled pool");
      out << *ex.label;
      if (!ex.indices.empty()) out << '\t';
    }
    for (std::size_t i = 0; i < ex.indices.size(); ++i) {
      if (i) out << ' ';
      out << ex.indices[i] << ':' << ex.values[i];
    }
    out << '\n';
  }
  f << out.str();
  if (!f) throw DataError("write to '" + path + "' failed");
}

void write_dataset(const MultiDomainDataset& ds, const std::string& dir,
                   const std::string& meta_text) {
  fs::create_directories(dir);
  const fs::path base(dir);
  std::ofstream mf(base / "manifest");
  if (!mf) throw DataError("cannot open '" + (base / "manifest").string() + "' for writing");
  for (const DomainData& d : ds.domains) {
    const std::string lp = d.name + ".labeled";
    const std::string up = d.name + ".unlabeled";
    write_pool((base / lp).string(), d.labeled, true);
    write_pool((base / up).string(), d.unlabeled, false);
    mf << d.name << '\t' << lp << '\t' << up << '\n';
  }
  if (!mf) throw DataError("write to manifest in '" + dir + "' failed");
  if (!meta_text.empty()) {
    std::ofstream meta(base / "meta");
    meta << meta_text;
    if (!meta) throw DataError("write to meta in '" + dir + "' failed");
  }
}

namespace {

constexpr std::uint64_t kSplitStream = 11;

std::vector<std::uint32_t> shuffled_ids(std::size_t n, std::uint64_t seed) {
  std::vector<std::uint32_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0u);
  Rng rng(mix_seed(seed, kSplitStream));
  rng.shuffle(ids);
  return ids;
}

}  // namespace

PoolSplit five_fold_split(std::size_t pool_size, unsigned fold, std::uint64_t seed) {
  if (pool_size < 5) {
    throw ConfigError("five_fold_split: pool of " + std::to_string(pool_size) +
                      " cannot fill five partitions");
  }
  if (fold >= 5) throw ConfigError("five_fold_split: fold must be in 0..4");
  const std::vector<std::uint32_t> ids = shuffled_ids(pool_size, seed);
  auto part_begin = [&](unsigned p) { return p * pool_size / 5; };
  PoolSplit split;
  for (unsigned p = 0; p < 5; ++p) {
    auto* dest = &split.train;
    if (p == fold) dest = &split.test;
    if (p == (fold + 1) % 5) dest = &split.valid;
    for (std::size_t i = part_begin(p); i < part_begin(p + 1); ++i) dest->push_back(ids[i]);
  }
  return split;
}

PoolSplit ratio_split(std::size_t pool_size, std::uint64_t seed) {
  if (pool_size < 10) {
    throw ConfigError("ratio_split: pool of " + std::to_string(pool_size) +
                      " is too small for a 70/10/20 split");
  }
  const std::vector<std::uint32_t> ids = shuffled_ids(pool_size, seed);
  const std::size_t n_valid = pool_size / 10;
  const std::size_t n_test = pool_size / 5;
  const std::size_t n_train = pool_size - n_valid - n_test;
  PoolSplit split;
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.valid.assign(ids.begin() + n_train, ids.begin() + n_train + n_valid);
  split.test.assign(ids.begin() + n_train + n_valid, ids.end());
  return split;
}

std::vector<SparseExample> take(const std::vector<SparseExample>& pool,
                                const std::vector<std::size_t>& idx) {
  std::vector<SparseExample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(pool.at(i));
  return out;
}

std::vector<SparseExample> strip_labels(std::vector<SparseExample> pool) {
  for (SparseExample& ex : pool) ex.label.reset();
  return pool;
}

void SynthSpec::validate() const {
  if (n_domains == 0) throw ConfigError("SynthSpec: need at least one domain");
  if (shared_words == 0) throw ConfigError("SynthSpec: need at least one shared word");
  if (labeled_per_domain == 0) throw ConfigError("SynthSpec: need labeled examples");
  if (background_start() >= vocab) {
    throw ConfigError("SynthSpec: vocab " + std::to_string(vocab) +
                      " too small for signal blocks (need > " +
                      std::to_string(background_start()) + ")");
  }
  for (double p : {noise, shared_hi, shared_lo, flip_hi, flip_lo, marker_rate}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("SynthSpec: rates must lie in [0,1]");
  }
}

std::string SynthSpec::serialize() const {
  std::ostringstream s;
  s.precision(17);
  s << "domains=" << n_domains << "\n"
    << "vocab=" << vocab << "\n"
    << "shared_words=" << shared_words << "\n"
    << "flipped_words=" << flipped_words << "\n"
    << "labeled_per_domain=" << labeled_per_domain << "\n"
    << "unlabeled_per_domain=" << unlabeled_per_domain << "\n"
    << "noise=" << noise << "\n"
    << "seed=" << seed << "\n"
    << "shared_hi=" << shared_hi << "\n"
    << "shared_lo=" << shared_lo << "\n"
    << "flip_hi=" << flip_hi << "\n"
    << "flip_lo=" << flip_lo << "\n"
    << "marker_rate=" << marker_rate << "\n"
    << "background_tokens=" << background_tokens << "\n";
  return s.str();
}

double SynthSpec::expected_nnz() const {
  const double sig = 0.5 * (shared_hi + shared_lo) * static_cast<double>(shared_words) +
                     0.5 * (flip_hi + flip_lo) *
                         static_cast<double>(n_domains * flipped_words) +
                     marker_rate;
  // background tokens collide; expected distinct draws out of R slots
  const double r = static_cast<double>(vocab - background_start());
  const double bg =
      r * (1.0 - std::pow(1.0 - 1.0 / r, static_cast<double>(background_tokens)));
  return sig + bg;
}

namespace {

constexpr std::uint64_t kSynthStreamBase = 1000;

SparseExample generate_example(const SynthSpec& spec, std::size_t domain, Rng& rng,
                               bool labeled) {
  const bool pos = rng.bernoulli(0.5);
  std::map<std::uint32_t, double> feats;
  std::uint32_t w = 0;
  for (std::size_t i = 0; i < spec.shared_words; ++i, ++w) {
    if (rng.bernoulli(pos ? spec.shared_hi : spec.shared_lo)) feats[w] += 1.0;
  }
  for (std::size_t block = 0; block < spec.n_domains; ++block) {
    // home block: correlates positively with the label; away: negatively
    const bool home = block == domain;
    const double rate = (home == pos) ? spec.flip_hi : spec.flip_lo;
    for (std::size_t i = 0; i < spec.flipped_words; ++i, ++w) {
      if (rng.bernoulli(rate)) feats[w] += 1.0;
    }
  }
  for (std::size_t m = 0; m < spec.n_domains; ++m, ++w) {
    // only the domain's own marker can appear; one draw per marker regardless
    const bool hit = rng.bernoulli(spec.marker_rate);
    if (hit && m == domain) feats[w] += 1.0;
  }
  const auto bg_range = static_cast<std::uint64_t>(spec.vocab - spec.background_start());
  for (std::size_t i = 0; i < spec.background_tokens; ++i) {
    const auto idx = static_cast<std::uint32_t>(spec.background_start() + rng.below(bg_range));
    feats[idx] += 1.0;
  }
  const bool flip = rng.bernoulli(spec.noise);

  SparseExample ex;
  ex.domain = static_cast<std::uint32_t>(domain);
  for (const auto& [idx, val] : feats) {
    ex.indices.push_back(idx);
    ex.values.push_back(val);
  }
  if (labeled) ex.label = static_cast<int>(pos != flip);
  return ex;
}

}  // namespace

MultiDomainDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  MultiDomainDataset ds;
  ds.vocab = spec.vocab;
  for (std::size_t m = 0; m < spec.n_domains; ++m) {
    DomainData d;
    d.name = "d" + std::to_string(m);
    {
      Rng rng(mix_seed(spec.seed, kSynthStreamBase + 2 * m));
      for (std::size_t i = 0; i < spec.labeled_per_domain; ++i) {
        d.labeled.push_back(generate_example(spec, m, rng, true));
      }
    }
    {
      Rng rng(mix_seed(spec.seed, kSynthStreamBase + 2 * m + 1));
      for (std::size_t i = 0; i < spec.unlabeled_per_domain; ++i) {
        d.unlabeled.push_back(generate_example(spec, m, rng, false));
      }
    }
    ds.domains.push_back(std::move(d));
  }
  return ds;
}

Matrix to_dense_batch(std::span<const SparseExample> examples, std::size_t vocab,
                      bool binarize) {
  Matrix out(examples.size(), vocab);
  for (std::size_t r = 0; r < examples.size(); ++r) {
    const SparseExample& ex = examples[r];
    double* row = out.row_ptr(r);
    for (std::size_t i = 0; i < ex.indices.size(); ++i) {
      row[ex.indices[i]] = binarize ? 1.0 : ex.values[i];
    }
  }
  return out;
}

std::vector<int> labels_of(std::span<const SparseExample> examples) {
  std::vector<int> y;
  y.reserve(examples.size());
  for (const SparseExample& ex : examples) {
    if (!ex.label) throw DataError("labels_of: example without a label");
    y.push_back(*ex.label);
  }
  return y;
}

}  // namespace dacl
