#include "dacl/config.hpp"

#include <cctype>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dacl/errors.hpp"

namespace dacl {

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoDiscriminator: return "no-d";
    case Ablation::kNoSecondClassifier: return "no-c2";
  }
  throw ConfigError("unreachable ablation value");
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "none") return Ablation::kNone;
  if (s == "no-d") return Ablation::kNoDiscriminator;
  if (s == "no-c2") return Ablation::kNoSecondClassifier;
  throw ConfigError("unknown ablation '" + s + "' (expected none, no-d or no-c2)");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a real");
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as an integer");
  }
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a boolean");
}

std::vector<std::size_t> parse_dims(const std::string& key, const std::string& v) {
  std::vector<std::size_t> dims;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    dims.push_back(static_cast<std::size_t>(parse_uint(key, part)));
  }
  return dims;
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt_dims(const std::vector<std::size_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(dims[i]);
  }
  return s;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha >= 0.0) || !(gamma >= 0.0)) {
    throw ConfigError("alpha and gamma must be finite and >= 0");
  }
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch == 0) throw ConfigError("batch must be positive");
  if (shared_dim == 0 || domain_dim == 0) throw ConfigError("feature dims must be positive");
  if (c1_hidden == 0 || c2_hidden == 0 || d_hidden == 0) {
    throw ConfigError("classifier/discriminator hidden widths must be positive");
  }
  for (std::size_t h : extractor_hidden) {
    if (h == 0) throw ConfigError("extractor hidden widths must be positive");
  }
}

std::string TrainConfig::serialize() const {
  std::string s;
  s += "alpha=" + fmt_double(alpha) + "\n";
  s += "gamma=" + fmt_double(gamma) + "\n";
  s += "lr=" + fmt_double(lr) + "\n";
  s += "batch=" + std::to_string(batch) + "\n";
  s += "epochs=" + std::to_string(epochs) + "\n";
  s += "seed=" + std::to_string(seed) + "\n";
  s += "ablation=" + to_string(ablation) + "\n";
  s += "shared_dim=" + std::to_string(shared_dim) + "\n";
  s += "domain_dim=" + std::to_string(domain_dim) + "\n";
  s += "extractor_hidden=" + fmt_dims(extractor_hidden) + "\n";
  s += "c1_hidden=" + std::to_string(c1_hidden) + "\n";
  s += "c2_hidden=" + std::to_string(c2_hidden) + "\n";
  s += "d_hidden=" + std::to_string(d_hidden) + "\n";
  s += std::string("binarize=") + (binarize ? "true" : "false") + "\n";
  return s;
}

void TrainConfig::apply(const std::string& key, const std::string& value) {
  if (key == "alpha") {
    alpha = parse_double(key, value);
  } else if (key == "gamma") {
    gamma = parse_double(key, value);
  } else if (key == "lr") {
    lr = parse_double(key, value);
  } else if (key == "batch") {
    batch = static_cast<std::size_t>(parse_uint(key, value));
  } else if (key == "epochs") {
    epochs = static_cast<std::size_t>(parse_uint(key, value));
  } else if (key == "seed") {
    seed = parse_uint(key, value);
  } else if (key == "ablation") {
    ablation = ablation_from_string(value);
  } else if (key == "shared_dim") {
    shared_dim = static_cast<std::size_t>(parse_uint(key, value));
  } else if (key == "domain_dim") {
    domain_dim = static_cast<std::size_t>(parse_uint(key, value));
  } else if (key == "extractor_hidden") {
    extractor_hidden = parse_dims(key, value);
  } else if (key == "c1_hidden") {
    c1_hidden = static_cast<std::size_t>(parse_uint(key, value));
  } else if (key == "c2_hidden") {
    c2_hidden = static_cast<std::size_t>(parse_uint(key, value));
  } else if (key == "d_hidden") {
    d_hidden = static_cast<std::size_t>(parse_uint(key, value));
  } else if (key == "binarize") {
    binarize = parse_bool(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

TrainConfig TrainConfig::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  TrainConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    cfg.apply(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t TrainConfig::fingerprint() const { return fnv1a64(serialize()); }

std::string TrainConfig::fingerprint_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fingerprint());
  return buf;
}

}  // namespace dacl
