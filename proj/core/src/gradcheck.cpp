#include "dacl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dacl/losses.hpp"

namespace dacl::gradcheck {

double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-2});
  return std::abs(analytic - numeric) / denom;
}

CheckReport check_gradients(const GraphFn& fn, const std::vector<Matrix>& inputs, double h) {
  std::vector<Matrix> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Value> leaves;
    leaves.reserve(inputs.size());
    for (const Matrix& m : inputs) leaves.push_back(tape.leaf(m, true));
    tape.backward(fn(tape, leaves));
    for (ad::Value v : leaves) analytic.push_back(v.grad());
  }

  auto eval = [&fn](const std::vector<Matrix>& xs) {
    ad::Tape tape;
    std::vector<ad::Value> leaves;
    leaves.reserve(xs.size());
    for (const Matrix& m : xs) leaves.push_back(tape.leaf(m));
    return fn(tape, leaves).scalar();
  };

  CheckReport rep;
  std::vector<Matrix> xs = inputs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    auto flat = xs[i].data();
    for (std::size_t k = 0; k < flat.size(); ++k) {
      const double orig = flat[k];
      flat[k] = orig + h;
      const double fp = eval(xs);
      flat[k] = orig - h;
      const double fm = eval(xs);
      flat[k] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i].data()[k];
      const double e = rel_err(a, numeric);
      ++rep.coords_checked;
      if (e > rep.max_rel_err) {
        rep.max_rel_err = e;
        std::ostringstream os;
        os << "input " << i << " (" << k / xs[i].cols() << "," << k % xs[i].cols()
           << "): analytic=" << a << " numeric=" << numeric;
        rep.worst = os.str();
      }
    }
  }
  return rep;
}

Matrix random_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = lo + (hi - lo) * rng.uniform();
  return m;
}

Matrix random_kink_free(Rng& rng, std::size_t rows, std::size_t cols, double margin) {
  Matrix m = random_uniform(rng, rows, cols, -1.0, 1.0);
  for (double& x : m.data()) {
    if (std::abs(x) < margin) x = x < 0.0 ? x - margin : x + margin;
  }
  return m;
}

namespace {

constexpr double kOpTol = 1e-4;
constexpr double kCompositeTol = 1e-3;
constexpr std::size_t kOpTrials = 20;

// Keep values away from `point` so finite differences never straddle a kink.
void push_away(Matrix& m, double point, double margin = 1e-3) {
  for (double& x : m.data()) {
    if (std::abs(x - point) < margin) x = x < point ? point - margin : point + margin;
  }
}

std::size_t dim(Rng& rng) { return 1 + rng.below(5); }

// Weighted reduction to a scalar; uniform weights would hide backward bugs
// whose row contributions cancel (row_softmax in particular).
ad::Value weighted_sum(ad::Tape& tape, ad::Value v, Rng& rng) {
  Matrix w = random_uniform(rng, v.rows(), v.cols(), -1.0, 1.0);
  return ad::sum_all(ad::mul(v, tape.leaf(std::move(w))));
}

struct Case {
  std::vector<Matrix> inputs;
  GraphFn fn;
};

using CaseGen = std::function<Case(Rng&)>;

SuiteEntry run_entry(const std::string& name, const CaseGen& gen, std::size_t trials,
                     double tol, Rng& rng) {
  SuiteEntry entry{name, {}, tol, false};
  for (std::size_t t = 0; t < trials; ++t) {
    Case c = gen(rng);
    CheckReport r = check_gradients(c.fn, c.inputs);
    entry.report.coords_checked += r.coords_checked;
    if (r.max_rel_err > entry.report.max_rel_err) {
      entry.report.max_rel_err = r.max_rel_err;
      entry.report.worst = "trial " + std::to_string(t) + ": " + r.worst;
    }
  }
  entry.passed = entry.report.ok(tol);
  return entry;
}

// A weight seed per trial, so the reduction weights do not depend on how many
// numbers the case generator itself consumed.
GraphFn reduce_with(std::uint64_t wseed,
                    std::function<ad::Value(ad::Tape&, std::span<const ad::Value>)> build) {
  return [wseed, build](ad::Tape& tape, std::span<const ad::Value> in) {
    Rng wrng(wseed);
    return weighted_sum(tape, build(tape, in), wrng);
  };
}

std::vector<SuiteEntry> op_entries(Rng& rng) {
  std::vector<SuiteEntry> out;
  auto add_op = [&](const std::string& name, const CaseGen& gen) {
    out.push_back(run_entry(name, gen, kOpTrials, kOpTol, rng));
  };

  add_op("matmul", [](Rng& r) {
    const std::size_t m = dim(r), k = dim(r), n = dim(r);
    Case c;
    c.inputs = {random_uniform(r, m, k, -1, 1), random_uniform(r, k, n, -1, 1)};
    c.fn = reduce_with(r.next(), [](ad::Tape&, std::span<const ad::Value> in) {
      return ad::matmul(in[0], in[1]);
    });
    return c;
  });
  add_op("add", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    Case c;
    c.inputs = {random_uniform(r, m, n, -1, 1), random_uniform(r, m, n, -1, 1)};
    c.fn = reduce_with(r.next(), [](ad::Tape&, std::span<const ad::Value> in) {
      return ad::add(in[0], in[1]);
    });
    return c;
  });
  add_op("sub", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    Case c;
    c.inputs = {random_uniform(r, m, n, -1, 1), random_uniform(r, m, n, -1, 1)};
    c.fn = reduce_with(r.next(), [](ad::Tape&, std::span<const ad::Value> in) {
      return ad::sub(in[0], in[1]);
    });
    return c;
  });
  add_op("mul", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    Case c;
    c.inputs = {random_uniform(r, m, n, -1, 1), random_uniform(r, m, n, -1, 1)};
    c.fn = reduce_with(r.next(), [](ad::Tape&, std::span<const ad::Value> in) {
      return ad::mul(in[0], in[1]);
    });
    return c;
  });
  add_op("scale", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    const double s = -2.0 + 4.0 * r.uniform();
    Case c;
    c.inputs = {random_uniform(r, m, n, -1, 1)};
    c.fn = reduce_with(r.next(), [s](ad::Tape&, std::span<const ad::Value> in) {
      return ad::scale(in[0], s);
    });
    return c;
  });
  add_op("add_rowvec", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    Case c;
    c.inputs = {random_uniform(r, m, n, -1, 1), random_uniform(r, 1, n, -1, 1)};
    c.fn = reduce_with(r.next(), [](ad::Tape&, std::span<const ad::Value> in) {
      return ad::add_rowvec(in[0], in[1]);
    });
    return c;
  });
  add_op("relu", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    Case c;
    c.inputs = {random_kink_free(r, m, n)};
    c.fn = reduce_with(r.next(), [](ad::Tape&, std::span<const ad::Value> in) {
      return ad::relu(in[0]);
    });
    return c;
  });
  add_op("log", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    Case c;
    c.inputs = {random_uniform(r, m, n, 0.1, 2.0)};
    c.fn = reduce_with(r.next(), [](ad::Tape&, std::span<const ad::Value> in) {
      return ad::log(in[0]);
    });
    return c;
  });
  add_op("clamp_min", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    const double floor = -0.5 + r.uniform();
    Case c;
    Matrix x = random_uniform(r, m, n, -1, 1);
    push_away(x, floor);
    c.inputs = {std::move(x)};
    c.fn = reduce_with(r.next(), [floor](ad::Tape&, std::span<const ad::Value> in) {
      return ad::clamp_min(in[0], floor);
    });
    return c;
  });
  add_op("row_softmax", [](Rng& r) {
    const std::size_t m = dim(r), n = 2 + r.below(4);
    Case c;
    c.inputs = {random_uniform(r, m, n, -2, 2)};
    c.fn = reduce_with(r.next(), [](ad::Tape&, std::span<const ad::Value> in) {
      return ad::row_softmax(in[0]);
    });
    return c;
  });
  add_op("concat_cols", [](Rng& r) {
    const std::size_t m = dim(r), n1 = dim(r), n2 = dim(r);
    Case c;
    c.inputs = {random_uniform(r, m, n1, -1, 1), random_uniform(r, m, n2, -1, 1)};
    c.fn = reduce_with(r.next(), [](ad::Tape&, std::span<const ad::Value> in) {
      return ad::concat_cols(in[0], in[1]);
    });
    return c;
  });
  add_op("transpose", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    Case c;
    c.inputs = {random_uniform(r, m, n, -1, 1)};
    c.fn = reduce_with(r.next(), [](ad::Tape&, std::span<const ad::Value> in) {
      return ad::transpose(in[0]);
    });
    return c;
  });
  add_op("mean_rows", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    Case c;
    c.inputs = {random_uniform(r, m, n, -1, 1)};
    c.fn = [](ad::Tape&, std::span<const ad::Value> in) { return ad::mean_rows(in[0]); };
    return c;
  });
  add_op("sum_all", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    Case c;
    c.inputs = {random_uniform(r, m, n, -1, 1)};
    c.fn = [](ad::Tape&, std::span<const ad::Value> in) { return ad::sum_all(in[0]); };
    return c;
  });
  add_op("l1_rowdiff_mean", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    Case c;
    Matrix a = random_uniform(r, m, n, -1, 1);
    Matrix b = random_uniform(r, m, n, -1, 1);
    // keep |a - b| off the kink
    for (std::size_t i = 0; i < a.size(); ++i) {
      double& bv = b.data()[i];
      const double av = a.data()[i];
      if (std::abs(av - bv) < 1e-3) bv = bv < av ? av - 1e-3 : av + 1e-3;
    }
    c.inputs = {std::move(a), std::move(b)};
    c.fn = [](ad::Tape&, std::span<const ad::Value> in) {
      return ad::l1_rowdiff_mean(in[0], in[1]);
    };
    return c;
  });
  add_op("frob_sq", [](Rng& r) {
    const std::size_t m = dim(r), n = dim(r);
    Case c;
    c.inputs = {random_uniform(r, m, n, -1, 1)};
    c.fn = [](ad::Tape&, std::span<const ad::Value> in) { return ad::frob_sq(in[0]); };
    return c;
  });
  return out;
}

std::vector<int> random_labels(Rng& rng, std::size_t batch, std::size_t classes) {
  std::vector<int> y(batch);
  for (int& v : y) v = static_cast<int>(rng.below(static_cast<std::uint32_t>(classes)));
  return y;
}

std::vector<SuiteEntry> composite_entries(Rng& rng) {
  std::vector<SuiteEntry> out;
  constexpr std::size_t kTrials = 5;
  auto add = [&](const std::string& name, const CaseGen& gen) {
    out.push_back(run_entry(name, gen, kTrials, kCompositeTol, rng));
  };

  add("loss/classification", [](Rng& r) {
    const std::size_t batch = 2 + r.below(4), classes = 2 + r.below(3);
    auto labels = random_labels(r, batch, classes);
    Case c;
    c.inputs = {random_uniform(r, batch, classes, -2, 2)};
    c.fn = [labels](ad::Tape& tape, std::span<const ad::Value> in) {
      return classification_loss(tape, ad::row_softmax(in[0]), labels);
    };
    return c;
  });
  add("loss/separation", [](Rng& r) {
    const std::size_t batch = 2 + r.below(4), ds = dim(r), dd = dim(r);
    Case c;
    c.inputs = {random_uniform(r, batch, ds, -1, 1), random_uniform(r, batch, dd, -1, 1)};
    c.fn = [](ad::Tape&, std::span<const ad::Value> in) {
      return separation_loss(in[0], in[1]);
    };
    return c;
  });
  add("loss/domain_adv", [](Rng& r) {
    const std::size_t batch = 2 + r.below(4), domains = 2 + r.below(3);
    const std::size_t m = r.below(static_cast<std::uint32_t>(domains));
    Case c;
    c.inputs = {random_uniform(r, batch, domains, -2, 2)};
    c.fn = [m](ad::Tape& tape, std::span<const ad::Value> in) {
      return domain_adv_loss(tape, ad::row_softmax(in[0]), m);
    };
    return c;
  });
  add("loss/discrepancy", [](Rng& r) {
    const std::size_t batch = 2 + r.below(4), classes = 2;
    Case c;
    // resample until the softmax outputs are clear of the |.| kink
    for (int attempt = 0; attempt < 100; ++attempt) {
      Matrix a = random_uniform(r, batch, classes, -2, 2);
      Matrix b = random_uniform(r, batch, classes, -2, 2);
      ad::Tape probe;
      const Matrix pa = ad::row_softmax(probe.leaf(a)).payload();
      const Matrix pb = ad::row_softmax(probe.leaf(b)).payload();
      double gap = 1e9;
      for (std::size_t i = 0; i < pa.size(); ++i) {
        gap = std::min(gap, std::abs(pa.data()[i] - pb.data()[i]));
      }
      c.inputs = {std::move(a), std::move(b)};
      if (gap >= 5e-4) break;
    }
    c.fn = [](ad::Tape&, std::span<const ad::Value> in) {
      return discrepancy_loss(ad::row_softmax(in[0]), ad::row_softmax(in[1]));
    };
    return c;
  });

  // The full L-step objective with single-layer extractors and classifiers,
  // differentiated with respect to every weight and bias.
  add("composite/l_step", [](Rng& r) {
    const std::size_t batch = 3, vocab = 5, ds = 3, dd = 2, classes = 2;
    const double alpha = 0.1;
    Matrix x;
    std::vector<Matrix> params;
    // resample until extractor pre-activations are clear of the ReLU kink
    for (int attempt = 0; attempt < 100; ++attempt) {
      x = random_uniform(r, batch, vocab, 0.0, 1.0);
      params = {random_uniform(r, vocab, ds, -1, 1),  random_uniform(r, 1, ds, -1, 1),
                random_uniform(r, vocab, dd, -1, 1),  random_uniform(r, 1, dd, -1, 1),
                random_uniform(r, ds + dd, classes, -1, 1), random_uniform(r, 1, classes, -1, 1),
                random_uniform(r, ds + dd, classes, -1, 1), random_uniform(r, 1, classes, -1, 1)};
      double margin = 1e9;
      for (int e : {0, 2}) {
        Matrix pre(batch, params[e].cols());
        addmul_nn(pre, x, params[e]);
        for (std::size_t row = 0; row < pre.rows(); ++row) {
          for (std::size_t col = 0; col < pre.cols(); ++col) {
            margin = std::min(margin, std::abs(pre(row, col) + params[e + 1](0, col)));
          }
        }
      }
      if (margin > 1e-3) break;
    }
    auto labels = random_labels(r, batch, classes);
    Case c;
    c.inputs = std::move(params);
    c.fn = [x, labels, alpha](ad::Tape& tape, std::span<const ad::Value> in) {
      ad::Value xin = tape.leaf(x);
      ad::Value s = ad::relu(ad::add_rowvec(ad::matmul(xin, in[0]), in[1]));
      ad::Value d = ad::relu(ad::add_rowvec(ad::matmul(xin, in[2]), in[3]));
      ad::Value feats = ad::concat_cols(s, d);
      ad::Value p1 = ad::row_softmax(ad::add_rowvec(ad::matmul(feats, in[4]), in[5]));
      ad::Value p2 = ad::row_softmax(ad::add_rowvec(ad::matmul(feats, in[6]), in[7]));
      ad::Value loss = ad::add(classification_loss(tape, p1, labels),
                               classification_loss(tape, p2, labels));
      return ad::add(loss, ad::scale(separation_loss(s, d), alpha));
    };
    return c;
  });
  return out;
}

}  // namespace

std::vector<SuiteEntry> run_standard_suite(std::uint64_t seed) {
  Rng op_rng(mix_seed(seed, 1));
  Rng comp_rng(mix_seed(seed, 2));
  std::vector<SuiteEntry> entries = op_entries(op_rng);
  for (SuiteEntry& e : composite_entries(comp_rng)) entries.push_back(std::move(e));
  return entries;
}

bool all_passed(const std::vector<SuiteEntry>& entries) {
  return std::all_of(entries.begin(), entries.end(),
                     [](const SuiteEntry& e) { return e.passed; });
}

}  // namespace dacl::gradcheck
