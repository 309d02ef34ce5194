#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "dacl/losses.hpp"
#include "dacl/rng.hpp"

using namespace dacl;
using ad::Tape;
using ad::Value;

namespace {

constexpr double kTol = 1e-9;

Matrix mat(std::size_t rows, std::size_t cols, std::initializer_list<double> vals) {
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (double v : vals) m.data()[i++] = v;
  REQUIRE(i == m.size());
  return m;
}

double scalar(Value v) { return v.payload()(0, 0); }

}  // namespace

TEST_CASE("classification loss: perfect, uniform, hand-arithmetic") {
  Tape tape;
  Value perfect = tape.leaf(mat(2, 2, {1, 0, 0, 1}));
  std::vector<int> labels01 = {0, 1};
  CHECK(std::abs(scalar(classification_loss(tape, perfect, labels01))) < kTol);

  Value uniform = tape.leaf(mat(1, 2, {0.5, 0.5}));
  std::vector<int> zero = {0};
  CHECK(scalar(classification_loss(tape, uniform, zero)) ==
        doctest::Approx(std::log(2.0)).epsilon(kTol));

  Value probs = tape.leaf(mat(2, 2, {0.8, 0.2, 0.3, 0.7}));
  const double expected = -(std::log(0.8) + std::log(0.7)) / 2.0;
  CHECK(scalar(classification_loss(tape, probs, labels01)) ==
        doctest::Approx(expected).epsilon(kTol));
}

TEST_CASE("classification loss clamps instead of producing infinities") {
  Tape tape;
  Value hopeless = tape.leaf(mat(1, 2, {0.0, 1.0}));
  std::vector<int> zero = {0};
  const double loss = scalar(classification_loss(tape, hopeless, zero));
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
}

TEST_CASE("classification loss rejects out-of-range labels") {
  Tape tape;
  Value probs = tape.leaf(mat(1, 2, {0.5, 0.5}));
  std::vector<int> bad = {2};
  CHECK_THROWS(classification_loss(tape, probs, bad));
  std::vector<int> neg = {-1};
  CHECK_THROWS(classification_loss(tape, probs, neg));
}

TEST_CASE("separation loss: single-instance outer product") {
  Tape tape;
  Value s = tape.leaf(mat(1, 3, {1, 0, 0}));
  Value d = tape.leaf(mat(1, 2, {2, 0}));
  CHECK(scalar(separation_loss(s, d)) == doctest::Approx(4.0).epsilon(kTol));
}

TEST_CASE("separation loss: symmetric cancellation reaches exactly zero") {
  Tape tape;
  Value s = tape.leaf(mat(2, 3, {1, 0, 0, -1, 0, 0}));
  Value d = tape.leaf(mat(2, 2, {5, -3, 5, -3}));
  CHECK(scalar(separation_loss(s, d)) == 0.0);
}

TEST_CASE("separation loss is nonnegative on random inputs") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    Matrix ms(3, 4), md(3, 2);
    for (double& v : ms.data()) v = rng.uniform() * 4.0 - 2.0;
    for (double& v : md.data()) v = rng.uniform() * 4.0 - 2.0;
    CHECK(scalar(separation_loss(tape.leaf(ms), tape.leaf(md))) >= 0.0);
  }
}

TEST_CASE("domain-adversarial loss: uniform discriminator, M=4") {
  Tape tape;
  std::vector<Value> probs;
  for (std::size_t m = 0; m < 4; ++m) {
    probs.push_back(tape.leaf(Matrix(3, 4, 0.25)));
  }
  const double loss = scalar(domain_adv_loss(tape, probs));
  CHECK(loss == doctest::Approx(4.0 * std::log(0.25)).epsilon(kTol));
  CHECK(loss == doctest::Approx(-5.545177444479562).epsilon(1e-9));
}

TEST_CASE("domain-adversarial loss: perfect discriminator gives zero") {
  Tape tape;
  std::vector<Value> probs = {tape.leaf(mat(2, 2, {1, 0, 1, 0})),
                              tape.leaf(mat(2, 2, {0, 1, 0, 1}))};
  CHECK(std::abs(scalar(domain_adv_loss(tape, probs))) < kTol);
}

TEST_CASE("domain-adversarial loss: M=2 hand arithmetic") {
  Tape tape;
  std::vector<Value> probs = {tape.leaf(mat(1, 2, {0.7, 0.3})),
                              tape.leaf(mat(1, 2, {0.4, 0.6}))};
  CHECK(scalar(domain_adv_loss(tape, probs)) ==
        doctest::Approx(std::log(0.7) + std::log(0.6)).epsilon(kTol));
}

TEST_CASE("domain-adversarial loss is never positive") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    Tape tape;
    std::vector<Value> probs;
    for (std::size_t m = 0; m < 3; ++m) {
      Matrix p(4, 3);
      for (std::size_t i = 0; i < p.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < p.cols(); ++j) {
          p(i, j) = rng.uniform() + 1e-3;
          sum += p(i, j);
        }
        for (std::size_t j = 0; j < p.cols(); ++j) p(i, j) /= sum;
      }
      probs.push_back(tape.leaf(p));
    }
    CHECK(scalar(domain_adv_loss(tape, probs)) <= 0.0);
  }
}

TEST_CASE("domain-adversarial loss rejects wrong column counts") {
  Tape tape;
  std::vector<Value> probs = {tape.leaf(Matrix(2, 3, 0.5)), tape.leaf(Matrix(2, 2, 0.5))};
  CHECK_THROWS(domain_adv_loss(tape, probs));
}

TEST_CASE("discrepancy loss: identity, maximum, direct arithmetic") {
  Tape tape;
  Value p = tape.leaf(mat(2, 2, {0.6, 0.4, 0.1, 0.9}));
  CHECK(scalar(discrepancy_loss(p, p)) == 0.0);

  Value one = tape.leaf(mat(1, 2, {1, 0}));
  Value two = tape.leaf(mat(1, 2, {0, 1}));
  CHECK(scalar(discrepancy_loss(one, two)) == doctest::Approx(2.0).epsilon(kTol));

  Value a = tape.leaf(mat(1, 2, {0.6, 0.4}));
  Value b = tape.leaf(mat(1, 2, {0.4, 0.6}));
  CHECK(scalar(discrepancy_loss(a, b)) == doctest::Approx(0.4).epsilon(kTol));
}

TEST_CASE("discrepancy aggregate over M domains stays within [0, 2M]") {
  Rng rng(55);
  Tape tape;
  std::vector<Value> p1s, p2s;
  const std::size_t M = 4;
  for (std::size_t m = 0; m < M; ++m) {
    Matrix a(5, 2), b(5, 2);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double x = rng.uniform(), y = rng.uniform();
      a(i, 0) = x;
      a(i, 1) = 1.0 - x;
      b(i, 0) = y;
      b(i, 1) = 1.0 - y;
    }
    p1s.push_back(tape.leaf(a));
    p2s.push_back(tape.leaf(b));
  }
  Value total = discrepancy_loss(p1s, p2s);
  CHECK(scalar(total) >= 0.0);
  CHECK(scalar(total) <= 2.0 * static_cast<double>(M));
}

TEST_CASE("discrepancy loss rejects shape mismatches") {
  Tape tape;
  Value a = tape.leaf(Matrix(2, 2, 0.5));
  Value b = tape.leaf(Matrix(3, 2, 0.5));
  CHECK_THROWS(discrepancy_loss(a, b));
}

TEST_CASE("LossBundle invariants hold on a worked example") {
  LossBundle bundle;
  bundle.lc1 = 0.3;
  bundle.lc2 = 0.4;
  bundle.lsep = 1.5;
  bundle.ladv_d = -2.0;
  bundle.ladv_u = 0.7;
  CHECK(bundle.lc1 >= 0.0);
  CHECK(bundle.lc2 >= 0.0);
  CHECK(bundle.lsep >= 0.0);
  CHECK(bundle.ladv_d <= 0.0);
  CHECK(bundle.ladv_u >= 0.0);
}
