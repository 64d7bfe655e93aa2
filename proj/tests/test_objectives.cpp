#include <doctest.h>

#include "helpers.hpp"
#include "spx/error.hpp"
#include "spx/objectives.hpp"

using namespace spx;

TEST_CASE("si_sdr of a hand-computed case") {
  // estimate = target + orthogonal error of equal energy -> 0 dB.
  const std::vector<double> s = {1.0, 0.0, 0.0, 0.0};
  const std::vector<double> y = {1.0, 1.0, 0.0, 0.0};
  CHECK(si_sdr(s, y) == doctest::Approx(0.0).epsilon(1e-9));
  const std::vector<double> y2 = {1.0, 0.5, 0.0, 0.0};
  CHECK(si_sdr(s, y2) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-9));
}

TEST_CASE("si_sdr is scale invariant and capped") {
  std::mt19937_64 rng(1);
  const auto s = test::noise(rng, 4000);
  auto y = s;
  const auto e = test::noise(rng, 4000, 0.3);
  for (std::size_t i = 0; i < y.size(); ++i) y.samples[i] += e.samples[i];
  const double base = si_sdr(s, y);
  for (double a : {0.01, 0.5, 3.0, 1000.0}) {
    auto ys = y;
    for (auto& v : ys.samples) v *= a;
    CHECK(si_sdr(s, ys) == doctest::Approx(base).epsilon(1e-9));
  }
  auto ss = s;
  for (auto& v : ss.samples) v *= 7.0;
  CHECK(si_sdr(ss, y) == doctest::Approx(base).epsilon(1e-9));
  CHECK(si_sdr(s, s) == kSiSdrCapDb);
  auto neg = s;
  for (auto& v : neg.samples) v *= -2.0;
  CHECK(si_sdr(s, neg) == kSiSdrCapDb);  // sign flips are a scaling too
}

TEST_CASE("si_sdr of an orthogonal estimate hits the floor") {
  const std::vector<double> s = {1.0, 0.0, 1.0, 0.0};
  const std::vector<double> y = {0.0, 1.0, 0.0, -1.0};
  CHECK(si_sdr(s, y) == -kSiSdrCapDb);
}

TEST_CASE("si_sdr input errors") {
  const std::vector<double> zero(8, 0.0), one(8, 1.0), short_(4, 1.0);
  CHECK_THROWS_AS(si_sdr(zero, one), Error);
  CHECK_THROWS_AS(si_sdr(one, short_), Error);
  try {
    si_sdr(zero, one);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidArgument);
  }
}

TEST_CASE("pair si_sdr averages the two speakers") {
  // 10 dB and 0 dB examples.
  AudioBuffer s1({1.0, 0.0}, 8000.0), e1({1.0, std::sqrt(0.1)}, 8000.0);
  AudioBuffer s2({0.0, 1.0}, 8000.0), e2({1.0, 1.0}, 8000.0);
  CHECK(si_sdr(s1, e1) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(pair_si_sdr(s1, e1, s2, e2) == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("si_sdr gradient matches finite differences") {
  std::mt19937_64 rng(2);
  const auto s = test::noise(rng, 64);
  auto y = s;
  const auto e = test::noise(rng, 64, 0.5);
  for (std::size_t i = 0; i < y.size(); ++i) y.samples[i] += e.samples[i];
  std::vector<double> g(64);
  const double v = si_sdr_with_grad(s.samples, y.samples, g);
  CHECK(v == doctest::Approx(si_sdr(s, y)).epsilon(1e-12));
  const double h = 1e-6;
  for (int i = 0; i < 64; i += 7) {
    auto yp = y.samples, ym = y.samples;
    yp[i] += h;
    ym[i] -= h;
    const double fd = (si_sdr(s.samples, yp) - si_sdr(s.samples, ym)) / (2 * h);
    CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6));
  }
  std::vector<double> gc(64);
  si_sdr_with_grad(s.samples, s.samples, gc);
  for (double x : gc) CHECK(x == 0.0);
}

TEST_CASE("mse on RI tensors") {
  RiTensor a(2, 3, 4, StftConfig{}, 0), b(2, 3, 4, StftConfig{}, 0);
  CHECK(ri_mse(a, b) == 0.0);
  b.at(1, 2, 3) = 2.0;  // one entry off by 2 out of 24
  CHECK(ri_mse(a, b) == doctest::Approx(4.0 / 24.0));
  RiTensor c(2, 3, 4, StftConfig{}, 0);
  for (auto& v : c.data) v = 1.0;
  CHECK(pair_ri_mse(a, b, a, c) == doctest::Approx(0.5 * (4.0 / 24.0 + 1.0)));
  RiTensor d(2, 3, 5, StftConfig{}, 0);
  CHECK_THROWS_AS(ri_mse(a, d), Error);
  const std::vector<double> t = {1, 2, 3}, y = {1, 2, 5};
  CHECK(mse(t, y) == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("combined loss and weights") {
  const LossWeights w;
  CHECK(w.beta_sisdr == 0.75);
  CHECK(w.beta_mse == 0.25);
  CHECK(combined_loss(8.0, 0.04, w) == doctest::Approx(-5.99));
  CHECK(combined_loss(8.0, 0.04, {1.0, 0.0}) == doctest::Approx(-8.0));
  CHECK(combined_loss(8.0, 0.04, {0.0, 1.0}) == doctest::Approx(0.04));
  // Better separation lowers the loss.
  CHECK(combined_loss(12.0, 0.04, w) < combined_loss(8.0, 0.04, w));
  CHECK_NOTHROW(w.validate());
  CHECK_THROWS_AS((LossWeights{0.7, 0.4}.validate()), Error);
  CHECK_THROWS_AS((LossWeights{-0.1, 1.1}.validate()), Error);
}
