#include <doctest.h>

#include <complex>

#include "helpers.hpp"
#include "spx/error.hpp"
#include "spx/features.hpp"
#include "spx/fft.hpp"
#include "spx/resample.hpp"
#include "spx/stft.hpp"

using namespace spx;

TEST_CASE("fft matches a direct DFT") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int n : {64, 100}) {
    std::vector<std::complex<double>> x(n), X(n, 0.0);
    for (auto& v : x) v = {nd(rng), nd(rng)};
    for (int k = 0; k < n; ++k)
      for (int t = 0; t < n; ++t) X[k] += x[t] * std::polar(1.0, -2.0 * M_PI * k * t / n);
    auto y = x;
    Fft(n).forward(y);
    for (int k = 0; k < n; ++k) CHECK(std::abs(y[k] - X[k]) < 1e-10);
    Fft(n).inverse(y);
    for (int t = 0; t < n; ++t) CHECK(std::abs(y[t] - x[t]) < 1e-12);
  }
}

TEST_CASE("fft sizes") {
  CHECK_THROWS_AS(Fft(0), Error);
  std::vector<std::complex<double>> x(48, {1.0, 0.0});
  Fft(48).forward(x);
  CHECK(std::abs(x[0] - std::complex<double>(48.0, 0.0)) < 1e-12);
  for (int k = 1; k < 48; ++k) CHECK(std::abs(x[k]) < 1e-12);
  std::vector<std::complex<double>> wrong(10);
  CHECK_THROWS_AS(Fft(48).forward(wrong), Error);
}

TEST_CASE("stft of a bin-centred tone peaks at that bin") {
  const StftConfig cfg;
  const auto x = test::tone(8000.0 * 20 / 256, 8000);
  const auto spec = stft(x, cfg);
  CHECK(spec.bins == 128);
  const int l = spec.frames / 2;
  int best = 0;
  for (int k = 1; k < spec.bins; ++k)
    if (std::abs(spec.at(k, l)) > std::abs(spec.at(best, l))) best = k;
  CHECK(best == 20);
  // Periodic Hann: tone amplitude A gives |X| = A * N / 4 at the centre bin.
  CHECK(std::abs(spec.at(20, l)) == doctest::Approx(256.0 / 4).epsilon(1e-9));
}

TEST_CASE("one second at 8 kHz gives 128 frames") {
  const StftConfig cfg;
  CHECK(cfg.frames_for(8000) == 128);
  CHECK(cfg.reconstructable_length(128) >= 8000);
}

TEST_CASE("stft/istft round trip") {
  std::mt19937_64 rng(2);
  for (std::size_t n : {1000u, 8000u, 12345u}) {
    const auto y = test::bandlimited_noise(rng, n);
    const auto back = istft(stft(y), n);
    CHECK(back.size() == n);
    CHECK(test::rel_error(back.samples, y.samples) < 1e-6);
  }
}

TEST_CASE("invalid stft geometry is rejected") {
  CHECK_THROWS_AS(StftConfig({200, 60, 100}).validate(), Error);
  CHECK_THROWS_AS(StftConfig({255, 51, 100}).validate(), Error);
  CHECK_NOTHROW(StftConfig({200, 50, 100}).validate());
  CHECK_THROWS_AS(StftConfig({256, 256, 128}).validate(), Error);
  CHECK_THROWS_AS(StftConfig({256, 64, 200}).validate(), Error);
}

TEST_CASE("istft adjoint matches finite differences") {
  std::mt19937_64 rng(3);
  const StftConfig cfg{32, 8, 16};
  const auto x = test::noise(rng, 100);
  auto spec = stft(x, cfg);
  const auto w = test::noise(rng, 100);
  auto objective = [&](const ComplexSpectrogram& s) {
    const auto y = istft(s, 100);
    double acc = 0.0;
    for (std::size_t i = 0; i < 100; ++i) acc += w.samples[i] * y.samples[i];
    return acc;
  };
  const auto g = istft_adjoint(w.samples, cfg, spec.frames);
  for (int k : {0, 3, 15})
    for (int l : {0, 5, spec.frames - 1}) {
      for (int part = 0; part < 2; ++part) {
        if (k == 0 && part == 1) continue;
        auto sp = spec, sm = spec;
        const std::complex<double> h = part == 0 ? std::complex<double>(1e-6, 0) : std::complex<double>(0, 1e-6);
        sp.at(k, l) += h;
        sm.at(k, l) -= h;
        const double fd = (objective(sp) - objective(sm)) / 2e-6;
        const double an = part == 0 ? g.at(k, l).real() : g.at(k, l).imag();
        CHECK(an == doctest::Approx(fd).epsilon(1e-6));
      }
    }
}

TEST_CASE("resampling keeps length ratio and tone frequency") {
  const auto x = test::tone(440.0, 16000, 0.5, 0.0, 16000.0);
  const auto y = resample(x, 8000.0);
  CHECK(y.size() == 8000);
  CHECK(y.sample_rate == 8000.0);
  const auto ref = test::tone(440.0, 8000, 0.5);
  // Ignore the edges where the kernel runs off the signal.
  std::vector<double> a(y.samples.begin() + 200, y.samples.end() - 200);
  std::vector<double> b(ref.samples.begin() + 200, ref.samples.end() - 200);
  CHECK(test::rel_error(a, b) < 1e-3);
  CHECK(resample(x, 16000.0) == x);
}

TEST_CASE("ri pack/unpack and padding") {
  std::mt19937_64 rng(4);
  const auto spec = stft(test::noise(rng, 3000));
  const auto t = ri_pack(spec);
  CHECK(t.channels == 2);
  CHECK(ri_unpack(t).data == spec.data);
  const auto [padded, info] = pad_frames(t, 128);
  CHECK(padded.frames % 128 == 0);
  CHECK(padded.at(1, 5, padded.frames - 1) == 0.0);
  CHECK(crop_frames(padded, info).data == t.data);
}

TEST_CASE("log spectrum floor and magnitude/phase recombination") {
  ComplexSpectrogram s(1, 2, StftConfig{}, 0);
  s.at(0, 0) = {3.0, 4.0};
  s.at(0, 1) = {0.0, 0.0};
  const auto ls = log_spectrum(s);
  CHECK(ls(0, 0) == doctest::Approx(std::log(5.0)));
  CHECK(ls(0, 1) == doctest::Approx(std::log(1e-4)));
  RealMatrix mag(1, 2);
  mag(0, 0) = 10.0;
  mag(0, 1) = 7.0;
  const auto c = combine_mag_phase(mag, s);
  CHECK(std::abs(c.at(0, 0) - std::complex<double>(6.0, 8.0)) < 1e-12);
  CHECK(c.at(0, 1) == std::complex<double>{});
}
