#include "spx/resample.hpp"

#include <cmath>
#include <numbers>

#include "spx/error.hpp"

namespace spx {

namespace {

constexpr int kZeroCrossings = 32;
constexpr double kKaiserBeta = 8.6;

double kaiser(double x, double beta) {
  // x in [-1, 1]
  const double arg = std::max(0.0, 1.0 - x * x);
  return std::cyl_bessel_i(0.0, beta * std::sqrt(arg)) / std::cyl_bessel_i(0.0, beta);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

AudioBuffer resample(const AudioBuffer& audio, double target_rate) {
  require(target_rate > 0.0, "target sample rate must be positive");
  validate(audio);
  if (target_rate == audio.sample_rate) return audio;

  const double ratio = target_rate / audio.sample_rate;
  const double cutoff = std::min(1.0, ratio);
  const double half_width = kZeroCrossings / cutoff;
  const auto out_len = static_cast<std::size_t>(std::llround(audio.size() * ratio));
  const long in_len = static_cast<long>(audio.size());

  AudioBuffer out(out_len, target_rate);
  for (std::size_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) / ratio;
    const long lo = std::max(0L, static_cast<long>(std::ceil(t - half_width)));
    const long hi = std::min(in_len - 1, static_cast<long>(std::floor(t + half_width)));
    double acc = 0.0;
    for (long i = lo; i <= hi; ++i) {
      const double u = static_cast<double>(i) - t;
      acc += audio.samples[i] * cutoff * sinc(cutoff * u) * kaiser(u / half_width, kKaiserBeta);
    }
    out.samples[n] = acc;
  }
  return out;
}

}  // namespace spx
