#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "spx/audio.hpp"

namespace spx::test {

inline AudioBuffer noise(std::mt19937_64& rng, std::size_t n, double scale = 1.0, double rate = 8000.0) {
  std::normal_distribution<double> nd(0.0, scale);
  AudioBuffer a(n, rate);
  for (auto& v : a.samples) v = nd(rng);
  return a;
}

/// Full linear convolution of white noise with eight cascaded 2-tap
/// averages. The zero-extended sequence then has an order-8 spectral zero at
/// Nyquist, so even the edge frames leave nothing in the dropped bin.
inline AudioBuffer bandlimited_noise(std::mt19937_64& rng, std::size_t n, double rate = 8000.0) {
  constexpr std::size_t kPasses = 8;
  AudioBuffer a = noise(rng, n, 1.0, rate);
  std::fill(a.samples.end() - kPasses, a.samples.end(), 0.0);
  for (std::size_t pass = 0; pass < kPasses; ++pass) {
    for (std::size_t i = n; i-- > 1;) a.samples[i] = 0.5 * (a.samples[i] + a.samples[i - 1]);
    a.samples[0] *= 0.5;
  }
  return a;
}

inline AudioBuffer tone(double freq, std::size_t n, double amp = 1.0, double phase = 0.0, double rate = 8000.0) {
  AudioBuffer a(n, rate);
  for (std::size_t i = 0; i < n; ++i) a.samples[i] = amp * std::sin(2.0 * M_PI * freq * i / rate + phase);
  return a;
}

inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("spx_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace spx::test
