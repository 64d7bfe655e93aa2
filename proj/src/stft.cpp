#include "spx/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spx/error.hpp"
#include "spx/fft.hpp"

namespace spx {

std::vector<double> make_window(WindowKind kind, int size) {
  std::vector<double> w(size, 1.0);
  if (kind == WindowKind::kHannPeriodic) {
    for (int n = 0; n < size; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / size);
    }
  }
  return w;
}

std::vector<double> squared_window_overlap(const StftConfig& cfg) {
  const auto w = make_window(cfg.window, cfg.frame_size);
  std::vector<double> sum(cfg.hop, 0.0);
  for (int n = 0; n < cfg.frame_size; ++n) sum[n % cfg.hop] += w[n] * w[n];
  return sum;
}

void StftConfig::validate() const {
  require(frame_size > 0 && frame_size % 2 == 0, "frame_size must be positive and even");
  require(hop > 0 && frame_size % hop == 0, "hop must divide frame_size");
  require(keep_bins > 0 && keep_bins <= frame_size / 2 + 1,
          "keep_bins must lie in (0, frame_size/2 + 1]");
  const auto overlap = squared_window_overlap(*this);
  const auto [lo, hi] = std::minmax_element(overlap.begin(), overlap.end());
  require(*lo > 0.0 && (*hi - *lo) <= 1e-10 * *hi,
          "window does not satisfy constant overlap-add at this hop");
}

int StftConfig::frames_for(std::size_t length) const {
  const std::size_t padded = length + static_cast<std::size_t>(front_pad());
  return static_cast<int>((padded + hop - 1) / hop);
}

std::size_t StftConfig::reconstructable_length(int frames) const {
  return static_cast<std::size_t>(frames) * hop;
}

ComplexSpectrogram stft(const AudioBuffer& audio, const StftConfig& cfg) {
  cfg.validate();
  validate(audio);
  require(!audio.empty(), "stft needs at least one sample");
  const int n = cfg.frame_size;
  const int frames = cfg.frames_for(audio.size());
  const long pad = cfg.front_pad();
  const auto window = make_window(cfg.window, n);
  const Fft fft(n);

  ComplexSpectrogram spec(cfg.keep_bins, frames, cfg, audio.size());
  std::vector<std::complex<double>> buf(n);
  const long total = static_cast<long>(audio.size());
  for (int m = 0; m < frames; ++m) {
    const long start = static_cast<long>(m) * cfg.hop - pad;
    for (int i = 0; i < n; ++i) {
      const long t = start + i;
      const double x = (t >= 0 && t < total) ? audio.samples[t] : 0.0;
      buf[i] = {x * window[i], 0.0};
    }
    fft.forward(buf);
    for (int k = 0; k < cfg.keep_bins; ++k) spec.at(k, m) = buf[k];
  }
  return spec;
}

namespace {

// Overlap-added squared window over the padded signal axis.
std::vector<double> synthesis_norm(const StftConfig& cfg, const std::vector<double>& window,
                                   int frames) {
  std::vector<double> norm(static_cast<std::size_t>(frames - 1) * cfg.hop + cfg.frame_size, 0.0);
  for (int m = 0; m < frames; ++m) {
    for (int i = 0; i < cfg.frame_size; ++i) norm[m * cfg.hop + i] += window[i] * window[i];
  }
  return norm;
}

}  // namespace

AudioBuffer istft(const ComplexSpectrogram& spec, std::size_t length, double sample_rate) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  require(spec.frames >= 1 && spec.bins == cfg.keep_bins, "malformed spectrogram");
  require(length <= cfg.reconstructable_length(spec.frames),
          "requested length exceeds what the spectrogram can reconstruct");
  const int n = cfg.frame_size;
  const int half = n / 2;
  const auto window = make_window(cfg.window, n);
  const auto norm = synthesis_norm(cfg, window, spec.frames);
  const Fft fft(n);

  std::vector<double> acc(norm.size(), 0.0);
  std::vector<std::complex<double>> buf(n);
  for (int m = 0; m < spec.frames; ++m) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    buf[0] = {spec.at(0, m).real(), 0.0};
    for (int k = 1; k < std::min(spec.bins, half); ++k) {
      buf[k] = spec.at(k, m);
      buf[n - k] = std::conj(buf[k]);
    }
    fft.inverse(buf);
    for (int i = 0; i < n; ++i) acc[m * cfg.hop + i] += window[i] * buf[i].real();
  }

  AudioBuffer out(length, sample_rate);
  const int pad = cfg.front_pad();
  for (std::size_t t = 0; t < length; ++t) {
    const double d = norm[t + pad];
    out.samples[t] = d > 1e-12 ? acc[t + pad] / d : 0.0;
  }
  return out;
}

ComplexSpectrogram istft_adjoint(std::span<const double> grad_time, const StftConfig& cfg,
                                 int frames) {
  cfg.validate();
  require(frames >= 1, "frames must be positive");
  require(grad_time.size() <= cfg.reconstructable_length(frames),
          "gradient longer than reconstructable length");
  const int n = cfg.frame_size;
  const int half = n / 2;
  const int pad = cfg.front_pad();
  const auto window = make_window(cfg.window, n);
  const auto norm = synthesis_norm(cfg, window, frames);
  const Fft fft(n);

  std::vector<double> scaled(norm.size(), 0.0);
  for (std::size_t t = 0; t < grad_time.size(); ++t) {
    const double d = norm[t + pad];
    scaled[t + pad] = d > 1e-12 ? grad_time[t] / d : 0.0;
  }

  ComplexSpectrogram grad(cfg.keep_bins, frames, cfg, grad_time.size());
  std::vector<std::complex<double>> buf(n);
  for (int m = 0; m < frames; ++m) {
    for (int i = 0; i < n; ++i) buf[i] = {window[i] * scaled[m * cfg.hop + i], 0.0};
    fft.forward(buf);
    grad.at(0, m) = {buf[0].real() / n, 0.0};
    for (int k = 1; k < std::min(cfg.keep_bins, half); ++k) grad.at(k, m) = buf[k] * (2.0 / n);
  }
  return grad;
}

}  // namespace spx
