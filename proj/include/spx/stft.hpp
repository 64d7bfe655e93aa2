#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "spx/audio.hpp"

namespace spx {

enum class WindowKind { kHannPeriodic, kRectangular };

/// STFT geometry. Frames are taken from the signal after prepending
/// (frame_size - hop) zeros, so every input sample is covered by
/// frame_size / hop frames. Bins 0 .. keep_bins-1 are kept; with the default
/// keep_bins = frame_size / 2 the Nyquist bin is dropped.
struct StftConfig {
  int frame_size = 256;
  int hop = 64;
  int keep_bins = 128;
  WindowKind window = WindowKind::kHannPeriodic;

  /// Throws kInvalidArgument if the geometry is unusable: frame_size even,
  /// hop divides frame_size, keep_bins in (0, frame_size/2 + 1], and
  /// the window satisfies squared-window COLA at this hop.
  void validate() const;

  int front_pad() const { return frame_size - hop; }
  /// Number of frames produced for a signal of `length` samples.
  int frames_for(std::size_t length) const;
  /// Longest signal that `frames` frames can reconstruct.
  std::size_t reconstructable_length(int frames) const;

  bool operator==(const StftConfig&) const = default;
};

std::vector<double> make_window(WindowKind kind, int size);

/// Sum over frames of w^2(t - m*hop) evaluated over one hop period. Constant
/// when the window/hop pair is COLA for squared-window overlap-add.
std::vector<double> squared_window_overlap(const StftConfig& cfg);

/// K x L complex matrix, stored bin-major: index k * frames + l.
struct ComplexSpectrogram {
  int bins = 0;
  int frames = 0;
  std::vector<std::complex<double>> data;
  StftConfig config;
  std::size_t original_length = 0;

  ComplexSpectrogram() = default;
  ComplexSpectrogram(int k, int l, const StftConfig& cfg, std::size_t length)
      : bins(k), frames(l), data(static_cast<std::size_t>(k) * l), config(cfg),
        original_length(length) {}

  std::complex<double>& at(int k, int l) { return data[static_cast<std::size_t>(k) * frames + l]; }
  const std::complex<double>& at(int k, int l) const {
    return data[static_cast<std::size_t>(k) * frames + l];
  }
};

ComplexSpectrogram stft(const AudioBuffer& audio, const StftConfig& cfg = {});

/// Overlap-add synthesis with squared-window normalization. The upper half of
/// each frame is rebuilt by conjugate symmetry; the imaginary part of the DC
/// bin and any bin at or above keep_bins (including Nyquist) are treated as
/// zero. Output is truncated to `length` samples at `sample_rate`.
AudioBuffer istft(const ComplexSpectrogram& spec, std::size_t length,
                  double sample_rate = 8000.0);

/// Adjoint of istft with respect to the spectrogram entries: given dLoss/dx
/// for the time signal, returns dLoss/dRe + i dLoss/dIm for every kept bin.
ComplexSpectrogram istft_adjoint(std::span<const double> grad_time,
                                 const StftConfig& cfg, int frames);

}  // namespace spx
