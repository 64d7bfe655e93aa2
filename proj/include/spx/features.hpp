#pragma once

#include <cstddef>
#include <vector>

#include "spx/stft.hpp"

namespace spx {

/// Real 3-axis tensor channels x bins x frames, channel-major. For RI
/// features channel 0 holds real parts and channel 1 imaginary parts.
struct RiTensor {
  int channels = 2;
  int bins = 0;
  int frames = 0;
  std::vector<double> data;
  StftConfig config;
  std::size_t original_length = 0;

  RiTensor() = default;
  RiTensor(int c, int k, int l, const StftConfig& cfg, std::size_t length)
      : channels(c), bins(k), frames(l),
        data(static_cast<std::size_t>(c) * k * l, 0.0), config(cfg), original_length(length) {}

  double& at(int c, int k, int l) {
    return data[(static_cast<std::size_t>(c) * bins + k) * frames + l];
  }
  double at(int c, int k, int l) const {
    return data[(static_cast<std::size_t>(c) * bins + k) * frames + l];
  }
};

/// Row-major real matrix (bins x frames) used for log-spectra and magnitudes.
struct RealMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

RiTensor ri_pack(const ComplexSpectrogram& spec);
ComplexSpectrogram ri_unpack(const RiTensor& t);

constexpr double kDefaultLogFloorDb = -80.0;

/// Natural log of max(|X|, floor) where floor = 10^(floor_db / 20).
RealMatrix log_spectrum(const ComplexSpectrogram& spec, double floor_db = kDefaultLogFloorDb);
RealMatrix magnitude(const ComplexSpectrogram& spec);

/// mag[k,l] * X[k,l] / |X[k,l]|; entries where |X| = 0 produce 0.
ComplexSpectrogram combine_mag_phase(const RealMatrix& mag, const ComplexSpectrogram& phase_source);

struct CropInfo {
  int original_frames = 0;
};

/// Zero-pads the frame axis up to the next multiple of `multiple`.
std::pair<RiTensor, CropInfo> pad_frames(const RiTensor& t, int multiple = 128);
RiTensor crop_frames(const RiTensor& t, const CropInfo& info);

}  // namespace spx
