#include "spx/features.hpp"

#include <cmath>

#include "spx/error.hpp"

namespace spx {

RiTensor ri_pack(const ComplexSpectrogram& spec) {
  RiTensor t(2, spec.bins, spec.frames, spec.config, spec.original_length);
  for (int k = 0; k < spec.bins; ++k) {
    for (int l = 0; l < spec.frames; ++l) {
      t.at(0, k, l) = spec.at(k, l).real();
      t.at(1, k, l) = spec.at(k, l).imag();
    }
  }
  return t;
}

ComplexSpectrogram ri_unpack(const RiTensor& t) {
  require(t.channels == 2, "RI tensor must have two channels");
  ComplexSpectrogram spec(t.bins, t.frames, t.config, t.original_length);
  for (int k = 0; k < t.bins; ++k) {
    for (int l = 0; l < t.frames; ++l) spec.at(k, l) = {t.at(0, k, l), t.at(1, k, l)};
  }
  return spec;
}

RealMatrix log_spectrum(const ComplexSpectrogram& spec, double floor_db) {
  require(floor_db < 0.0, "log-spectrum floor must be negative dB");
  const double floor = std::pow(10.0, floor_db / 20.0);
  RealMatrix out(spec.bins, spec.frames);
  for (std::size_t i = 0; i < spec.data.size(); ++i) {
    out.data[i] = std::log(std::max(std::abs(spec.data[i]), floor));
  }
  return out;
}

RealMatrix magnitude(const ComplexSpectrogram& spec) {
  RealMatrix out(spec.bins, spec.frames);
  for (std::size_t i = 0; i < spec.data.size(); ++i) out.data[i] = std::abs(spec.data[i]);
  return out;
}

ComplexSpectrogram combine_mag_phase(const RealMatrix& mag, const ComplexSpectrogram& phase_source) {
  require(mag.rows == phase_source.bins && mag.cols == phase_source.frames,
          "magnitude and phase-source shapes differ");
  ComplexSpectrogram out(phase_source.bins, phase_source.frames, phase_source.config,
                         phase_source.original_length);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double r = std::abs(phase_source.data[i]);
    out.data[i] = r > 0.0 ? phase_source.data[i] * (mag.data[i] / r) : std::complex<double>{};
  }
  return out;
}

std::pair<RiTensor, CropInfo> pad_frames(const RiTensor& t, int multiple) {
  require(multiple > 0, "pad multiple must be positive");
  const int padded = (t.frames + multiple - 1) / multiple * multiple;
  RiTensor out(t.channels, t.bins, padded, t.config, t.original_length);
  for (int c = 0; c < t.channels; ++c) {
    for (int k = 0; k < t.bins; ++k) {
      for (int l = 0; l < t.frames; ++l) out.at(c, k, l) = t.at(c, k, l);
    }
  }
  return {std::move(out), CropInfo{t.frames}};
}

RiTensor crop_frames(const RiTensor& t, const CropInfo& info) {
  require(info.original_frames <= t.frames, "crop larger than tensor");
  RiTensor out(t.channels, t.bins, info.original_frames, t.config, t.original_length);
  for (int c = 0; c < t.channels; ++c) {
    for (int k = 0; k < t.bins; ++k) {
      for (int l = 0; l < info.original_frames; ++l) out.at(c, k, l) = t.at(c, k, l);
    }
  }
  return out;
}

}  // namespace spx
