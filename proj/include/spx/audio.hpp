#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace spx {

/// Mono time-domain signal. Samples are dimensionless amplitudes, nominally
/// in [-1, 1] for decoded PCM.
struct AudioBuffer {
  std::vector<double> samples;
  double sample_rate = 8000.0;

  AudioBuffer() = default;
  AudioBuffer(std::vector<double> s, double rate)
      : samples(std::move(s)), sample_rate(rate) {}
  AudioBuffer(std::size_t n, double rate) : samples(n, 0.0), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::span<const double> view() const { return samples; }

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }

  bool operator==(const AudioBuffer&) const = default;
};

/// Throws kInvalidArgument unless sample_rate > 0 and all samples are finite.
void validate(const AudioBuffer& audio);

double energy(std::span<const double> x);
double power(std::span<const double> x);

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a mono PCM16 or IEEE float32 WAV. Multi-channel files and other
/// encodings are rejected with kFormat.
AudioBuffer read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace spx
