#pragma once

#include <random>
#include <vector>

#include "spx/audio.hpp"

namespace spx {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  bool operator==(const Vec3&) const = default;
};

double distance(const Vec3& a, const Vec3& b);

/// Closed interval [lo, hi]; lo == hi is a point value.
struct UniformRange {
  double lo = 0.0;
  double hi = 0.0;
  double sample(std::mt19937_64& rng) const;
  bool operator==(const UniformRange&) const = default;
};

/// Acoustic scene distributions. Defaults reproduce the noisy/reverberant
/// dataset table: rooms U[4,8] x U[4,8] x U[2.5,3] m, T60 U[0.16,2] s,
/// microphone at the room centre +-0.5 m and 1.5 m high, sources at
/// U[0,180] degrees and 1 + U[-0.5,0.5] m from the microphone.
struct SceneRanges {
  UniformRange room_x{4.0, 8.0};
  UniformRange room_y{4.0, 8.0};
  UniformRange room_z{2.5, 3.0};
  UniformRange t60{0.16, 2.0};
  UniformRange mic_offset{-0.5, 0.5};
  double mic_z = 1.5;
  UniformRange source_angle_deg{0.0, 180.0};
  double source_distance_base = 1.0;
  UniformRange source_distance_offset{-0.5, 0.5};

  bool operator==(const SceneRanges&) const = default;
};

/// One sampled room. Sources share the microphone height; angle 0 points
/// along +x and angles grow counterclockwise seen from above. t60 == 0 marks
/// an anechoic scene.
struct SceneSpec {
  Vec3 room;
  double t60 = 0.0;
  Vec3 mic;
  std::vector<Vec3> sources;

  bool operator==(const SceneSpec&) const = default;
};

constexpr double kSpeedOfSound = 343.0;

SceneSpec sample_scene(std::mt19937_64& rng, const SceneRanges& ranges, int n_sources,
                       int max_retries = 100);

enum class AbsorptionModel {
  /// beta = sqrt(1 - alpha_sabine).
  kSabine,
  /// beta chosen so the image-method energy envelope, read through the same
  /// Schroeder fit as estimate_t60, decays at the requested T60.
  kCalibrated,
};

struct RirOptions {
  bool reflections = true;
  AbsorptionModel absorption = AbsorptionModel::kCalibrated;
  /// Fractional delays via an 81-tap Hann-windowed sinc; when false every
  /// image lands on the nearest integer tap.
  bool fractional_delay = true;
  /// Image sources are kept up to this multiple of T60 in propagation time.
  double time_limit_factor = 1.2;
  /// Allen-Berkley 100 Hz high-pass removing the DC build-up of the
  /// all-positive image pulses.
  bool high_pass = true;
};

constexpr int kSincTaps = 81;

/// Uniform wall absorption from Sabine's formula, 0.1611 V / (S T60).
double sabine_absorption(const Vec3& room, double t60);

/// Wall reflection coefficient used by generate_rir for this scene.
double reflection_coefficient(const SceneSpec& scene, double sample_rate,
                              const RirOptions& options = {});

/// Image-method impulse response from source `source_index` to the
/// microphone. Throws kInvalidScene when the Sabine absorption exceeds 1.
AudioBuffer generate_rir(const SceneSpec& scene, int source_index, double sample_rate,
                         const RirOptions& options = {});

/// Integer tap index of the direct path, round(distance / c * fs).
long direct_path_tap(const SceneSpec& scene, int source_index, double sample_rate);

/// Linear convolution truncated to the signal length.
AudioBuffer convolve(const AudioBuffer& signal, const AudioBuffer& rir);

/// Schroeder backward integration; fits the -5 to -25 dB span of the decay
/// curve and extrapolates to -60 dB. Throws kEstimationFailure when the curve
/// never covers that span.
double estimate_t60(const AudioBuffer& rir);

}  // namespace spx
