#include "spx/room.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "spx/error.hpp"
#include "spx/parallel.hpp"
#include "spx/fft.hpp"

namespace spx {

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                   (a.z - b.z) * (a.z - b.z));
}

double UniformRange::sample(std::mt19937_64& rng) const {
  require(lo <= hi, "range lower bound exceeds upper bound");
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

namespace {

bool strictly_inside(const Vec3& p, const Vec3& room) {
  return p.x > 0.0 && p.x < room.x && p.y > 0.0 && p.y < room.y && p.z > 0.0 && p.z < room.z;
}

}  // namespace

SceneSpec sample_scene(std::mt19937_64& rng, const SceneRanges& ranges, int n_sources,
                       int max_retries) {
  require(n_sources >= 1, "a scene needs at least one source");
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    SceneSpec scene;
    scene.room = {ranges.room_x.sample(rng), ranges.room_y.sample(rng), ranges.room_z.sample(rng)};
    scene.t60 = ranges.t60.sample(rng);
    scene.mic = {scene.room.x / 2.0 + ranges.mic_offset.sample(rng),
                 scene.room.y / 2.0 + ranges.mic_offset.sample(rng), ranges.mic_z};
    if (!strictly_inside(scene.mic, scene.room)) continue;

    bool placed_all = true;
    for (int s = 0; s < n_sources && placed_all; ++s) {
      bool placed = false;
      for (int retry = 0; retry < max_retries && !placed; ++retry) {
        const double angle = ranges.source_angle_deg.sample(rng) * std::numbers::pi / 180.0;
        const double dist = ranges.source_distance_base + ranges.source_distance_offset.sample(rng);
        const Vec3 pos{scene.mic.x + dist * std::cos(angle), scene.mic.y + dist * std::sin(angle),
                       scene.mic.z};
        if (dist > 0.0 && strictly_inside(pos, scene.room)) {
          scene.sources.push_back(pos);
          placed = true;
        }
      }
      placed_all = placed;
    }
    if (placed_all) return scene;
  }
  fail(ErrorKind::kSamplingFailure, "could not place microphone and sources inside the room");
}

double sabine_absorption(const Vec3& room, double t60) {
  const double volume = room.x * room.y * room.z;
  const double surface = 2.0 * (room.x * room.y + room.x * room.z + room.y * room.z);
  return 0.1611 * volume / (surface * t60);
}

long direct_path_tap(const SceneSpec& scene, int source_index, double sample_rate) {
  return std::lround(distance(scene.sources.at(source_index), scene.mic) / kSpeedOfSound *
                     sample_rate);
}

namespace {

constexpr int kHalfTaps = kSincTaps / 2;

void add_tap(std::vector<double>& h, double delay, double amplitude, bool fractional) {
  const long n_samples = static_cast<long>(h.size());
  if (!fractional) {
    const long n = std::lround(delay);
    if (n >= 0 && n < n_samples) h[n] += amplitude;
    return;
  }
  // Hann-windowed sinc centred on `delay`. sin(pi t) only flips sign from tap
  // to tap, and the window cosine advances by a fixed rotation.
  const long first = static_cast<long>(std::floor(delay)) - kHalfTaps;
  const double t0 = static_cast<double>(first) - delay;
  const double s0 = std::sin(std::numbers::pi * t0);
  const double step = 2.0 * std::numbers::pi / kSincTaps;
  std::complex<double> phase = std::polar(1.0, step * t0);
  const std::complex<double> rotate = std::polar(1.0, step);
  double sign = 1.0;
  for (long i = 0; i < kSincTaps; ++i, phase *= rotate, sign = -sign) {
    const long n = first + i;
    if (n < 0 || n >= n_samples) continue;
    const double t = t0 + static_cast<double>(i);
    const double window = 0.5 * (1.0 + phase.real());
    const double sinc = std::abs(t) < 1e-9 ? 1.0 : sign * s0 / (std::numbers::pi * t);
    h[n] += amplitude * window * sinc;
  }
}

void high_pass_in_place(std::vector<double>& h, double sample_rate) {
  const double w = 2.0 * std::numbers::pi * 100.0 / sample_rate;
  const double r1 = std::exp(-w);
  const double b1 = 2.0 * r1 * std::cos(w);
  const double b2 = -r1 * r1;
  const double a1 = -(1.0 + r1);
  double y1 = 0.0, y2 = 0.0;
  for (double& x : h) {
    const double y0 = b1 * y1 + b2 * y2 + x;
    x = y0 + a1 * y1 + r1 * y2;
    y2 = y1;
    y1 = y0;
  }
}

struct ImageLattice {
  int nx, ny, nz;
  double max_dist;
};

ImageLattice lattice_for(const Vec3& room, double max_dist) {
  return {static_cast<int>(std::ceil(max_dist / (2.0 * room.x))) + 1,
          static_cast<int>(std::ceil(max_dist / (2.0 * room.y))) + 1,
          static_cast<int>(std::ceil(max_dist / (2.0 * room.z))) + 1, max_dist};
}

// Visits every image source of one x-lattice index within max_dist of the
// microphone as visit(distance, reflection_count).
template <typename Visit>
void visit_images(const SceneSpec& scene, const Vec3& src, const ImageLattice& lat, int mx,
                  Visit&& visit) {
  const Vec3& room = scene.room;
  const Vec3& mic = scene.mic;
  const double limit2 = lat.max_dist * lat.max_dist;
  for (int qx = 0; qx <= 1; ++qx) {
    const double dx = (1 - 2 * qx) * src.x + 2.0 * mx * room.x - mic.x;
    const int rx = std::abs(mx - qx) + std::abs(mx);
    for (int my = -lat.ny; my <= lat.ny; ++my) {
      for (int qy = 0; qy <= 1; ++qy) {
        const double dy = (1 - 2 * qy) * src.y + 2.0 * my * room.y - mic.y;
        const int ry = std::abs(my - qy) + std::abs(my);
        const double dxy2 = dx * dx + dy * dy;
        if (dxy2 > limit2) continue;
        for (int mz = -lat.nz; mz <= lat.nz; ++mz) {
          for (int qz = 0; qz <= 1; ++qz) {
            const double dz = (1 - 2 * qz) * src.z + 2.0 * mz * room.z - mic.z;
            const double d2 = dxy2 + dz * dz;
            if (d2 > limit2) continue;
            visit(std::sqrt(d2), rx + ry + std::abs(mz - qz) + std::abs(mz));
          }
        }
      }
    }
  }
}

long rir_length(const SceneSpec& scene, int source_index, double sample_rate,
                const RirOptions& options, bool reflections) {
  const double direct_delay =
      distance(scene.sources[source_index], scene.mic) / kSpeedOfSound * sample_rate;
  long n = static_cast<long>(std::ceil(direct_delay)) + kHalfTaps + 2;
  if (reflections) {
    n = std::max(n, static_cast<long>(std::ceil(options.time_limit_factor * scene.t60 * sample_rate)));
  }
  return n;
}

// Schroeder fit over a binned energy envelope; mirrors estimate_t60.
double envelope_t60(const std::vector<double>& energy, double bin_seconds) {
  std::vector<double> edc(energy.size() + 1, 0.0);
  for (std::size_t i = energy.size(); i-- > 0;) edc[i] = edc[i + 1] + energy[i];
  if (edc[0] <= 0.0) return 0.0;
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < energy.size(); ++i) {
    if (edc[i] <= 0.0) break;
    const double db = 10.0 * std::log10(edc[i] / edc[0]);
    if (db < -25.0) break;
    if (db <= -5.0) {
      const double t = (static_cast<double>(i) + 0.5) * bin_seconds;
      st += t;
      sy += db;
      stt += t * t;
      sty += t * db;
      ++count;
    }
  }
  if (count < 2) return 0.0;
  const double cn = static_cast<double>(count);
  const double slope = (cn * sty - st * sy) / (cn * stt - st * st);
  return slope < 0.0 ? -60.0 / slope : 1e9;
}

double calibrated_beta(const SceneSpec& scene, int source_index, double sample_rate,
                       long n_samples) {
  const Vec3& src = scene.sources[source_index];
  const double max_dist = static_cast<double>(n_samples) / sample_rate * kSpeedOfSound;
  const ImageLattice lat = lattice_for(scene.room, max_dist);
  const double bin_seconds = 1e-3;
  const int n_bins = static_cast<int>(std::ceil(n_samples / sample_rate / bin_seconds)) + 1;
  const int max_refl = 2 * (2 * lat.nx + 2 * lat.ny + 2 * lat.nz) + 6;

  // energy_by_order[bin][r]: summed 1/d^2 of images with r reflections.
  std::vector<double> by_order(static_cast<std::size_t>(n_bins) * (max_refl + 1), 0.0);
  int highest = 0;
  for (int mx = -lat.nx; mx <= lat.nx; ++mx) {
    visit_images(scene, src, lat, mx, [&](double d, int r) {
      const int bin = std::min(n_bins - 1, static_cast<int>(d / kSpeedOfSound / bin_seconds));
      by_order[static_cast<std::size_t>(bin) * (max_refl + 1) + r] += 1.0 / (d * d);
      highest = std::max(highest, r);
    });
  }

  std::vector<double> energy(n_bins);
  auto t60_for = [&](double beta) {
    const double b2 = beta * beta;
    for (int bin = 0; bin < n_bins; ++bin) {
      const double* row = &by_order[static_cast<std::size_t>(bin) * (max_refl + 1)];
      double acc = 0.0;
      for (int r = highest; r >= 0; --r) acc = acc * b2 + row[r];
      energy[bin] = acc;
    }
    return envelope_t60(energy, bin_seconds);
  };

  double lo = 0.0, hi = 1.0 - 1e-9;
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (t60_for(mid) < scene.t60 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double reflection_coefficient(const SceneSpec& scene, double sample_rate,
                              const RirOptions& options) {
  require(!scene.sources.empty(), "scene has no sources");
  if (!options.reflections || scene.t60 <= 0.0) return 0.0;
  const double alpha = sabine_absorption(scene.room, scene.t60);
  if (alpha > 1.0) {
    fail(ErrorKind::kInvalidScene, "T60 too short for this room (Sabine absorption > 1)");
  }
  if (options.absorption == AbsorptionModel::kSabine) {
    return std::clamp(std::sqrt(1.0 - alpha), 0.0, std::nextafter(1.0, 0.0));
  }
  const long n_samples = rir_length(scene, 0, sample_rate, options, true);
  return calibrated_beta(scene, 0, sample_rate, n_samples);
}

AudioBuffer generate_rir(const SceneSpec& scene, int source_index, double sample_rate,
                         const RirOptions& options) {
  require(sample_rate > 0.0, "sample rate must be positive");
  require(source_index >= 0 && source_index < static_cast<int>(scene.sources.size()),
          "source index out of range");
  require(scene.t60 >= 0.0, "t60 must be non-negative");
  for (const auto& p : scene.sources) {
    require(strictly_inside(p, scene.room), "source outside the room");
  }
  require(strictly_inside(scene.mic, scene.room), "microphone outside the room");
  const Vec3& src = scene.sources[source_index];

  const bool reflections = options.reflections && scene.t60 > 0.0;
  const long n_samples = rir_length(scene, source_index, sample_rate, options, reflections);
  AudioBuffer rir(static_cast<std::size_t>(n_samples), sample_rate);
  const double gain = 1.0 / (4.0 * std::numbers::pi);

  if (!reflections) {
    const double d = distance(src, scene.mic);
    add_tap(rir.samples, d / kSpeedOfSound * sample_rate, gain / d, options.fractional_delay);
    return rir;
  }

  double beta = 0.0;
  {
    const double alpha = sabine_absorption(scene.room, scene.t60);
    if (alpha > 1.0) {
      fail(ErrorKind::kInvalidScene, "T60 too short for this room (Sabine absorption > 1)");
    }
    beta = options.absorption == AbsorptionModel::kSabine
               ? std::clamp(std::sqrt(1.0 - alpha), 0.0, std::nextafter(1.0, 0.0))
               : calibrated_beta(scene, source_index, sample_rate, n_samples);
  }

  const double max_dist = static_cast<double>(n_samples) / sample_rate * kSpeedOfSound;
  const ImageLattice lat = lattice_for(scene.room, max_dist);

  // One partial response per x-lattice index, summed in index order so the
  // result does not depend on the thread count.
  const int slices = 2 * lat.nx + 1;
  std::vector<std::vector<double>> partial(slices);
  ExceptionSlot errors;
#pragma omp parallel for schedule(dynamic)
  for (int ix = 0; ix < slices; ++ix) {
    errors.run([&] {
      std::vector<double> h(static_cast<std::size_t>(n_samples), 0.0);
      visit_images(scene, src, lat, ix - lat.nx, [&](double d, int r) {
        const double amp = std::pow(beta, r) * gain / d;
        if (amp != 0.0) add_tap(h, d / kSpeedOfSound * sample_rate, amp, options.fractional_delay);
      });
      partial[ix] = std::move(h);
    });
  }
  errors.rethrow();
  for (const auto& h : partial) {
    for (long n = 0; n < n_samples; ++n) rir.samples[n] += h[n];
  }
  if (options.high_pass) high_pass_in_place(rir.samples, sample_rate);
  return rir;
}

AudioBuffer convolve(const AudioBuffer& signal, const AudioBuffer& rir) {
  require(signal.sample_rate == rir.sample_rate, "signal and RIR sample rates differ");
  require(!rir.empty(), "empty RIR");
  const std::size_t n = signal.size();
  const std::size_t m = rir.size();
  AudioBuffer out(n, signal.sample_rate);
  if (n == 0) return out;

  if (static_cast<double>(n) * static_cast<double>(std::min(n, m)) < 4.0e6) {
    for (std::size_t t = 0; t < n; ++t) {
      double acc = 0.0;
      const std::size_t jmax = std::min(t, m - 1);
      for (std::size_t j = 0; j <= jmax; ++j) acc += rir.samples[j] * signal.samples[t - j];
      out.samples[t] = acc;
    }
    return out;
  }

  const std::size_t taps = std::min(m, n);
  int size = 1;
  while (static_cast<std::size_t>(size) < n + taps - 1) size <<= 1;
  const Fft fft(size);
  std::vector<std::complex<double>> a(size), b(size);
  for (std::size_t i = 0; i < n; ++i) a[i] = signal.samples[i];
  for (std::size_t i = 0; i < taps; ++i) b[i] = rir.samples[i];
  fft.forward(a);
  fft.forward(b);
  for (int i = 0; i < size; ++i) a[i] *= b[i];
  fft.inverse(a);
  for (std::size_t t = 0; t < n; ++t) out.samples[t] = a[t].real();
  return out;
}

double estimate_t60(const AudioBuffer& rir) {
  require(rir.sample_rate > 0.0, "sample rate must be positive");
  const std::size_t n = rir.size();
  std::vector<double> edc(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) edc[i] = edc[i + 1] + rir.samples[i] * rir.samples[i];
  if (edc[0] <= 0.0) fail(ErrorKind::kEstimationFailure, "impulse response has no energy");

  // Least-squares line through the decay curve between -5 and -25 dB.
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  std::size_t count = 0;
  bool reached_end = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double db = edc[i] > 0.0 ? 10.0 * std::log10(edc[i] / edc[0]) : -1e9;
    if (db < -25.0) {
      reached_end = true;
      break;
    }
    if (db <= -5.0) {
      const double t = static_cast<double>(i) / rir.sample_rate;
      st += t;
      sy += db;
      stt += t * t;
      sty += t * db;
      ++count;
    }
  }
  if (!reached_end || count < 3) {
    fail(ErrorKind::kEstimationFailure, "decay curve does not span -5 to -25 dB");
  }
  const double cn = static_cast<double>(count);
  const double denom = cn * stt - st * st;
  const double slope = denom != 0.0 ? (cn * sty - st * sy) / denom : 0.0;
  if (!(slope < 0.0)) fail(ErrorKind::kEstimationFailure, "decay curve has no negative slope");
  return -60.0 / slope;
}

}  // namespace spx
