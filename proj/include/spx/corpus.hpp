#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spx/audio.hpp"
#include "spx/room.hpp"

namespace spx {

constexpr double kProcessingRate = 8000.0;

/// How a WAV path below the corpus root maps to a speaker id.
enum class LayoutRule {
  /// First directory component below the root (LibriSpeech style
  /// root/<speaker>/<chapter>/<utt>.wav).
  kTopDirectory,
  /// Filename text before the first '_' or '-' (flat directories).
  kFilenamePrefix,
};

struct CorpusIndex {
  std::filesystem::path root;
  std::map<std::string, std::vector<std::filesystem::path>> speakers;
  /// Optional 'f' / 'm' per speaker. Used for balanced draws when every
  /// speaker has an entry.
  std::map<std::string, char> genders;
  double sample_rate = kProcessingRate;

  std::size_t utterance_count() const;
  bool operator==(const CorpusIndex&) const = default;
};

struct ScanStats {
  int skipped_files = 0;
  int dropped_speakers = 0;
};

/// Indexes every decodable mono WAV below `root` (sorted, so re-scans are
/// identical). Speakers with fewer than two utterances are dropped because
/// they cannot supply both a mixed and a reference utterance.
CorpusIndex scan_corpus(const std::filesystem::path& root, LayoutRule rule,
                        ScanStats* stats = nullptr);

/// Speaker-disjoint train/valid/test split. valid and test get
/// max(1, floor(n * fraction)) speakers; the remainder goes to train.
std::array<CorpusIndex, 3> split_speakers(const CorpusIndex& index,
                                          std::array<double, 3> fractions = {0.8, 0.1, 0.1},
                                          std::uint64_t seed = 0);

/// Loads utterances resampled to the processing rate, caching by path.
class CorpusReader {
 public:
  explicit CorpusReader(CorpusIndex index);
  const CorpusIndex& index() const { return index_; }
  const AudioBuffer& load(const std::filesystem::path& path);

 private:
  CorpusIndex index_;
  std::map<std::filesystem::path, AudioBuffer> cache_;
};

/// Tile-and-truncate to exactly `target_len` samples.
AudioBuffer fit_reference(const AudioBuffer& ref, std::size_t target_len);

/// One two-speaker sample. Signal values are float32-representable so the
/// in-memory example and its WAV files hold identical numbers.
struct MixtureExample {
  AudioBuffer mixture;
  AudioBuffer target_1, target_2;
  AudioBuffer reference_1, reference_2;
  std::optional<AudioBuffer> noise;
  std::optional<SceneSpec> scene;
  std::optional<double> snr_db;
  std::string speaker_1, speaker_2;
  std::string utterance_1, utterance_2;
  std::string reference_utterance_1, reference_utterance_2;
  std::uint64_t seed = 0;

  std::size_t size() const { return mixture.size(); }
};

struct DurationRange {
  double min_s = 2.0;
  double max_s = 8.0;
  double sample(std::mt19937_64& rng) const;
  bool operator==(const DurationRange&) const = default;
};

struct CleanMixOptions {
  DurationRange duration_range;
  /// Fixed per batch. Unset keeps the utterances untruncated (test mode):
  /// the shorter source is zero-padded to the longer one.
  std::optional<double> batch_duration_s;
  /// Optional uniform dB jitter applied to speaker 2; {0, 0} disables it.
  std::array<double, 2> sir_jitter_db{0.0, 0.0};
};

MixtureExample draw_clean_example(std::mt19937_64& rng, CorpusReader& corpus,
                                  const CleanMixOptions& options);

/// Noise material: either WAV files or a built-in babble synthesizer.
class NoiseSource {
 public:
  static NoiseSource from_corpus(CorpusIndex index);
  static NoiseSource synthetic_babble();

  /// A random noise segment of exactly `length` samples at the processing rate.
  AudioBuffer draw(std::mt19937_64& rng, std::size_t length);
  bool empty() const;

 private:
  std::shared_ptr<CorpusReader> reader_;
  std::vector<std::filesystem::path> files_;
};

enum class TargetKind { kImage, kDry };

struct NoisyMixOptions {
  SceneRanges scene_ranges;
  std::array<double, 2> snr_range_db{10.0, 25.0};
  TargetKind target = TargetKind::kImage;
  RirOptions rir;
};

/// Reverberates the dry sources of `clean` in one sampled scene, reverberates
/// each reference in its own independently sampled scene and adds noise at a
/// uniformly drawn SNR, where SNR = 10 log10(P(image_1 + image_2) / P(noise)).
MixtureExample make_noisy_example(std::mt19937_64& rng, const MixtureExample& clean,
                                  NoiseSource& noise, const NoisyMixOptions& options);

/// Rounds every sample to the nearest float32 value.
void quantize_to_float(AudioBuffer& audio);

// Synthetic speech-like material for self-contained experiments and tests.

struct SyntheticVoice {
  double f0_hz = 120.0;
  std::array<double, 3> formants_hz{500.0, 1500.0, 2500.0};
};

SyntheticVoice random_voice(std::mt19937_64& rng);

/// Voiced syllables with a wandering pitch contour and vowel-dependent
/// formant envelope, RMS-normalized to 0.05.
AudioBuffer synthesize_utterance(std::mt19937_64& rng, const SyntheticVoice& voice,
                                 double duration_s, double sample_rate = kProcessingRate);

AudioBuffer synthesize_babble(std::mt19937_64& rng, double duration_s,
                              double sample_rate = kProcessingRate);

/// Writes root/spkNN/uttMM.wav for n_speakers x n_utterances utterances and
/// returns the corresponding index.
CorpusIndex make_synthetic_corpus(const std::filesystem::path& root, int n_speakers,
                                  int n_utterances, DurationRange durations, std::uint64_t seed);

}  // namespace spx
