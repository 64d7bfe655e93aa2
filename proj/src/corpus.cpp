#include "spx/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

#include "spx/error.hpp"
#include "spx/resample.hpp"

namespace spx {

namespace fs = std::filesystem;

std::size_t CorpusIndex::utterance_count() const {
  std::size_t n = 0;
  for (const auto& [id, utts] : speakers) n += utts.size();
  return n;
}

namespace {

std::string speaker_of(const fs::path& root, const fs::path& file, LayoutRule rule) {
  if (rule == LayoutRule::kTopDirectory) {
    const fs::path rel = fs::relative(file, root);
    auto it = rel.begin();
    if (std::next(it) == rel.end()) return {};
    return it->string();
  }
  const std::string name = file.stem().string();
  const auto cut = name.find_first_of("_-");
  return cut == std::string::npos ? name : name.substr(0, cut);
}

}  // namespace

CorpusIndex scan_corpus(const fs::path& root, LayoutRule rule, ScanStats* stats) {
  if (!fs::is_directory(root)) fail(ErrorKind::kIo, "corpus directory not found: " + root.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  ScanStats local;
  CorpusIndex index;
  index.root = root;
  for (const auto& file : files) {
    const std::string speaker = speaker_of(root, file, rule);
    bool ok = !speaker.empty();
    if (ok) {
      try {
        ok = !read_wav(file).empty();
      } catch (const Error&) {
        ok = false;
      }
    }
    if (!ok) {
      ++local.skipped_files;
      continue;
    }
    index.speakers[speaker].push_back(file);
  }
  for (auto it = index.speakers.begin(); it != index.speakers.end();) {
    if (it->second.size() < 2) {
      ++local.dropped_speakers;
      it = index.speakers.erase(it);
    } else {
      ++it;
    }
  }
  if (local.skipped_files > 0) {
    std::cerr << "warning: skipped " << local.skipped_files << " undecodable file(s) under "
              << root.string() << "\n";
  }
  if (stats) *stats = local;
  if (index.speakers.empty()) fail(ErrorKind::kEmptyCorpus, "no usable speakers under " + root.string());
  return index;
}

std::array<CorpusIndex, 3> split_speakers(const CorpusIndex& index, std::array<double, 3> fractions,
                                          std::uint64_t seed) {
  const int n = static_cast<int>(index.speakers.size());
  require(n >= 3, "need at least three speakers for a train/valid/test split");
  require(fractions[0] >= 0 && fractions[1] >= 0 && fractions[2] >= 0, "negative split fraction");
  std::vector<std::string> ids;
  for (const auto& [id, utts] : index.speakers) ids.push_back(id);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  const int n_valid = std::max(1, static_cast<int>(std::floor(n * fractions[1])));
  const int n_test = std::max(1, static_cast<int>(std::floor(n * fractions[2])));
  const int n_train = n - n_valid - n_test;
  require(n_train >= 1, "split leaves no training speakers");

  std::array<CorpusIndex, 3> out;
  for (auto& part : out) {
    part.root = index.root;
    part.sample_rate = index.sample_rate;
  }
  for (int i = 0; i < n; ++i) {
    const int which = i < n_train ? 0 : (i < n_train + n_valid ? 1 : 2);
    out[which].speakers[ids[i]] = index.speakers.at(ids[i]);
    if (auto g = index.genders.find(ids[i]); g != index.genders.end()) {
      out[which].genders[ids[i]] = g->second;
    }
  }
  return out;
}

CorpusReader::CorpusReader(CorpusIndex index) : index_(std::move(index)) {}

const AudioBuffer& CorpusReader::load(const fs::path& path) {
  auto it = cache_.find(path);
  if (it == cache_.end()) {
    AudioBuffer audio = resample(read_wav(path), index_.sample_rate);
    it = cache_.emplace(path, std::move(audio)).first;
  }
  return it->second;
}

AudioBuffer fit_reference(const AudioBuffer& ref, std::size_t target_len) {
  require(!ref.empty(), "reference is empty");
  AudioBuffer out(target_len, ref.sample_rate);
  for (std::size_t i = 0; i < target_len; ++i) out.samples[i] = ref.samples[i % ref.size()];
  return out;
}

void quantize_to_float(AudioBuffer& audio) {
  for (double& v : audio.samples) v = static_cast<float>(v);
}

double DurationRange::sample(std::mt19937_64& rng) const {
  require(min_s > 0.0 && min_s <= max_s, "invalid duration range");
  if (min_s == max_s) return min_s;
  return std::uniform_real_distribution<double>(min_s, max_s)(rng);
}

namespace {

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& items) {
  std::uniform_int_distribution<std::size_t> dist(0, items.size() - 1);
  return items[dist(rng)];
}

std::vector<std::string> candidate_speakers(std::mt19937_64& rng, const CorpusIndex& index) {
  std::vector<std::string> all;
  for (const auto& [id, utts] : index.speakers) all.push_back(id);
  const bool balanced = !index.genders.empty() && index.genders.size() == index.speakers.size();
  if (!balanced) return all;
  std::vector<std::string> female, male;
  for (const auto& id : all) (index.genders.at(id) == 'f' ? female : male).push_back(id);
  if (female.empty() || male.empty()) return all;
  return std::bernoulli_distribution(0.5)(rng) ? female : male;
}

// Crops to `length` at a random offset, or zero-pads when shorter.
AudioBuffer crop_or_pad(std::mt19937_64& rng, const AudioBuffer& in, std::size_t length) {
  AudioBuffer out(length, in.sample_rate);
  if (in.size() >= length) {
    std::uniform_int_distribution<std::size_t> offset(0, in.size() - length);
    const std::size_t start = offset(rng);
    std::copy_n(in.samples.begin() + static_cast<long>(start), length, out.samples.begin());
  } else {
    std::copy(in.samples.begin(), in.samples.end(), out.samples.begin());
  }
  return out;
}

struct SpeakerDraw {
  std::string speaker;
  fs::path mix_utt;
  fs::path ref_utt;
};

SpeakerDraw draw_speaker(std::mt19937_64& rng, const CorpusIndex& index, const std::string& exclude) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const auto candidates = candidate_speakers(rng, index);
    const std::string& speaker = pick(rng, candidates);
    if (speaker == exclude) continue;
    const auto& utts = index.speakers.at(speaker);
    if (utts.size() < 2) continue;
    std::uniform_int_distribution<std::size_t> d(0, utts.size() - 1);
    const std::size_t m = d(rng);
    std::size_t r = d(rng);
    if (r == m) r = (m + 1 + std::uniform_int_distribution<std::size_t>(0, utts.size() - 2)(rng)) % utts.size();
    return {speaker, utts[m], utts[r]};
  }
  fail(ErrorKind::kSamplingFailure, "could not draw a speaker with two utterances");
}

std::string utterance_id(const CorpusIndex& index, const fs::path& p) {
  return fs::relative(p, index.root).generic_string();
}

}  // namespace

MixtureExample draw_clean_example(std::mt19937_64& rng, CorpusReader& corpus,
                                  const CleanMixOptions& options) {
  const CorpusIndex& index = corpus.index();
  require(index.speakers.size() >= 2, "need at least two speakers to mix");
  if (options.batch_duration_s) {
    const double d = *options.batch_duration_s;
    require(d >= options.duration_range.min_s - 1e-12 && d <= options.duration_range.max_s + 1e-12,
            "batch duration outside the duration range");
  }

  const SpeakerDraw a = draw_speaker(rng, index, "");
  const SpeakerDraw b = draw_speaker(rng, index, a.speaker);
  const AudioBuffer& src_a = corpus.load(a.mix_utt);
  const AudioBuffer& src_b = corpus.load(b.mix_utt);

  const std::size_t length =
      options.batch_duration_s
          ? static_cast<std::size_t>(std::llround(*options.batch_duration_s * index.sample_rate))
          : std::max(src_a.size(), src_b.size());

  MixtureExample ex;
  ex.target_1 = crop_or_pad(rng, src_a, length);
  ex.target_2 = crop_or_pad(rng, src_b, length);
  if (options.sir_jitter_db[0] != 0.0 || options.sir_jitter_db[1] != 0.0) {
    const double db = UniformRange{options.sir_jitter_db[0], options.sir_jitter_db[1]}.sample(rng);
    const double gain = std::pow(10.0, -db / 20.0);
    for (double& v : ex.target_2.samples) v *= gain;
  }
  ex.reference_1 = fit_reference(corpus.load(a.ref_utt), length);
  ex.reference_2 = fit_reference(corpus.load(b.ref_utt), length);
  for (auto* sig : {&ex.target_1, &ex.target_2, &ex.reference_1, &ex.reference_2}) {
    quantize_to_float(*sig);
  }
  ex.mixture = AudioBuffer(length, index.sample_rate);
  for (std::size_t i = 0; i < length; ++i) {
    ex.mixture.samples[i] =
        static_cast<float>(ex.target_1.samples[i]) + static_cast<float>(ex.target_2.samples[i]);
  }
  ex.speaker_1 = a.speaker;
  ex.speaker_2 = b.speaker;
  ex.utterance_1 = utterance_id(index, a.mix_utt);
  ex.utterance_2 = utterance_id(index, b.mix_utt);
  ex.reference_utterance_1 = utterance_id(index, a.ref_utt);
  ex.reference_utterance_2 = utterance_id(index, b.ref_utt);
  return ex;
}

NoiseSource NoiseSource::from_corpus(CorpusIndex index) {
  NoiseSource src;
  for (const auto& [id, utts] : index.speakers) {
    src.files_.insert(src.files_.end(), utts.begin(), utts.end());
  }
  std::sort(src.files_.begin(), src.files_.end());
  src.reader_ = std::make_shared<CorpusReader>(std::move(index));
  return src;
}

NoiseSource NoiseSource::synthetic_babble() { return NoiseSource{}; }

bool NoiseSource::empty() const { return reader_ && files_.empty(); }

AudioBuffer NoiseSource::draw(std::mt19937_64& rng, std::size_t length) {
  require(length > 0, "noise length must be positive");
  if (!reader_) {
    AudioBuffer babble = synthesize_babble(rng, static_cast<double>(length) / kProcessingRate);
    babble.samples.resize(length, 0.0);
    return babble;
  }
  require(!files_.empty(), "noise corpus is empty");
  const AudioBuffer& src = reader_->load(pick(rng, files_));
  if (src.size() >= length) return crop_or_pad(rng, src, length);
  AudioBuffer out(length, src.sample_rate);
  const std::size_t rot = std::uniform_int_distribution<std::size_t>(0, src.size() - 1)(rng);
  for (std::size_t i = 0; i < length; ++i) out.samples[i] = src.samples[(i + rot) % src.size()];
  return out;
}

MixtureExample make_noisy_example(std::mt19937_64& rng, const MixtureExample& clean,
                                  NoiseSource& noise, const NoisyMixOptions& options) {
  require(!noise.empty(), "noise source is empty");
  require(options.snr_range_db[0] <= options.snr_range_db[1], "invalid SNR range");
  const std::size_t length = clean.size();
  const double fs = clean.mixture.sample_rate;

  auto sample_valid_scene = [&](int n_sources) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      SceneSpec scene = sample_scene(rng, options.scene_ranges, n_sources);
      if (scene.t60 <= 0.0 || sabine_absorption(scene.room, scene.t60) <= 1.0) return scene;
    }
    fail(ErrorKind::kInvalidScene, "scene ranges never produce a valid absorption");
  };

  MixtureExample ex = clean;
  ex.scene = sample_valid_scene(2);
  const AudioBuffer image_1 = convolve(clean.target_1, generate_rir(*ex.scene, 0, fs, options.rir));
  const AudioBuffer image_2 = convolve(clean.target_2, generate_rir(*ex.scene, 1, fs, options.rir));
  for (auto [ref, dry] : {std::pair{&ex.reference_1, &clean.reference_1},
                          std::pair{&ex.reference_2, &clean.reference_2}}) {
    const SceneSpec ref_scene = sample_valid_scene(1);
    *ref = convolve(*dry, generate_rir(ref_scene, 0, fs, options.rir));
    quantize_to_float(*ref);
  }

  AudioBuffer speech(length, fs);
  for (std::size_t i = 0; i < length; ++i) {
    speech.samples[i] = static_cast<float>(image_1.samples[i]) + static_cast<float>(image_2.samples[i]);
  }
  AudioBuffer n;
  for (int attempt = 0;; ++attempt) {
    n = noise.draw(rng, length);
    if (power(n.view()) > 0.0) break;
    if (attempt > 100) fail(ErrorKind::kSamplingFailure, "noise source only yields silence");
  }
  const double snr = UniformRange{options.snr_range_db[0], options.snr_range_db[1]}.sample(rng);
  const double scale = std::sqrt(power(speech.view()) / (power(n.view()) * std::pow(10.0, snr / 10.0)));
  for (double& v : n.samples) v *= scale;
  quantize_to_float(n);

  ex.snr_db = snr;
  ex.noise = n;
  if (options.target == TargetKind::kImage) {
    ex.target_1 = image_1;
    ex.target_2 = image_2;
    quantize_to_float(ex.target_1);
    quantize_to_float(ex.target_2);
  }
  ex.mixture = AudioBuffer(length, fs);
  for (std::size_t i = 0; i < length; ++i) {
    ex.mixture.samples[i] = static_cast<float>(speech.samples[i]) + static_cast<float>(n.samples[i]);
  }
  return ex;
}

SyntheticVoice random_voice(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SyntheticVoice v;
  v.f0_hz = 85.0 * std::pow(255.0 / 85.0, u(rng));
  v.formants_hz = {400.0 + 400.0 * u(rng), 1100.0 + 900.0 * u(rng), 2300.0 + 900.0 * u(rng)};
  return v;
}

AudioBuffer synthesize_utterance(std::mt19937_64& rng, const SyntheticVoice& voice,
                                 double duration_s, double sample_rate) {
  require(duration_s > 0.0 && sample_rate > 0.0, "invalid utterance duration or rate");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  AudioBuffer out(n, sample_rate);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> breath(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const double nyquist_guard = 0.475 * sample_rate;
  const double vibrato_rate = 4.0 + 2.0 * u(rng);
  constexpr std::array<double, 3> kFormantGain{1.0, 0.6, 0.3};
  constexpr std::array<double, 3> kBandwidth{90.0, 120.0, 160.0};

  std::size_t pos = static_cast<std::size_t>(u(rng) * 0.08 * sample_rate);
  double phase = 0.0;
  while (pos < n) {
    const auto len = static_cast<std::size_t>((0.12 + 0.23 * u(rng)) * sample_rate);
    const double pitch = voice.f0_hz * (0.88 + 0.24 * u(rng));
    const double glide = (u(rng) - 0.5) * 0.12;
    std::array<double, 3> formants = voice.formants_hz;
    formants[0] *= 0.8 + 0.45 * u(rng);
    formants[1] *= 0.8 + 0.45 * u(rng);
    for (std::size_t i = 0; i < len && pos + i < n; ++i) {
      const double frac = static_cast<double>(i) / static_cast<double>(len);
      const double t = static_cast<double>(pos + i) / sample_rate;
      const double f0 = pitch * (1.0 + glide * frac) * (1.0 + 0.03 * std::sin(two_pi * vibrato_rate * t));
      phase += two_pi * f0 / sample_rate;
      if (phase > two_pi * 1e4) phase = std::fmod(phase, two_pi);
      const double env = 0.5 - 0.5 * std::cos(two_pi * frac);
      double acc = 0.0;
      for (int h = 1; h * f0 < nyquist_guard; ++h) {
        const double f = h * f0;
        double amp = 0.02;
        for (int k = 0; k < 3; ++k) {
          const double z = (f - formants[k]) / kBandwidth[k];
          amp += kFormantGain[k] * std::exp(-0.5 * z * z);
        }
        acc += amp * std::sin(h * phase);
      }
      out.samples[pos + i] = env * acc + 0.01 * env * breath(rng);
    }
    pos += len + static_cast<std::size_t>((0.03 + 0.09 * u(rng)) * sample_rate);
  }
  const double rms = std::sqrt(power(out.view()));
  if (rms > 0.0) {
    for (double& v : out.samples) v *= 0.05 / rms;
  }
  return out;
}

AudioBuffer synthesize_babble(std::mt19937_64& rng, double duration_s, double sample_rate) {
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  AudioBuffer out(n, sample_rate);
  const int talkers = std::uniform_int_distribution<int>(4, 6)(rng);
  for (int k = 0; k < talkers; ++k) {
    const AudioBuffer talker = synthesize_utterance(rng, random_voice(rng), duration_s, sample_rate);
    for (std::size_t i = 0; i < n && i < talker.size(); ++i) out.samples[i] += talker.samples[i];
  }
  // Brownian-ish floor so the babble never goes silent.
  std::normal_distribution<double> white(0.0, 1.0);
  double lp = 0.0;
  for (double& v : out.samples) {
    lp = 0.95 * lp + 0.05 * white(rng);
    v += 0.02 * lp;
  }
  return out;
}

CorpusIndex make_synthetic_corpus(const fs::path& root, int n_speakers, int n_utterances,
                                  DurationRange durations, std::uint64_t seed) {
  require(n_speakers >= 1 && n_utterances >= 1, "synthetic corpus needs speakers and utterances");
  std::mt19937_64 rng(seed);
  CorpusIndex index;
  index.root = root;
  for (int s = 0; s < n_speakers; ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "spk%02d", s);
    const fs::path dir = root / name;
    fs::create_directories(dir);
    const SyntheticVoice voice = random_voice(rng);
    for (int u = 0; u < n_utterances; ++u) {
      char file[32];
      std::snprintf(file, sizeof(file), "utt%02d.wav", u);
      AudioBuffer utt = synthesize_utterance(rng, voice, durations.sample(rng));
      write_wav(dir / file, utt, WavEncoding::kFloat32);
      index.speakers[name].push_back(dir / file);
    }
  }
  return index;
}

}  // namespace spx
