#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "spx/corpus.hpp"
#include "spx/error.hpp"
#include "spx/manifest.hpp"

using namespace spx;
namespace fs = std::filesystem;

namespace {

CorpusIndex small_corpus(const std::string& name) {
  return make_synthetic_corpus(test::temp_dir(name), 5, 3, {1.0, 2.0}, 9);
}

}  // namespace

TEST_CASE("scan_corpus indexes speakers and drops singletons") {
  const auto dir = test::temp_dir("scan");
  std::mt19937_64 rng(1);
  auto put = [&](const std::string& rel) {
    fs::create_directories((dir / rel).parent_path());
    write_wav(dir / rel, test::noise(rng, 800, 0.1), WavEncoding::kPcm16);
  };
  put("A/1.wav");
  put("A/2.wav");
  put("A/3.wav");
  put("B/1.wav");
  put("B/2.wav");
  put("C/only.wav");
  std::ofstream(dir / "A" / "junk.wav") << "not a wav";
  ScanStats stats;
  const auto idx = scan_corpus(dir, LayoutRule::kTopDirectory, &stats);
  CHECK(idx.speakers.size() == 2);
  CHECK(idx.utterance_count() == 5);
  CHECK(stats.skipped_files == 1);
  CHECK(stats.dropped_speakers == 1);
  CHECK(scan_corpus(dir, LayoutRule::kTopDirectory) == idx);
}

TEST_CASE("empty corpus is an error") {
  const auto dir = test::temp_dir("empty");
  try {
    scan_corpus(dir, LayoutRule::kTopDirectory);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEmptyCorpus);
  }
}

TEST_CASE("speaker splits") {
  CorpusIndex idx;
  for (int i = 0; i < 10; ++i) idx.speakers["s" + std::to_string(i)] = {"a.wav", "b.wav"};
  const auto s = split_speakers(idx, {0.8, 0.1, 0.1}, 3);
  CHECK(s[0].speakers.size() == 8);
  CHECK(s[1].speakers.size() == 1);
  CHECK(s[2].speakers.size() == 1);
  for (const auto& [id, _] : s[1].speakers) CHECK(s[0].speakers.count(id) == 0);
  CHECK(split_speakers(idx, {0.8, 0.1, 0.1}, 3)[1] == s[1]);

  CorpusIndex three;
  for (int i = 0; i < 3; ++i) three.speakers["s" + std::to_string(i)] = {"a.wav", "b.wav"};
  const auto t = split_speakers(three, {0.8, 0.1, 0.1}, 0);
  CHECK(t[0].speakers.size() == 1);
  CHECK(t[1].speakers.size() == 1);
  CHECK(t[2].speakers.size() == 1);

  CorpusIndex two;
  two.speakers = {{"a", {"x", "y"}}, {"b", {"x", "y"}}};
  CHECK_THROWS_AS(split_speakers(two), Error);
}

TEST_CASE("fit_reference tiles and truncates") {
  const AudioBuffer r({1.0, 2.0, 3.0}, 8000);
  CHECK(fit_reference(r, 7).samples == std::vector<double>{1, 2, 3, 1, 2, 3, 1});
  CHECK(fit_reference(r, 2).samples == std::vector<double>{1, 2});
  CHECK(fit_reference(r, 3) == r);
}

TEST_CASE("clean examples: exact sum, fixed duration, reproducible") {
  CorpusReader reader(small_corpus("clean"));
  CleanMixOptions o;
  o.duration_range = {1.0, 2.0};
  o.batch_duration_s = 1.5;
  std::mt19937_64 a(5), b(5);
  const auto ex = draw_clean_example(a, reader, o);
  CHECK(ex.size() == 12000);
  CHECK(ex.target_1.size() == 12000);
  CHECK(ex.reference_2.size() == 12000);
  CHECK(ex.speaker_1 != ex.speaker_2);
  CHECK(ex.reference_utterance_1 != ex.utterance_1);
  CHECK(ex.reference_utterance_2 != ex.utterance_2);
  for (std::size_t i = 0; i < ex.size(); ++i)
    CHECK(ex.mixture.samples[i] == static_cast<double>(static_cast<float>(ex.target_1.samples[i]) +
                                                       static_cast<float>(ex.target_2.samples[i])));
  const auto again = draw_clean_example(b, reader, o);
  CHECK(again.mixture == ex.mixture);
  CHECK(again.reference_1 == ex.reference_1);
}

TEST_CASE("noisy examples: SNR and additive identity") {
  CorpusReader reader(small_corpus("noisy"));
  auto noise = NoiseSource::synthetic_babble();
  std::mt19937_64 rng(11);
  CleanMixOptions co;
  co.duration_range = {1.0, 2.0};
  co.batch_duration_s = 1.0;
  NoisyMixOptions no;
  no.scene_ranges.t60 = {0.2, 0.5};
  for (int i = 0; i < 5; ++i) {
    const auto clean = draw_clean_example(rng, reader, co);
    const auto ex = make_noisy_example(rng, clean, noise, no);
    REQUIRE(ex.snr_db.has_value());
    REQUIRE(ex.noise.has_value());
    REQUIRE(ex.scene.has_value());
    CHECK(*ex.snr_db >= 10.0);
    CHECK(*ex.snr_db <= 25.0);
    std::vector<double> speech(ex.size());
    double max_dev = 0.0;
    for (std::size_t n = 0; n < ex.size(); ++n) {
      speech[n] = ex.target_1.samples[n] + ex.target_2.samples[n];
      max_dev = std::max(max_dev, std::abs(ex.mixture.samples[n] - speech[n] - ex.noise->samples[n]));
    }
    CHECK(max_dev < 1e-6);
    const double snr = 10.0 * std::log10(power(speech) / power(ex.noise->samples));
    CHECK(std::abs(snr - *ex.snr_db) < 0.1);
  }
}

TEST_CASE("noisy example without reflections holds delayed, attenuated sources") {
  CorpusReader reader(small_corpus("dry"));
  auto noise = NoiseSource::synthetic_babble();
  std::mt19937_64 rng(2);
  CleanMixOptions co;
  co.duration_range = {1.0, 2.0};
  co.batch_duration_s = 1.0;
  const auto clean = draw_clean_example(rng, reader, co);
  NoisyMixOptions no;
  no.rir.reflections = false;
  no.rir.fractional_delay = false;
  const auto ex = make_noisy_example(rng, clean, noise, no);
  const long tap = direct_path_tap(*ex.scene, 0, 8000.0);
  const double gain = 1.0 / (4.0 * M_PI * distance(ex.scene->sources[0], ex.scene->mic));
  for (std::size_t n = static_cast<std::size_t>(tap); n < ex.size(); n += 97)
    CHECK(ex.target_1.samples[n] ==
          doctest::Approx(gain * clean.target_1.samples[n - tap]).epsilon(1e-6).scale(1e-6));
}

TEST_CASE("manifest round trip, integrity and version errors") {
  CorpusReader reader(small_corpus("manifest_src"));
  ManifestHeader h;
  h.seed = 4;
  h.duration_range = {1.0, 1.5};
  const auto examples = synthesize_examples(reader, nullptr, h, 3);
  const auto dir = test::temp_dir("manifest");
  const auto written = write_manifest(dir, h, examples);
  const auto read = read_manifest(dir);
  CHECK(read == written);
  CHECK(read.size() == 3);
  const auto ex = load_example(read, 1);
  CHECK(ex.mixture == examples[1].mixture);
  CHECK(ex.target_2 == examples[1].target_2);

  // Regenerating from the stored seed reproduces the records.
  const auto again = synthesize_examples(reader, nullptr, read.header, 3);
  CHECK(again[2].mixture == examples[2].mixture);

  const auto empty_dir = test::temp_dir("manifest_empty");
  write_manifest(empty_dir, h, {});
  CHECK(read_manifest(empty_dir).size() == 0);

  fs::remove(dir / read.records[0].target_1);
  try {
    read_manifest(dir);
    FAIL("expected integrity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kManifestIntegrity);
  }

  const auto vdir = test::temp_dir("manifest_version");
  write_manifest(vdir, h, {});
  {
    std::ifstream is(vdir / kManifestFileName);
    std::string text((std::istreambuf_iterator<char>(is)), {});
    const auto pos = text.find("\"format_version\":1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 18, "\"format_version\":0");
    std::ofstream(vdir / kManifestFileName) << text;
  }
  try {
    read_manifest(vdir);
    FAIL("expected version error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnsupportedVersion);
  }
}
