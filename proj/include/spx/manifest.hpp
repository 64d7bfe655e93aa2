#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spx/corpus.hpp"

namespace spx {

enum class MixMode { kClean, kNoisy };

/// Dataset-level provenance stored in the first manifest line.
struct ManifestHeader {
  int format_version = 1;
  std::string split = "train";
  MixMode mode = MixMode::kClean;
  std::uint64_t seed = 0;
  DurationRange duration_range;
  bool truncated = true;
  SceneRanges scene_ranges;
  std::array<double, 2> snr_range_db{10.0, 25.0};
  TargetKind target = TargetKind::kImage;

  bool operator==(const ManifestHeader&) const = default;
};

/// One example: audio paths relative to the manifest directory plus metadata.
struct ManifestRecord {
  std::uint64_t seed = 0;
  std::size_t length = 0;
  std::string mixture, target_1, target_2, reference_1, reference_2;
  std::optional<std::string> noise;
  std::string speaker_1, speaker_2;
  std::string utterance_1, utterance_2;
  std::string reference_utterance_1, reference_utterance_2;
  std::optional<SceneSpec> scene;
  std::optional<double> snr_db;

  bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
  std::filesystem::path directory;
  ManifestHeader header;
  std::vector<ManifestRecord> records;

  std::size_t size() const { return records.size(); }
  bool operator==(const DatasetManifest& o) const {
    return header == o.header && records == o.records;
  }
};

inline constexpr const char* kManifestFileName = "manifest.jsonl";

/// Writes `examples` as float32 WAVs under dir/audio/ and the line-delimited
/// JSON manifest at dir/manifest.jsonl. Returns the manifest as written.
DatasetManifest write_manifest(const std::filesystem::path& dir, const ManifestHeader& header,
                               const std::vector<MixtureExample>& examples);

/// Accepts the manifest file or its directory. Every referenced WAV must
/// exist; otherwise kManifestIntegrity.
DatasetManifest read_manifest(const std::filesystem::path& path);

MixtureExample load_example(const DatasetManifest& manifest, std::size_t i);

/// Draws `count` examples as described by `header`. Example i uses its own
/// generator seeded with example_seed(header.seed, i). With header.truncated
/// each example gets a duration from header.duration_range; otherwise the
/// utterances keep their full length. `noise` is required in noisy mode.
std::vector<MixtureExample> synthesize_examples(CorpusReader& corpus, NoiseSource* noise,
                                                const ManifestHeader& header, std::size_t count,
                                                const RirOptions& rir = {});

std::string to_string(MixMode mode);
std::string to_string(TargetKind target);

/// Deterministic per-example seed derived from the dataset seed (splitmix64),
/// so shards can be synthesized independently.
std::uint64_t example_seed(std::uint64_t dataset_seed, std::uint64_t index);

}  // namespace spx
