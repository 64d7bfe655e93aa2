#include "spx/manifest.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "spx/error.hpp"

namespace spx {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(MixMode mode) { return mode == MixMode::kClean ? "clean" : "noisy"; }
std::string to_string(TargetKind target) { return target == TargetKind::kImage ? "image" : "dry"; }

std::uint64_t example_seed(std::uint64_t dataset_seed, std::uint64_t index) {
  std::uint64_t z = dataset_seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

json vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec3 vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
json range(const UniformRange& r) { return json::array({r.lo, r.hi}); }
UniformRange range(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json scene_json(const SceneSpec& s) {
  json sources = json::array();
  for (const auto& p : s.sources) sources.push_back(vec(p));
  return {{"room", vec(s.room)}, {"t60", s.t60}, {"mic", vec(s.mic)}, {"sources", sources}};
}

SceneSpec scene_from(const json& j) {
  SceneSpec s;
  s.room = vec(j.at("room"));
  s.t60 = j.at("t60").get<double>();
  s.mic = vec(j.at("mic"));
  for (const auto& p : j.at("sources")) s.sources.push_back(vec(p));
  return s;
}

json header_json(const ManifestHeader& h) {
  const SceneRanges& r = h.scene_ranges;
  return {{"kind", "header"},
          {"format_version", h.format_version},
          {"split", h.split},
          {"mode", to_string(h.mode)},
          {"seed", h.seed},
          {"duration_range", {h.duration_range.min_s, h.duration_range.max_s}},
          {"truncated", h.truncated},
          {"scene_ranges",
           {{"room_x", range(r.room_x)},
            {"room_y", range(r.room_y)},
            {"room_z", range(r.room_z)},
            {"t60", range(r.t60)},
            {"mic_offset", range(r.mic_offset)},
            {"mic_z", r.mic_z},
            {"source_angle_deg", range(r.source_angle_deg)},
            {"source_distance_base", r.source_distance_base},
            {"source_distance_offset", range(r.source_distance_offset)}}},
          {"snr_range_db", {h.snr_range_db[0], h.snr_range_db[1]}},
          {"target", to_string(h.target)}};
}

ManifestHeader header_from(const json& j) {
  ManifestHeader h;
  h.format_version = j.at("format_version").get<int>();
  if (h.format_version != 1) {
    fail(ErrorKind::kUnsupportedVersion,
         "manifest format version " + std::to_string(h.format_version) + " is not supported");
  }
  h.split = j.at("split").get<std::string>();
  h.mode = j.at("mode").get<std::string>() == "noisy" ? MixMode::kNoisy : MixMode::kClean;
  h.seed = j.at("seed").get<std::uint64_t>();
  h.duration_range = {j.at("duration_range").at(0).get<double>(),
                      j.at("duration_range").at(1).get<double>()};
  h.truncated = j.at("truncated").get<bool>();
  const json& r = j.at("scene_ranges");
  h.scene_ranges.room_x = range(r.at("room_x"));
  h.scene_ranges.room_y = range(r.at("room_y"));
  h.scene_ranges.room_z = range(r.at("room_z"));
  h.scene_ranges.t60 = range(r.at("t60"));
  h.scene_ranges.mic_offset = range(r.at("mic_offset"));
  h.scene_ranges.mic_z = r.at("mic_z").get<double>();
  h.scene_ranges.source_angle_deg = range(r.at("source_angle_deg"));
  h.scene_ranges.source_distance_base = r.at("source_distance_base").get<double>();
  h.scene_ranges.source_distance_offset = range(r.at("source_distance_offset"));
  h.snr_range_db = {j.at("snr_range_db").at(0).get<double>(), j.at("snr_range_db").at(1).get<double>()};
  h.target = j.at("target").get<std::string>() == "dry" ? TargetKind::kDry : TargetKind::kImage;
  return h;
}

json record_json(const ManifestRecord& r) {
  return {{"kind", "example"},
          {"seed", r.seed},
          {"length", r.length},
          {"mixture", r.mixture},
          {"target_1", r.target_1},
          {"target_2", r.target_2},
          {"reference_1", r.reference_1},
          {"reference_2", r.reference_2},
          {"noise", r.noise ? json(*r.noise) : json(nullptr)},
          {"speaker_1", r.speaker_1},
          {"speaker_2", r.speaker_2},
          {"utterance_1", r.utterance_1},
          {"utterance_2", r.utterance_2},
          {"reference_utterance_1", r.reference_utterance_1},
          {"reference_utterance_2", r.reference_utterance_2},
          {"scene", r.scene ? scene_json(*r.scene) : json(nullptr)},
          {"snr_db", r.snr_db ? json(*r.snr_db) : json(nullptr)}};
}

ManifestRecord record_from(const json& j) {
  ManifestRecord r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.length = j.at("length").get<std::size_t>();
  r.mixture = j.at("mixture").get<std::string>();
  r.target_1 = j.at("target_1").get<std::string>();
  r.target_2 = j.at("target_2").get<std::string>();
  r.reference_1 = j.at("reference_1").get<std::string>();
  r.reference_2 = j.at("reference_2").get<std::string>();
  if (!j.at("noise").is_null()) r.noise = j.at("noise").get<std::string>();
  r.speaker_1 = j.at("speaker_1").get<std::string>();
  r.speaker_2 = j.at("speaker_2").get<std::string>();
  r.utterance_1 = j.at("utterance_1").get<std::string>();
  r.utterance_2 = j.at("utterance_2").get<std::string>();
  r.reference_utterance_1 = j.at("reference_utterance_1").get<std::string>();
  r.reference_utterance_2 = j.at("reference_utterance_2").get<std::string>();
  if (!j.at("scene").is_null()) r.scene = scene_from(j.at("scene"));
  if (!j.at("snr_db").is_null()) r.snr_db = j.at("snr_db").get<double>();
  return r;
}

}  // namespace

DatasetManifest write_manifest(const fs::path& dir, const ManifestHeader& header,
                               const std::vector<MixtureExample>& examples) {
  fs::create_directories(dir / "audio");
  DatasetManifest manifest;
  manifest.directory = dir;
  manifest.header = header;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const MixtureExample& ex = examples[i];
    char stem[32];
    std::snprintf(stem, sizeof(stem), "audio/%06zu_", i);
    auto store = [&](const std::string& role, const AudioBuffer& audio) {
      const std::string rel = std::string(stem) + role + ".wav";
      write_wav(dir / rel, audio, WavEncoding::kFloat32);
      return rel;
    };
    ManifestRecord r;
    r.seed = ex.seed;
    r.length = ex.size();
    r.mixture = store("mixture", ex.mixture);
    r.target_1 = store("target1", ex.target_1);
    r.target_2 = store("target2", ex.target_2);
    r.reference_1 = store("reference1", ex.reference_1);
    r.reference_2 = store("reference2", ex.reference_2);
    if (ex.noise) r.noise = store("noise", *ex.noise);
    r.speaker_1 = ex.speaker_1;
    r.speaker_2 = ex.speaker_2;
    r.utterance_1 = ex.utterance_1;
    r.utterance_2 = ex.utterance_2;
    r.reference_utterance_1 = ex.reference_utterance_1;
    r.reference_utterance_2 = ex.reference_utterance_2;
    r.scene = ex.scene;
    r.snr_db = ex.snr_db;
    manifest.records.push_back(std::move(r));
  }

  std::ofstream out(dir / kManifestFileName, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write manifest in " + dir.string());
  out << header_json(header).dump() << "\n";
  for (const auto& r : manifest.records) out << record_json(r).dump() << "\n";
  if (!out) fail(ErrorKind::kIo, "short write of manifest in " + dir.string());
  return manifest;
}

DatasetManifest read_manifest(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / kManifestFileName : path;
  std::ifstream in(file);
  if (!in) fail(ErrorKind::kIo, "cannot open manifest " + file.string());
  DatasetManifest manifest;
  manifest.directory = file.parent_path();
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "header") {
        manifest.header = header_from(j);
        have_header = true;
      } else if (kind == "example") {
        manifest.records.push_back(record_from(j));
      } else {
        fail(ErrorKind::kManifestIntegrity, "unknown record kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kManifestIntegrity,
         file.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) fail(ErrorKind::kManifestIntegrity, file.string() + ": missing header line");
  for (const auto& r : manifest.records) {
    for (const std::string* rel : {&r.mixture, &r.target_1, &r.target_2, &r.reference_1, &r.reference_2}) {
      if (!fs::is_regular_file(manifest.directory / *rel)) {
        fail(ErrorKind::kManifestIntegrity, "missing audio file " + (manifest.directory / *rel).string());
      }
    }
    if (r.noise && !fs::is_regular_file(manifest.directory / *r.noise)) {
      fail(ErrorKind::kManifestIntegrity, "missing audio file " + (manifest.directory / *r.noise).string());
    }
  }
  return manifest;
}

MixtureExample load_example(const DatasetManifest& manifest, std::size_t i) {
  require(i < manifest.records.size(), "manifest index out of range");
  const ManifestRecord& r = manifest.records[i];
  const fs::path& dir = manifest.directory;
  MixtureExample ex;
  ex.mixture = read_wav(dir / r.mixture);
  ex.target_1 = read_wav(dir / r.target_1);
  ex.target_2 = read_wav(dir / r.target_2);
  ex.reference_1 = read_wav(dir / r.reference_1);
  ex.reference_2 = read_wav(dir / r.reference_2);
  if (r.noise) ex.noise = read_wav(dir / *r.noise);
  for (const AudioBuffer* a : {&ex.target_1, &ex.target_2, &ex.reference_1, &ex.reference_2}) {
    if (a->size() != ex.mixture.size()) {
      fail(ErrorKind::kManifestIntegrity, "signal lengths differ in example " + std::to_string(i));
    }
  }
  ex.scene = r.scene;
  ex.snr_db = r.snr_db;
  ex.speaker_1 = r.speaker_1;
  ex.speaker_2 = r.speaker_2;
  ex.utterance_1 = r.utterance_1;
  ex.utterance_2 = r.utterance_2;
  ex.reference_utterance_1 = r.reference_utterance_1;
  ex.reference_utterance_2 = r.reference_utterance_2;
  ex.seed = r.seed;
  return ex;
}

}  // namespace spx

namespace spx {

std::vector<MixtureExample> synthesize_examples(CorpusReader& corpus, NoiseSource* noise,
                                                const ManifestHeader& header, std::size_t count,
                                                const RirOptions& rir) {
  if (header.mode == MixMode::kNoisy && (!noise || noise->empty()))
    fail(ErrorKind::kInvalidArgument, "noisy synthesis needs a noise source");
  std::vector<MixtureExample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t seed = example_seed(header.seed, i);
    std::mt19937_64 rng(seed);
    CleanMixOptions clean;
    clean.duration_range = header.duration_range;
    if (header.truncated) clean.batch_duration_s = header.duration_range.sample(rng);
    MixtureExample ex = draw_clean_example(rng, corpus, clean);
    if (header.mode == MixMode::kNoisy) {
      NoisyMixOptions opts;
      opts.scene_ranges = header.scene_ranges;
      opts.snr_range_db = header.snr_range_db;
      opts.target = header.target;
      opts.rir = rir;
      ex = make_noisy_example(rng, ex, *noise, opts);
    }
    ex.seed = seed;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace spx
