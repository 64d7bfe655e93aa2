// spx: dataset synthesis, training, extraction, evaluation and RIR inspection.
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "settings.hpp"
#include "spx/corpus.hpp"
#include "spx/error.hpp"
#include "spx/evaluation.hpp"
#include "spx/manifest.hpp"
#include "spx/pipeline.hpp"
#include "spx/room.hpp"
#include "spx/trainer.hpp"

namespace fs = std::filesystem;
using namespace spx;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  bool verbose = false;
};

cli::Settings resolve(const Common& c) {
  cli::Settings s;
  if (!c.config_file.empty()) s.load_file(c.config_file);
  for (const auto& o : c.overrides) s.apply(o);
  return s;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_file, "config file of 'key = value' lines");
  sub->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
  sub->add_flag("-v,--verbose", c.verbose, "progress output on stderr");
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty() || !fs::is_directory(path)) throw UsageError(std::string(what) + " directory not found: " + path);
}

void require_file(const std::string& path, const char* what) {
  if (path.empty() || !fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

LayoutRule layout_of(const std::string& s) {
  if (s == "top-directory") return LayoutRule::kTopDirectory;
  if (s == "filename-prefix") return LayoutRule::kFilenamePrefix;
  fail(ErrorKind::kConfig, "synth.layout must be top-directory or filename-prefix");
}

std::vector<MixtureExample> load_all(const DatasetManifest& m) {
  std::vector<MixtureExample> out;
  for (std::size_t i = 0; i < m.size(); ++i) out.push_back(load_example(m, i));
  return out;
}

// ---------------------------------------------------------------- subcommands

int run_make_corpus(const cli::Settings& s, const std::string& out) {
  const auto index = make_synthetic_corpus(out, static_cast<int>(s.integer("corpus.speakers")),
                                           static_cast<int>(s.integer("corpus.utterances")),
                                           {s.num("corpus.duration_min"), s.num("corpus.duration_max")},
                                           s.u64("corpus.seed"));
  std::printf("wrote %zu speakers, %zu utterances under %s\n", index.speakers.size(), index.utterance_count(),
              out.c_str());
  return 0;
}

int run_synth(const cli::Settings& s, const std::string& corpus_dir, const std::string& out, bool verbose) {
  require_dir(corpus_dir, "corpus");
  const ManifestHeader header = s.manifest_header();
  ScanStats stats;
  CorpusIndex index = scan_corpus(corpus_dir, layout_of(s.str("synth.layout")), &stats);
  if (header.split != "all") {
    const auto splits = split_speakers(index, {0.8, 0.1, 0.1}, s.u64("synth.split_seed"));
    if (header.split == "train")
      index = splits[0];
    else if (header.split == "valid")
      index = splits[1];
    else if (header.split == "test")
      index = splits[2];
    else
      fail(ErrorKind::kConfig, "synth.split must be train, valid, test or all");
  }
  if (verbose)
    std::fprintf(stderr, "corpus: %zu speakers, %zu utterances (%d files skipped)\n", index.speakers.size(),
                 index.utterance_count(), stats.skipped_files);
  CorpusReader reader(index);
  std::optional<NoiseSource> noise;
  if (header.mode == MixMode::kNoisy) {
    const std::string nd = s.str("synth.noise_dir");
    if (nd.empty()) {
      noise = NoiseSource::synthetic_babble();
    } else {
      require_dir(nd, "noise");
      noise = NoiseSource::from_corpus(scan_corpus(nd, LayoutRule::kFilenamePrefix));
    }
  }
  const long n = s.integer("synth.n");
  if (n < 0) fail(ErrorKind::kConfig, "synth.n must be >= 0");
  const auto examples =
      synthesize_examples(reader, noise ? &*noise : nullptr, header, static_cast<std::size_t>(n), s.rir());
  const auto manifest = write_manifest(out, header, examples);
  std::printf("wrote %zu %s examples to %s\n", manifest.size(), to_string(header.mode).c_str(),
              (fs::path(out) / kManifestFileName).c_str());
  return 0;
}

int run_train(const cli::Settings& s, const std::string& train_path, const std::string& valid_path,
              const std::string& out, bool resume, bool verbose) {
  require_file(train_path, "training manifest");
  if (!valid_path.empty()) require_file(valid_path, "validation manifest");
  const ModelConfig model = s.model();
  TrainConfig tc = s.train();
  tc.checkpoint_dir = out;
  std::printf("train: lr %g  batch %d  beta_sisdr %g  beta_mse %g  adam (%g, %g, %g)  steps %d  seed %llu\n",
              tc.learning_rate, tc.batch_size, tc.weights.beta_sisdr, tc.weights.beta_mse, tc.adam_beta1,
              tc.adam_beta2, tc.adam_eps, tc.max_steps, static_cast<unsigned long long>(tc.seed));
  std::printf("model: %s, %lld parameters\n", to_string(model.feature_mode).c_str(),
              static_cast<long long>(count_parameters(model)));
  std::fflush(stdout);
  const auto train = load_all(read_manifest(train_path));
  const auto valid = valid_path.empty() ? std::vector<MixtureExample>{} : load_all(read_manifest(valid_path));
  fs::create_directories(out);
  {
    std::ofstream cfg(fs::path(out) / "config.txt");
    cfg << s.dump();
  }
  Trainer trainer(model, tc, train, valid);
  const fs::path state = fs::path(out) / Trainer::kStateFile;
  if (resume) {
    trainer.load_state(state);
    std::printf("resumed at step %d\n", trainer.state().step);
  } else {
    std::error_code ec;
    fs::remove(fs::path(out) / Trainer::kLogFile, ec);
  }
  trainer.run([&](const TrainRecord& r) {
    if (verbose || r.valid_si_sdri)
      std::fprintf(stderr, "step %d  loss %.4f  si-sdr %.2f dB  mse %.5f  dur %.2f s%s\n", r.step, r.loss.combined,
                   r.loss.si_sdr_pair, r.loss.mse_pair, r.duration_s,
                   r.valid_si_sdri ? (" valid SI-SDRi " + std::to_string(*r.valid_si_sdri)).c_str() : "");
  });
  std::printf("finished at step %d; checkpoints in %s\n", trainer.state().step, out.c_str());
  return 0;
}

int run_extract(const cli::Settings& s, const std::string& ckpt, const std::string& mix_path,
                const std::string& ref_path, const std::string& out) {
  require_file(ckpt, "checkpoint");
  require_file(mix_path, "mixture");
  require_file(ref_path, "reference");
  const auto net = Network<float>::load(ckpt);
  const AudioBuffer mix = read_wav(mix_path);
  const AudioBuffer ref = read_wav(ref_path);
  const AudioBuffer y = extract(net, mix, ref, s.stft());
  write_wav(out, y, WavEncoding::kFloat32);
  std::printf("wrote %zu samples to %s\n", y.size(), out.c_str());
  return 0;
}

int run_evaluate(const cli::Settings& s, const std::string& manifest_path, const std::string& system_name,
                 const std::string& ckpt, const std::string& report, const std::string& dump) {
  require_file(manifest_path, "manifest");
  SystemTag system;
  try {
    system = parse_system(system_name);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::optional<Network<float>> net;
  if (system == SystemTag::kProposed || system == SystemTag::kProposedLs) {
    if (ckpt.empty()) throw UsageError("system '" + system_name + "' needs --checkpoint");
    if (!fs::exists(ckpt)) fail(ErrorKind::kCheckpoint, "checkpoint not found: " + ckpt);
    net = Network<float>::load(ckpt);
  }
  EvalOptions opts;
  opts.stft = s.stft();
  if (!dump.empty()) opts.dump_dir = dump;
  const EvalReport r = evaluate_system(system, read_manifest(manifest_path), net ? &*net : nullptr, opts);
  if (!report.empty()) write_report(r, report);
  std::fputs(format_summary(r).c_str(), stdout);
  return 0;
}

int run_rir(const cli::Settings& s, std::uint64_t seed, double t60, const std::string& out) {
  SceneRanges ranges = s.scene();
  if (t60 > 0) ranges.t60 = {t60, t60};
  std::mt19937_64 rng(seed);
  const SceneSpec scene = sample_scene(rng, ranges, 1);
  const RirOptions opts = s.rir();
  const AudioBuffer h = generate_rir(scene, 0, kProcessingRate, opts);
  json j = {{"room", {scene.room.x, scene.room.y, scene.room.z}},
            {"mic", {scene.mic.x, scene.mic.y, scene.mic.z}},
            {"source", {scene.sources[0].x, scene.sources[0].y, scene.sources[0].z}},
            {"t60_requested", scene.t60},
            {"reflection_coefficient", reflection_coefficient(scene, kProcessingRate, opts)},
            {"direct_path_tap", direct_path_tap(scene, 0, kProcessingRate)},
            {"length", h.size()}};
  try {
    j["t60_estimated"] = estimate_t60(h);
  } catch (const Error&) {
    j["t60_estimated"] = nullptr;
  }
  if (!out.empty()) write_wav(out, h, WavEncoding::kFloat32);
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spx: reference-conditioned speaker extraction toolkit"};
  app.require_subcommand(1);
  app.footer(cli::keys_help());
  Common common;

  std::string out, corpus, train_manifest, valid_manifest, checkpoint, mixture, reference, manifest, system,
      report, dump;
  bool resume = false;
  std::uint64_t seed = 0;
  double t60 = 0.0;
  long n = -1, max_steps = -1;
  std::string mode;

  auto* mk = app.add_subcommand("make-corpus", "write a synthetic speech-like corpus (spkNN/uttMM.wav)");
  add_common(mk, common);
  mk->add_option("-o,--out", out, "output directory")->required();
  mk->add_option("--seed", seed, "corpus.seed");

  auto* sy = app.add_subcommand("synth", "synthesize a clean or noisy mixture dataset");
  add_common(sy, common);
  sy->add_option("--corpus", corpus, "speech corpus root")->required();
  sy->add_option("-o,--out", out, "output dataset directory")->required();
  sy->add_option("--mode", mode, "synth.mode (clean|noisy)");
  sy->add_option("--n", n, "synth.n");
  sy->add_option("--seed", seed, "synth.seed");

  auto* tr = app.add_subcommand("train", "train the extractor");
  add_common(tr, common);
  tr->add_option("--train", train_manifest, "training manifest (file or directory)")->required();
  tr->add_option("--valid", valid_manifest, "validation manifest");
  tr->add_option("-o,--out", out, "checkpoint directory")->required();
  tr->add_option("--max-steps", max_steps, "train.max_steps");
  tr->add_option("--seed", seed, "train.seed");
  tr->add_flag("--resume", resume, "continue from <out>/state.spxt");

  auto* ex = app.add_subcommand("extract", "extract the reference speaker from a mixture WAV");
  add_common(ex, common);
  ex->add_option("--checkpoint", checkpoint, "network checkpoint (.spxn)")->required();
  ex->add_option("--mixture", mixture, "mixture WAV (mono)")->required();
  ex->add_option("--reference", reference, "reference WAV of the desired speaker (mono)")->required();
  ex->add_option("-o,--out", out, "output WAV")->required();

  auto* ev = app.add_subcommand("evaluate", "score a system on a manifest");
  add_common(ev, common);
  ev->add_option("--manifest", manifest, "dataset manifest")->required();
  ev->add_option("--system", system, "mixture | oracle | proposed | proposed-ls")->required();
  ev->add_option("--checkpoint", checkpoint, "network checkpoint for proposed systems");
  ev->add_option("--report", report, "write per-example JSON lines here");
  ev->add_option("--dump-dir", dump, "write estimates as WAV files here");

  auto* rr = app.add_subcommand("rir", "sample a scene and inspect its impulse response");
  add_common(rr, common);
  rr->add_option("--seed", seed, "scene seed");
  rr->add_option("--t60", t60, "fix T60 (s) instead of sampling it");
  rr->add_option("-o,--out", out, "write the impulse response WAV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    cli::Settings s = resolve(common);
    if (mk->parsed()) {
      if (mk->count("--seed")) s.set("corpus.seed", std::to_string(seed));
      return run_make_corpus(s, out);
    }
    if (sy->parsed()) {
      if (!mode.empty()) s.set("synth.mode", mode);
      if (n >= 0) s.set("synth.n", std::to_string(n));
      if (sy->count("--seed")) s.set("synth.seed", std::to_string(seed));
      return run_synth(s, corpus, out, common.verbose);
    }
    if (tr->parsed()) {
      if (max_steps >= 0) s.set("train.max_steps", std::to_string(max_steps));
      if (tr->count("--seed")) s.set("train.seed", std::to_string(seed));
      return run_train(s, train_manifest, valid_manifest, out, resume, common.verbose);
    }
    if (ex->parsed()) return run_extract(s, checkpoint, mixture, reference, out);
    if (ev->parsed()) return run_evaluate(s, manifest, system, checkpoint, report, dump);
    if (rr->parsed()) return run_rir(s, seed, t60, out);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", to_string(e.kind()), e.what());
    return e.kind() == ErrorKind::kConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
