// Acceptance gate: one PASS/FAIL line per criterion.
//   spx_acceptance [--cli PATH] [--work DIR] [criterion...]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"
#include "spx/evaluation.hpp"
#include "spx/manifest.hpp"
#include "spx/objectives.hpp"
#include "spx/pipeline.hpp"
#include "spx/room.hpp"
#include "spx/stft.hpp"
#include "spx/trainer.hpp"

using namespace spx;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path cli;
  fs::path work;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------------ 1

Outcome stft_round_trip(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> dur(1.0, 8.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto n = static_cast<std::size_t>(std::llround(dur(rng) * 8000.0));
    const auto x = test::bandlimited_noise(rng, n);
    const auto y = istft(stft(x), n);
    worst = std::max(worst, test::rel_error(y.samples, x.samples));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-6 && t < 10.0, fmt("worst relative error %.2e", worst) + fmt(", %.1f s", t)};
}

// ------------------------------------------------------------------ 2

Outcome sisdr_properties(const Context&) {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> len(500, 16000);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = len(rng);
    const auto s = test::noise(rng, n);
    auto y = test::noise(rng, n, 0.5);
    for (std::size_t k = 0; k < n; ++k) y.samples[k] += s.samples[k];
    const double base = si_sdr(s, y);
    for (double a : {0.5, 2.0, -3.0}) {
      auto ys = y;
      for (auto& v : ys.samples) v *= a;
      worst = std::max(worst, std::abs(si_sdr(s, ys) - base));
    }
  }
  const double hand = si_sdr(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 1.0});
  return {worst <= 1e-9 && std::abs(hand) <= 1e-9,
          fmt("max scale drift %.2e dB", worst) + fmt(", hand case %.2e dB", hand)};
}

// ------------------------------------------------------------------ 3

Outcome gradient_check(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig cfg = ModelConfig::from_widths(4, {6, 8}, {6});
  Network<double> net(cfg, 3);
  const StftConfig sc{32, 8, 16};
  const FeatureSpec spec = FeatureSpec::for_model(cfg, sc);
  std::mt19937_64 rng(303);
  const std::size_t len = 104;  // 16 frames of 16 bins
  const auto s1 = test::noise(rng, len), s2 = test::noise(rng, len);
  const auto r1 = test::noise(rng, len), r2 = test::noise(rng, len);
  AudioBuffer mix(len, 8000.0);
  for (std::size_t i = 0; i < len; ++i) mix.samples[i] = s1.samples[i] + s2.samples[i];
  const auto fm = compute_features(mix, spec);
  const auto f1 = compute_features(r1, spec), f2 = compute_features(r2, spec);
  const auto t1 = compute_features(s1, spec), t2 = compute_features(s2, spec);
  const auto x = stack_features<double>({&fm, &fm});
  const auto r = stack_features<double>({&f1, &f2});
  if (x.n != 2 || x.h != 16 || x.w != 16) return {false, "unexpected input shape"};

  const LossWeights w;
  auto loss = [&](bool with_grad) {
    ForwardCache<double> cache;
    const auto out = net.forward(x, r, true, &cache);
    Tensor<double> g(out.n, out.c, out.h, out.w);
    const AudioBuffer* targets[2] = {&s1, &s2};
    const SignalFeatures* tfeat[2] = {&t1, &t2};
    double sd = 0.0, ms = 0.0;
    for (int i = 0; i < 2; ++i) {
      const auto l = sample_loss(out.sample(i), spec, fm, *tfeat[i], *targets[i], -w.beta_sisdr / 2,
                                 w.beta_mse / 2, with_grad ? g.sample(i) : nullptr);
      sd += l.si_sdr;
      ms += l.mse;
    }
    if (with_grad) {
      net.zero_grad();
      net.backward(cache, g);
    }
    return combined_loss(sd / 2, ms / 2, w);
  };
  loss(true);

  // Conv biases followed by batch norm have an identically zero gradient;
  // they are left out of the draw.
  struct Slot {
    std::size_t param, index;
  };
  auto params = net.parameters();
  std::vector<Slot> pool;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& name = params[p].name;
    const bool bn_fed_bias = name.find("conv.bias") != std::string::npos;
    if (bn_fed_bias) continue;
    for (std::size_t i = 0; i < params[p].value.size(); ++i) pool.push_back({p, i});
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(20);

  const double h = 1e-5;
  double worst = 0.0;
  for (const auto& s : pool) {
    auto& v = params[s.param].value[s.index];
    const double analytic = params[s.param].grad[s.index];
    const double orig = v;
    v = orig + h;
    const double lp = loss(false);
    v = orig - h;
    const double lm = loss(false);
    v = orig;
    const double numeric = (lp - lm) / (2 * h);
    const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-12});
    worst = std::max(worst, rel);
  }
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 60.0, fmt("worst relative error %.2e over 20 parameters", worst) + fmt(", %.1f s", t)};
}

// ------------------------------------------------------------------ 4

Outcome architecture(const Context&) {
  const ModelConfig cfg = ModelConfig::standard();
  try {
    cfg.validate();
  } catch (const Error& e) {
    return {false, std::string("default config rejected: ") + e.what()};
  }
  const int d = cfg.depth();
  bool rule = cfg.decoder_plan[0].in == 2 * cfg.encoder_plan[d - 1].out && cfg.decoder_plan[0].in == 1024;
  for (int j = 1; j < d; ++j)
    rule = rule && cfg.decoder_plan[j].in == cfg.decoder_plan[j - 1].out + 2 * cfg.encoder_plan[d - 1 - j].out;

  // Layer arithmetic from the literal channel lists.
  auto conv = [](long k, long cin, long cout) { return k * k * cin * cout + cout; };
  const long enc[][2] = {{64, 128}, {128, 256}, {256, 512}, {512, 512}, {512, 512}, {512, 512}, {512, 512}};
  const long dec[][2] = {{1024, 512}, {1536, 512}, {1536, 512}, {1536, 256}, {1280, 128}, {640, 64}, {320, 2}};
  long head = conv(3, 2, 64);
  for (const auto& p : enc) head += conv(4, p[0], p[1]) + 2 * p[1];
  long expected = 2 * head + conv(3, 2, 2);
  for (const auto& p : dec) expected += conv(4, p[0], p[1]) + 2 * p[1];

  Network<float> net(cfg, 1);
  const bool count_ok = count_parameters(cfg) == expected && net.parameter_count() == expected;

  std::mt19937_64 rng(404);
  std::normal_distribution<float> nd;
  bool shapes = true;
  for (int frames : {128, 256}) {
    Tensor<float> x(2, 2, 128, frames), r(2, 2, 128, frames);
    for (auto& v : x.data) v = nd(rng);
    for (auto& v : r.data) v = nd(rng);
    const auto y = net.infer(x, r);
    shapes = shapes && y.same_shape(x);
  }
  std::ostringstream os;
  os << "skip rule " << (rule ? "ok" : "violated") << ", parameters " << net.parameter_count() << " (expected "
     << expected << "), shapes " << (shapes ? "ok" : "mismatch");
  return {rule && count_ok && shapes, os.str()};
}

// ------------------------------------------------------------------ 5

Outcome overfit(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto index = make_synthetic_corpus(ctx.work / "overfit_corpus", 6, 3, {1.5, 2.5}, 11);
  CorpusReader reader(index);
  std::mt19937_64 rng(4);
  CleanMixOptions o;
  o.duration_range = {1.0, 1.0};
  o.batch_duration_s = 1.0;
  std::vector<MixtureExample> examples;
  for (int i = 0; i < 8; ++i) examples.push_back(draw_clean_example(rng, reader, o));

  const ModelConfig mc = ModelConfig::standard().scaled(16);
  mc.validate();
  TrainConfig tc;  // default optimizer, batch size and loss weights
  tc.duration_range = {1.0, 1.0};
  tc.max_steps = 2000;
  tc.validate_every = 0;
  Trainer trainer(mc, tc, examples, examples);

  constexpr int kCheckEvery = 25;
  double best = -1e9;
  int steps = 0;
  while (steps < tc.max_steps) {
    trainer.step();
    ++steps;
    if (steps % kCheckEvery != 0) continue;
    const double v = trainer.validate();
    best = std::max(best, v);
    if (steps % 100 == 0)
      std::fprintf(stderr, "  overfit step %d: training-set SI-SDRi %.2f dB (%.0f s)\n", steps, v,
                   seconds_since(t0));
    if (v >= 10.0) break;
  }
  const double t = seconds_since(t0);
  std::ostringstream os;
  os << "best training-set SI-SDRi " << fmt("%.2f dB", best) << " after " << steps << " steps, width/16 ("
     << count_parameters(mc) << " parameters), " << fmt("%.0f s", t);
  return {best >= 10.0 && t <= 1800.0, os.str()};
}

// ------------------------------------------------------------------ 6

Outcome rir_validity(const Context&) {
  std::mt19937_64 rng(606);
  SceneRanges ranges;
  ranges.t60 = {0.2, 0.8};
  double worst_t60 = 0.0;
  long worst_tap = 0;
  for (int i = 0; i < 20; ++i) {
    const SceneSpec scene = sample_scene(rng, ranges, 2);
    for (int s = 0; s < 2; ++s) {
      const auto h = generate_rir(scene, s, 8000.0);
      const double est = estimate_t60(h);
      worst_t60 = std::max(worst_t60, std::abs(est - scene.t60) / scene.t60);
      std::size_t peak = 0;
      for (std::size_t n = 1; n < h.size(); ++n)
        if (std::abs(h.samples[n]) > std::abs(h.samples[peak])) peak = n;
      worst_tap = std::max(worst_tap, std::abs(static_cast<long>(peak) - direct_path_tap(scene, s, 8000.0)));
    }
  }
  return {worst_t60 <= 0.2 && worst_tap <= 1,
          fmt("worst T60 deviation %.1f%%", 100 * worst_t60) + ", worst direct-tap offset " +
              std::to_string(worst_tap)};
}

// ------------------------------------------------------------------ 7

Outcome mixing_exactness(const Context& ctx) {
  const auto index = make_synthetic_corpus(ctx.work / "mix_corpus", 6, 4, {1.0, 2.0}, 7);
  CorpusReader reader(index);
  auto babble = NoiseSource::synthetic_babble();

  ManifestHeader noisy;
  noisy.mode = MixMode::kNoisy;
  noisy.seed = 77;
  noisy.duration_range = {1.0, 2.0};
  noisy.scene_ranges.t60 = {0.2, 0.8};
  const auto nex = synthesize_examples(reader, &babble, noisy, 50);
  double worst_snr = 0.0;
  for (const auto& ex : nex) {
    std::vector<double> speech(ex.size());
    for (std::size_t i = 0; i < ex.size(); ++i) speech[i] = ex.target_1.samples[i] + ex.target_2.samples[i];
    const double measured = 10.0 * std::log10(power(speech) / power(ex.noise->samples));
    worst_snr = std::max(worst_snr, std::abs(measured - *ex.snr_db));
  }

  ManifestHeader clean;
  clean.seed = 78;
  clean.duration_range = {1.0, 2.0};
  const auto cex = synthesize_examples(reader, nullptr, clean, 50);
  // Signals are float32 values; the sum is exact at that precision.
  std::size_t mismatches = 0;
  for (const auto& ex : cex)
    for (std::size_t i = 0; i < ex.size(); ++i)
      if (ex.mixture.samples[i] != static_cast<float>(ex.target_1.samples[i] + ex.target_2.samples[i])) ++mismatches;
  const auto written = write_manifest(ctx.work / "mix_clean", clean, cex);
  for (std::size_t k = 0; k < written.size(); ++k) {
    const auto ex = load_example(read_manifest(ctx.work / "mix_clean"), k);
    for (std::size_t i = 0; i < ex.size(); ++i)
      if (ex.mixture.samples[i] != static_cast<float>(ex.target_1.samples[i] + ex.target_2.samples[i])) ++mismatches;
  }
  return {worst_snr <= 0.1 && mismatches == 0,
          fmt("worst SNR error %.2e dB", worst_snr) + ", clean sum mismatches " + std::to_string(mismatches)};
}

// ------------------------------------------------------------------ 8

Outcome metric_ordering(const Context& ctx) {
  const auto index = make_synthetic_corpus(ctx.work / "metric_corpus", 6, 4, {1.0, 2.0}, 8);
  CorpusReader reader(index);
  auto babble = NoiseSource::synthetic_babble();
  ManifestHeader h;
  h.mode = MixMode::kNoisy;
  h.seed = 88;
  h.duration_range = {1.0, 2.0};
  h.scene_ranges.t60 = {0.2, 0.8};
  const auto examples = synthesize_examples(reader, &babble, h, 20);

  const auto mix = evaluate_examples(SystemTag::kMixture, examples, nullptr);
  const auto oracle = evaluate_examples(SystemTag::kOracle, examples, nullptr);
  bool mixture_zero = true;
  for (const auto& r : mix.records) mixture_zero = mixture_zero && r.si_sdri == 0.0;
  int order_violations = 0;
  for (const auto* rep : {&mix, &oracle})
    for (const auto& r : rep->records)
      if (r.sir < r.sdr) ++order_violations;

  double worst_sum = 0.0;
  for (const auto& ex : examples) {
    for (int s = 0; s < 2; ++s) {
      const auto& target = s == 0 ? ex.target_1 : ex.target_2;
      const auto& other = s == 0 ? ex.target_2 : ex.target_1;
      const auto y = oracle_mask_baseline(target, ex.mixture);
      const auto d = decompose(y.samples, target.samples, other.samples);
      std::vector<double> sum(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) sum[i] = d.s_target[i] + d.e_interf[i] + d.e_artif[i];
      worst_sum = std::max(worst_sum, test::rel_error(sum, y.samples));
    }
  }
  std::ostringstream os;
  os << fmt("oracle mean SI-SDRi %.2f dB", oracle.si_sdri.mean) << fmt(", mixture %.2f dB", mix.si_sdri.mean)
     << ", sir<sdr cases " << order_violations << fmt(", decomposition sum error %.1e", worst_sum);
  return {oracle.si_sdri.mean > 0.0 && mixture_zero && order_violations == 0 && worst_sum <= 1e-8, os.str()};
}

// ------------------------------------------------------------------ 9

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

// The training log carries wall-clock times; everything else must match.
std::string log_without_wall_time(const fs::path& p) {
  std::ifstream is(p);
  std::string out;
  for (std::string line; std::getline(is, line);) {
    auto j = nlohmann::json::parse(line);
    j.erase("wall_s");
    out += j.dump() + '\n';
  }
  return out;
}

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return rc;
}

Outcome determinism(const Context& ctx) {
  if (ctx.cli.empty() || !fs::exists(ctx.cli)) return {false, "CLI binary not found (pass --cli)"};
  const std::string cli = ctx.cli.string();
  const auto corpus = ctx.work / "det_corpus";
  if (run(cli + " make-corpus -o " + corpus.string() + " --seed 3 --set corpus.speakers=4 --set corpus.utterances=3 --set corpus.duration_min=1.5 --set corpus.duration_max=3") != 0)
    return {false, "make-corpus failed"};
  const std::string small = " --set model.width_divisor=32 --set train.batch_size=2 --set train.duration_min=1"
                            " --set train.duration_max=1.5 --set train.validate_every=2";
  std::vector<std::string> artifacts[2];
  for (int k = 0; k < 2; ++k) {
    const auto dir = ctx.work / ("det_run" + std::to_string(k));
    fs::remove_all(dir);
    const std::string data = (dir / "data").string(), ckpt = (dir / "ckpt").string();
    if (run(cli + " synth --corpus " + corpus.string() + " -o " + data +
            " --mode noisy --n 4 --seed 5 --set synth.split=all --set synth.duration_min=1"
            " --set synth.duration_max=1.5") != 0)
      return {false, "synth failed"};
    if (run(cli + " train --train " + data + " --valid " + data + " -o " + ckpt + " --max-steps 4 --seed 9" + small) != 0)
      return {false, "train failed"};
    if (run(cli + " evaluate --manifest " + data + " --system proposed --checkpoint " + ckpt +
            "/model.spxn --report " + (dir / "report.jsonl").string()) != 0)
      return {false, "evaluate failed"};
    auto& a = artifacts[k];
    a.push_back(read_bytes(dir / "data" / kManifestFileName));
    std::vector<fs::path> wavs;
    for (const auto& e : fs::recursive_directory_iterator(dir / "data"))
      if (e.path().extension() == ".wav") wavs.push_back(fs::relative(e.path(), dir));
    std::sort(wavs.begin(), wavs.end());
    for (const auto& w : wavs) a.push_back(w.string() + read_bytes(dir / w));
    a.push_back(read_bytes(dir / "ckpt" / Trainer::kStateFile));
    a.push_back(read_bytes(dir / "ckpt" / Trainer::kLatestFile));
    a.push_back(read_bytes(dir / "ckpt" / Trainer::kBestFile));
    a.push_back(log_without_wall_time(dir / "ckpt" / Trainer::kLogFile));
    a.push_back(read_bytes(dir / "report.jsonl"));
  }
  const bool same = artifacts[0] == artifacts[1];
  return {same, std::to_string(artifacts[0].size()) + " artifacts compared, " + (same ? "identical" : "differ")};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*fn)(const Context&);
};

const Criterion kCriteria[] = {
    {1, "STFT round trip", stft_round_trip},
    {2, "SI-SDR properties", sisdr_properties},
    {3, "gradient check", gradient_check},
    {4, "architecture contract", architecture},
    {5, "overfit", overfit},
    {6, "RIR validity", rir_validity},
    {7, "mixing exactness", mixing_exactness},
    {8, "metric ordering", metric_ordering},
    {9, "determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.work = fs::temp_directory_path() / "spx_acceptance";
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) {
      ctx.cli = argv[++i];
    } else if (a == "--work" && i + 1 < argc) {
      ctx.work = argv[++i];
    } else {
      selected.push_back(std::atoi(a.c_str()));
    }
  }
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto dir = ctx.work / ("c" + std::to_string(c.id));
    fs::remove_all(dir);
    fs::create_directories(dir);
    Context local = ctx;
    local.work = dir;
    Outcome o;
    try {
      o = c.fn(local);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d %-22s %s  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
