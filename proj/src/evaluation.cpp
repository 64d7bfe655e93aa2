#include "spx/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "spx/error.hpp"
#include "spx/features.hpp"
#include "spx/objectives.hpp"
#include "spx/pipeline.hpp"

namespace spx {

using nlohmann::json;

double si_sdri(const AudioBuffer& target, const AudioBuffer& estimate, const AudioBuffer& mixture) {
  return si_sdr(target, estimate) - si_sdr(target, mixture);
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double ratio_db(double num, double den) {
  if (!(num > 0.0)) return -kSiSdrCapDb;
  const double guard = kSiSdrEps * (num + den);
  const double v = 10.0 * std::log10((num + guard) / (den + guard));
  return std::clamp(v, -kSiSdrCapDb, kSiSdrCapDb);
}

}  // namespace

Decomposition decompose(std::span<const double> y, std::span<const double> t, std::span<const double> i) {
  if (y.size() != t.size() || y.size() != i.size())
    fail(ErrorKind::kInvalidArgument, "decompose: signal lengths differ");
  const double tt = dot(t, t), ii = dot(i, i), ti = dot(t, i);
  const double det = tt * ii - ti * ti;
  if (!(tt > 0.0) || !(ii > 0.0) || det <= 1e-12 * tt * ii)
    fail(ErrorKind::kDecomposition, "decompose: target and interference are collinear or silent");
  const double ty = dot(t, y), iy = dot(i, y);
  const double c_t = (ii * ty - ti * iy) / det;
  const double c_i = (tt * iy - ti * ty) / det;
  const double a = ty / tt;
  Decomposition d;
  d.s_target.resize(y.size());
  d.e_interf.resize(y.size());
  d.e_artif.resize(y.size());
  for (std::size_t n = 0; n < y.size(); ++n) {
    const double s = a * t[n];
    const double proj = c_t * t[n] + c_i * i[n];
    d.s_target[n] = s;
    d.e_interf[n] = proj - s;
    d.e_artif[n] = y[n] - proj;
  }
  return d;
}

double sdr(const Decomposition& d) {
  double err = 0.0;
  for (std::size_t n = 0; n < d.e_interf.size(); ++n) {
    const double e = d.e_interf[n] + d.e_artif[n];
    err += e * e;
  }
  return ratio_db(dot(d.s_target, d.s_target), err);
}

double sir(const Decomposition& d) { return ratio_db(dot(d.s_target, d.s_target), dot(d.e_interf, d.e_interf)); }

AudioBuffer oracle_mask_baseline(const AudioBuffer& target, const AudioBuffer& mixture, const StftConfig& cfg) {
  require(target.size() == mixture.size(), "oracle: target and mixture lengths differ");
  const ComplexSpectrogram mix = stft(mixture, cfg);
  const ComplexSpectrogram est = combine_mag_phase(magnitude(stft(target, cfg)), mix);
  return istft(est, mixture.size(), mixture.sample_rate);
}

std::string to_string(SystemTag tag) {
  switch (tag) {
    case SystemTag::kMixture: return "mixture";
    case SystemTag::kOracle: return "oracle";
    case SystemTag::kProposed: return "proposed";
    case SystemTag::kProposedLs: return "proposed-ls";
  }
  return "?";
}

SystemTag parse_system(const std::string& s) {
  for (SystemTag t : {SystemTag::kMixture, SystemTag::kOracle, SystemTag::kProposed, SystemTag::kProposedLs})
    if (to_string(t) == s) return t;
  fail(ErrorKind::kConfig, "unknown system '" + s + "' (expected mixture, oracle, proposed or proposed-ls)");
}

namespace {

MetricSummary summary_of(std::vector<double> v) {
  MetricSummary s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  s.median = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  return s;
}

}  // namespace

void summarize(EvalReport& r) {
  std::vector<double> a, b, c, d;
  for (const auto& rec : r.records) {
    a.push_back(rec.si_sdr);
    b.push_back(rec.si_sdri);
    c.push_back(rec.sdr);
    d.push_back(rec.sir);
  }
  r.si_sdr = summary_of(a);
  r.si_sdri = summary_of(b);
  r.sdr = summary_of(c);
  r.sir = summary_of(d);
}

EvalReport evaluate_examples(SystemTag system, const std::vector<MixtureExample>& examples,
                             const Network<float>* net, const EvalOptions& options) {
  if (system == SystemTag::kProposed || system == SystemTag::kProposedLs) {
    if (!net) fail(ErrorKind::kCheckpoint, "system '" + to_string(system) + "' needs a checkpoint");
    const FeatureMode want = system == SystemTag::kProposed ? FeatureMode::kRI : FeatureMode::kLS;
    if (net->config().feature_mode != want)
      fail(ErrorKind::kCheckpoint, "checkpoint feature mode '" + to_string(net->config().feature_mode) +
                                       "' does not match system '" + to_string(system) + "'");
  }
  if (options.dump_dir) std::filesystem::create_directories(*options.dump_dir);
  EvalReport report;
  report.system = system;
  for (std::size_t e = 0; e < examples.size(); ++e) {
    const MixtureExample& ex = examples[e];
    AudioBuffer est[2];
    switch (system) {
      case SystemTag::kMixture:
        est[0] = est[1] = ex.mixture;
        break;
      case SystemTag::kOracle:
        est[0] = oracle_mask_baseline(ex.target_1, ex.mixture, options.stft);
        est[1] = oracle_mask_baseline(ex.target_2, ex.mixture, options.stft);
        break;
      case SystemTag::kProposed:
      case SystemTag::kProposedLs: {
        auto [y1, y2] = extract_pair(*net, ex.mixture, ex.reference_1, ex.reference_2, options.stft);
        est[0] = std::move(y1);
        est[1] = std::move(y2);
        break;
      }
    }
    for (int k = 0; k < 2; ++k) {
      const AudioBuffer& target = k == 0 ? ex.target_1 : ex.target_2;
      const AudioBuffer& other = k == 0 ? ex.target_2 : ex.target_1;
      EvalRecord rec;
      rec.example = e;
      rec.speaker = k + 1;
      rec.speaker_id = k == 0 ? ex.speaker_1 : ex.speaker_2;
      rec.si_sdr = si_sdr(target, est[k]);
      rec.si_sdri = rec.si_sdr - si_sdr(target, ex.mixture);
      const Decomposition d = decompose(est[k].view(), target.view(), other.view());
      rec.sdr = sdr(d);
      rec.sir = sir(d);
      rec.snr_db = ex.snr_db;
      if (ex.scene) rec.t60 = ex.scene->t60;
      report.records.push_back(rec);
      if (options.dump_dir) {
        char name[64];
        std::snprintf(name, sizeof(name), "ex%04zu_spk%d.wav", e, k + 1);
        write_wav(*options.dump_dir / name, est[k], WavEncoding::kFloat32);
      }
    }
  }
  summarize(report);
  return report;
}

EvalReport evaluate_system(SystemTag system, const DatasetManifest& manifest, const Network<float>* net,
                           const EvalOptions& options) {
  std::vector<MixtureExample> examples;
  for (std::size_t i = 0; i < manifest.size(); ++i) examples.push_back(load_example(manifest, i));
  return evaluate_examples(system, examples, net, options);
}

void write_report(const EvalReport& r, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(ErrorKind::kIo, "cannot write report " + path.string());
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (const auto& rec : r.records) {
    json j = {{"system", to_string(r.system)}, {"example", rec.example}, {"speaker", rec.speaker},
              {"speaker_id", rec.speaker_id},  {"si_sdr", rec.si_sdr},   {"si_sdri", rec.si_sdri},
              {"sdr", rec.sdr},                {"sir", rec.sir},         {"snr_db", opt(rec.snr_db)},
              {"t60", opt(rec.t60)}};
    os << j.dump() << '\n';
  }
  auto ms = [](const MetricSummary& m) { return json{{"mean", m.mean}, {"median", m.median}}; };
  json s = {{"summary",
             {{"system", to_string(r.system)},
              {"count", r.records.size()},
              {"si_sdr", ms(r.si_sdr)},
              {"si_sdri", ms(r.si_sdri)},
              {"sdr", ms(r.sdr)},
              {"sir", ms(r.sir)}}}};
  os << s.dump() << '\n';
}

std::string format_summary(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "system: %s  records: %zu\n"
                "metric        mean    median\n"
                "SI-SDR   %9.2f %9.2f\n"
                "SI-SDRi  %9.2f %9.2f\n"
                "SDR      %9.2f %9.2f\n"
                "SIR      %9.2f %9.2f\n",
                to_string(r.system).c_str(), r.records.size(), r.si_sdr.mean, r.si_sdr.median, r.si_sdri.mean,
                r.si_sdri.median, r.sdr.mean, r.sdr.median, r.sir.mean, r.sir.median);
  return buf;
}

}  // namespace spx
