#include "settings.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "spx/error.hpp"

namespace spx::cli {

const std::vector<KeyInfo>& known_keys() {
  static const std::vector<KeyInfo> keys = {
      {"dsp.frame_size", "256", "STFT frame length in samples (even)"},
      {"dsp.hop", "64", "STFT hop in samples"},
      {"dsp.keep_bins", "128", "frequency bins kept (Nyquist dropped at 128)"},
      {"model.feature_mode", "ri", "ri (real/imaginary) or ls (log-spectrum)"},
      {"model.width_divisor", "1", "divide every channel width by this"},
      {"model.share_encoder_weights", "false", "one encoder for mixture and reference"},
      {"train.lr", "0.001", "Adam learning rate"},
      {"train.batch_size", "16", "examples per batch (two network samples each)"},
      {"train.max_steps", "1000", "number of updates"},
      {"train.validate_every", "100", "validation/checkpoint period in steps (0 = off)"},
      {"train.beta_sisdr", "0.75", "SI-SDR weight; the MSE weight is 1 - beta_sisdr"},
      {"train.adam_beta1", "0.9", "Adam beta1"},
      {"train.adam_beta2", "0.999", "Adam beta2"},
      {"train.adam_eps", "1e-8", "Adam epsilon"},
      {"train.duration_min", "2", "shortest batch duration in seconds"},
      {"train.duration_max", "8", "longest batch duration in seconds"},
      {"train.clip", "false", "clip the global gradient norm"},
      {"train.clip_norm", "5", "gradient norm bound when train.clip is set"},
      {"train.max_rejected", "5", "consecutive non-finite steps before aborting"},
      {"train.seed", "0", "initialization and batching seed"},
      {"synth.mode", "clean", "clean or noisy"},
      {"synth.n", "100", "number of examples"},
      {"synth.split", "train", "speaker split to draw from: train, valid, test or all"},
      {"synth.split_seed", "0", "seed of the 80/10/10 speaker split"},
      {"synth.seed", "0", "dataset seed"},
      {"synth.layout", "top-directory", "speaker id rule: top-directory or filename-prefix"},
      {"synth.truncate", "true", "cut each example to a random duration"},
      {"synth.duration_min", "2", "shortest example in seconds"},
      {"synth.duration_max", "8", "longest example in seconds"},
      {"synth.snr_min", "10", "lowest noise SNR in dB (noisy mode)"},
      {"synth.snr_max", "25", "highest noise SNR in dB (noisy mode)"},
      {"synth.target", "image", "training target in noisy mode: image or dry"},
      {"synth.noise_dir", "", "noise WAV directory; empty uses synthetic babble"},
      {"scene.room_x_min", "4", "room length range (m)"},
      {"scene.room_x_max", "8", ""},
      {"scene.room_y_min", "4", "room width range (m)"},
      {"scene.room_y_max", "8", ""},
      {"scene.room_z_min", "2.5", "room height range (m)"},
      {"scene.room_z_max", "3", ""},
      {"scene.t60_min", "0.16", "reverberation time range (s)"},
      {"scene.t60_max", "2", ""},
      {"scene.mic_offset_min", "-0.5", "microphone offset from the room centre (m)"},
      {"scene.mic_offset_max", "0.5", ""},
      {"scene.mic_z", "1.5", "microphone height (m)"},
      {"scene.angle_min", "0", "source angle range (degrees)"},
      {"scene.angle_max", "180", ""},
      {"scene.distance_base", "1", "source distance base (m)"},
      {"scene.distance_offset_min", "-0.5", "source distance offset range (m)"},
      {"scene.distance_offset_max", "0.5", ""},
      {"rir.absorption", "calibrated", "calibrated or sabine"},
      {"rir.high_pass", "true", "100 Hz high-pass on the impulse response"},
      {"rir.fractional_delay", "true", "windowed-sinc fractional delays"},
      {"rir.reflections", "true", "include reflections (false = direct path only)"},
      {"rir.time_limit_factor", "1.2", "image cut-off as a multiple of T60"},
      {"corpus.speakers", "10", "make-corpus: number of synthetic speakers"},
      {"corpus.utterances", "4", "make-corpus: utterances per speaker"},
      {"corpus.duration_min", "2", "make-corpus: shortest utterance (s)"},
      {"corpus.duration_max", "8", "make-corpus: longest utterance (s)"},
      {"corpus.seed", "0", "make-corpus: seed"},
  };
  return keys;
}

Settings::Settings() {
  for (const auto& k : known_keys()) values_[k.key] = k.default_value;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void Settings::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
  it->second = value;
}

void Settings::apply(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) fail(ErrorKind::kConfig, "expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Settings::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::kConfig, "cannot read config file " + path.string());
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply(line);
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

std::string Settings::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
  return it->second;
}

double Settings::num(const std::string& key) const {
  const std::string v = str(key);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::kConfig, "config key '" + key + "' expects a number, got '" + v + "'");
}

long Settings::integer(const std::string& key) const {
  const std::string v = str(key);
  long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    fail(ErrorKind::kConfig, "config key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

std::uint64_t Settings::u64(const std::string& key) const {
  const std::string v = str(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    fail(ErrorKind::kConfig, "config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

bool Settings::flag(const std::string& key) const {
  const std::string v = str(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorKind::kConfig, "config key '" + key + "' expects true/false, got '" + v + "'");
}

std::string Settings::dump() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
  return os.str();
}

StftConfig Settings::stft() const {
  StftConfig c;
  c.frame_size = static_cast<int>(integer("dsp.frame_size"));
  c.hop = static_cast<int>(integer("dsp.hop"));
  c.keep_bins = static_cast<int>(integer("dsp.keep_bins"));
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, e.what());
  }
  return c;
}

ModelConfig Settings::model() const {
  ModelConfig m = ModelConfig::standard(parse_feature_mode(str("model.feature_mode")));
  m.share_encoder_weights = flag("model.share_encoder_weights");
  const long div = integer("model.width_divisor");
  if (div < 1) fail(ErrorKind::kConfig, "model.width_divisor must be >= 1");
  if (div > 1) m = m.scaled(static_cast<int>(div));
  const StftConfig s = stft();
  if (s.keep_bins % m.spatial_multiple() != 0)
    fail(ErrorKind::kConfig, "dsp.keep_bins must be a multiple of " + std::to_string(m.spatial_multiple()));
  return m;
}

TrainConfig Settings::train() const {
  TrainConfig t;
  t.learning_rate = num("train.lr");
  t.batch_size = static_cast<int>(integer("train.batch_size"));
  t.max_steps = static_cast<int>(integer("train.max_steps"));
  t.validate_every = static_cast<int>(integer("train.validate_every"));
  t.weights.beta_sisdr = num("train.beta_sisdr");
  t.weights.beta_mse = 1.0 - t.weights.beta_sisdr;
  t.adam_beta1 = num("train.adam_beta1");
  t.adam_beta2 = num("train.adam_beta2");
  t.adam_eps = num("train.adam_eps");
  t.duration_range = {num("train.duration_min"), num("train.duration_max")};
  t.clip_gradients = flag("train.clip");
  t.clip_norm = num("train.clip_norm");
  t.max_rejected_steps = static_cast<int>(integer("train.max_rejected"));
  t.seed = u64("train.seed");
  t.stft = stft();
  t.validate();
  return t;
}

SceneRanges Settings::scene() const {
  SceneRanges r;
  r.room_x = {num("scene.room_x_min"), num("scene.room_x_max")};
  r.room_y = {num("scene.room_y_min"), num("scene.room_y_max")};
  r.room_z = {num("scene.room_z_min"), num("scene.room_z_max")};
  r.t60 = {num("scene.t60_min"), num("scene.t60_max")};
  r.mic_offset = {num("scene.mic_offset_min"), num("scene.mic_offset_max")};
  r.mic_z = num("scene.mic_z");
  r.source_angle_deg = {num("scene.angle_min"), num("scene.angle_max")};
  r.source_distance_base = num("scene.distance_base");
  r.source_distance_offset = {num("scene.distance_offset_min"), num("scene.distance_offset_max")};
  return r;
}

RirOptions Settings::rir() const {
  RirOptions o;
  const std::string a = str("rir.absorption");
  if (a == "calibrated")
    o.absorption = AbsorptionModel::kCalibrated;
  else if (a == "sabine")
    o.absorption = AbsorptionModel::kSabine;
  else
    fail(ErrorKind::kConfig, "rir.absorption must be calibrated or sabine");
  o.high_pass = flag("rir.high_pass");
  o.fractional_delay = flag("rir.fractional_delay");
  o.reflections = flag("rir.reflections");
  o.time_limit_factor = num("rir.time_limit_factor");
  return o;
}

ManifestHeader Settings::manifest_header() const {
  ManifestHeader h;
  h.split = str("synth.split");
  const std::string mode = str("synth.mode");
  if (mode == "clean")
    h.mode = MixMode::kClean;
  else if (mode == "noisy")
    h.mode = MixMode::kNoisy;
  else
    fail(ErrorKind::kConfig, "synth.mode must be clean or noisy");
  h.seed = u64("synth.seed");
  h.duration_range = {num("synth.duration_min"), num("synth.duration_max")};
  if (!(h.duration_range.min_s > 0 && h.duration_range.max_s >= h.duration_range.min_s))
    fail(ErrorKind::kConfig, "synth duration range is invalid");
  h.truncated = flag("synth.truncate");
  h.scene_ranges = scene();
  h.snr_range_db = {num("synth.snr_min"), num("synth.snr_max")};
  const std::string target = str("synth.target");
  if (target == "image")
    h.target = TargetKind::kImage;
  else if (target == "dry")
    h.target = TargetKind::kDry;
  else
    fail(ErrorKind::kConfig, "synth.target must be image or dry");
  return h;
}

std::string keys_help() {
  std::ostringstream os;
  os << "Config keys (set in --config files as 'key = value' or with --set key=value):\n";
  for (const auto& k : known_keys()) {
    const std::string entry = std::string(k.key) + " = " + (k.default_value[0] ? k.default_value : "\"\"");
    os << "  " << std::left << std::setw(38) << entry;
    if (k.help[0]) os << ' ' << k.help;
    os << '\n';
  }
  return os.str();
}

}  // namespace spx::cli
