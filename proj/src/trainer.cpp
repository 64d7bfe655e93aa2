#include "spx/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "spx/error.hpp"
#include "spx/manifest.hpp"
#include "spx/parallel.hpp"
#include "spx/pipeline.hpp"

namespace spx {

using nlohmann::json;

void TrainConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorKind::kConfig, "train config: " + msg);
  };
  check(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning rate must be finite and >= 0");
  check(batch_size >= 1, "batch size must be >= 1");
  check(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam betas must be in [0,1)");
  check(adam_eps > 0.0, "adam eps must be positive");
  check(max_steps >= 0, "max steps must be >= 0");
  check(validate_every >= 0, "validate_every must be >= 0");
  check(duration_range.min_s > 0.0 && duration_range.max_s >= duration_range.min_s, "bad duration range");
  check(clip_norm > 0.0, "clip norm must be positive");
  check(max_rejected_steps >= 1, "max_rejected_steps must be >= 1");
  weights.validate();
  stft.validate();
}

std::string train_config_to_json(const TrainConfig& c) {
  json j = {{"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps},
            {"max_steps", c.max_steps},
            {"validate_every", c.validate_every},
            {"seed", c.seed},
            {"beta_sisdr", c.weights.beta_sisdr},
            {"beta_mse", c.weights.beta_mse},
            {"duration_range", {c.duration_range.min_s, c.duration_range.max_s}},
            {"clip_gradients", c.clip_gradients},
            {"clip_norm", c.clip_norm},
            {"stft", {c.stft.frame_size, c.stft.hop, c.stft.keep_bins}}};
  return j.dump();
}

namespace {

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 rng_from_string(const std::string& s) {
  std::istringstream is(s);
  std::mt19937_64 rng;
  is >> rng;
  if (!is) fail(ErrorKind::kCheckpoint, "corrupt rng state in training checkpoint");
  return rng;
}

AudioBuffer crop(const AudioBuffer& a, std::size_t offset, std::size_t n) {
  if (a.size() < offset + n) return fit_reference(a, n);
  return AudioBuffer(std::vector<double>(a.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                                         a.samples.begin() + static_cast<std::ptrdiff_t>(offset + n)),
                     a.sample_rate);
}

constexpr int kMaxCropAttempts = 64;

bool silent(const AudioBuffer& a, std::size_t offset, std::size_t n) {
  for (std::size_t i = offset; i < offset + n; ++i)
    if (a.samples[i] != 0.0) return false;
  return true;
}

json record_to_json(const TrainRecord& r) {
  json j = {{"step", r.step},
            {"si_sdr_pair", r.loss.si_sdr_pair},
            {"mse_pair", r.loss.mse_pair},
            {"combined", r.loss.combined},
            {"duration_s", r.duration_s},
            {"rejected", r.rejected}};
  j["valid_si_sdri"] = r.valid_si_sdri ? json(*r.valid_si_sdri) : json(nullptr);
  return j;
}

TrainRecord record_from_json(const json& j) {
  TrainRecord r;
  r.step = j.at("step").get<int>();
  r.loss.si_sdr_pair = j.at("si_sdr_pair").get<double>();
  r.loss.mse_pair = j.at("mse_pair").get<double>();
  r.loss.combined = j.at("combined").get<double>();
  r.duration_s = j.at("duration_s").get<double>();
  r.rejected = j.at("rejected").get<bool>();
  if (!j.at("valid_si_sdri").is_null()) r.valid_si_sdri = j.at("valid_si_sdri").get<double>();
  return r;
}

}  // namespace

Trainer::Trainer(const ModelConfig& model, const TrainConfig& config, std::vector<MixtureExample> train,
                 std::vector<MixtureExample> valid)
    : model_config_(model), config_(config), train_(std::move(train)), valid_(std::move(valid)) {
  config_.validate();
  model_config_.validate();
  if (train_.empty()) fail(ErrorKind::kEmptyCorpus, "training set is empty");
  state_.network = Network<float>(model_config_, example_seed(config_.seed, 0));
  state_.rng.seed(example_seed(config_.seed, 1));
  for (const auto& p : state_.network.parameters()) {
    state_.adam_m.emplace_back(p.value.size(), 0.0f);
    state_.adam_v.emplace_back(p.value.size(), 0.0f);
  }
}

std::vector<TrainItem> Trainer::next_batch() {
  auto& rng = state_.rng;
  std::vector<std::size_t> picks;
  for (int b = 0; b < config_.batch_size; ++b) {
    if (state_.cursor >= state_.order.size()) {
      state_.order.resize(train_.size());
      for (std::size_t i = 0; i < train_.size(); ++i) state_.order[i] = i;
      std::shuffle(state_.order.begin(), state_.order.end(), rng);
      state_.cursor = 0;
    }
    picks.push_back(state_.order[state_.cursor++]);
  }
  const double duration = config_.duration_range.sample(rng);
  const auto n = static_cast<std::size_t>(std::llround(duration * kProcessingRate));
  std::vector<TrainItem> batch;
  for (std::size_t idx : picks) {
    const MixtureExample& ex = train_[idx];
    std::size_t offset = 0;
    if (ex.size() > n) {
      // A crop inside one speaker's zero padding has no defined SI-SDR.
      std::uniform_int_distribution<std::size_t> pick(0, ex.size() - n);
      int attempt = 0;
      do {
        if (++attempt > kMaxCropAttempts)
          fail(ErrorKind::kSamplingFailure, "no crop with two active speakers in training example " +
                                                std::to_string(idx));
        offset = pick(rng);
      } while (silent(ex.target_1, offset, n) || silent(ex.target_2, offset, n));
    }
    batch.push_back({crop(ex.mixture, offset, n), crop(ex.target_1, offset, n), crop(ex.target_2, offset, n),
                     crop(ex.reference_1, offset, n), crop(ex.reference_2, offset, n)});
  }
  return batch;
}

LossBreakdown Trainer::loss_and_gradients(const std::vector<TrainItem>& batch) {
  require(!batch.empty(), "empty training batch");
  const std::size_t len = batch.front().mixture.size();
  for (const auto& it : batch)
    require(it.mixture.size() == len && it.target_1.size() == len && it.target_2.size() == len &&
                it.reference_1.size() == len && it.reference_2.size() == len,
            "all signals in a batch must share one length");
  const FeatureSpec spec = FeatureSpec::for_model(model_config_, config_.stft);
  const int b_n = static_cast<int>(batch.size());
  const int n = 2 * b_n;

  // Per sample 2b: speaker 1 with reference 1; 2b+1: speaker 2 with reference 2.
  std::vector<SignalFeatures> mix(b_n), ref(n), tgt(n);
  ExceptionSlot errors;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < b_n; ++b) {
    errors.run([&] {
      mix[b] = compute_features(batch[b].mixture, spec);
      ref[2 * b] = compute_features(batch[b].reference_1, spec);
      ref[2 * b + 1] = compute_features(batch[b].reference_2, spec);
      tgt[2 * b] = compute_features(batch[b].target_1, spec);
      tgt[2 * b + 1] = compute_features(batch[b].target_2, spec);
    });
  }
  errors.rethrow();
  std::vector<const SignalFeatures*> xs, rs;
  for (int i = 0; i < n; ++i) {
    xs.push_back(&mix[i / 2]);
    rs.push_back(&ref[i]);
  }
  const Tensor<float> x = stack_features<float>(xs);
  const Tensor<float> r = stack_features<float>(rs);

  auto& net = state_.network;
  ForwardCache<float> cache;
  const Tensor<float> out = net.forward(x, r, true, &cache);
  Tensor<float> grad(out.n, out.c, out.h, out.w);
  std::vector<SampleLoss> losses(n);
  const double sisdr_scale = -config_.weights.beta_sisdr / n;
  const double mse_scale = config_.weights.beta_mse / n;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    errors.run([&] {
      const AudioBuffer& target = i % 2 == 0 ? batch[i / 2].target_1 : batch[i / 2].target_2;
      losses[i] = sample_loss(out.sample(i), spec, mix[i / 2], tgt[i], target, sisdr_scale, mse_scale, grad.sample(i));
    });
  }
  errors.rethrow();
  double sd = 0.0, ms = 0.0;
  for (int b = 0; b < b_n; ++b) {
    sd += losses[2 * b].si_sdr + losses[2 * b + 1].si_sdr;
    ms += losses[2 * b].mse + losses[2 * b + 1].mse;
  }
  LossBreakdown lb;
  lb.si_sdr_pair = sd / n;
  lb.mse_pair = ms / n;
  lb.combined = combined_loss(lb.si_sdr_pair, lb.mse_pair, config_.weights);
  net.zero_grad();
  if (std::isfinite(lb.combined)) net.backward(cache, grad);
  return lb;
}

void Trainer::apply_adam() {
  auto params = state_.network.parameters();
  double scale = 1.0;
  if (config_.clip_gradients) {
    double sq = 0.0;
    for (const auto& p : params)
      for (float g : p.grad) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
  }
  const int t = state_.step + 1;
  const double b1 = config_.adam_beta1, b2 = config_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
  const double lr = config_.learning_rate;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    auto& m = state_.adam_m[pi];
    auto& v = state_.adam_v[pi];
    const std::size_t sz = p.value.size();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < sz; ++i) {
      const double g = p.grad[i] * scale;
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      p.value[i] = static_cast<float>(p.value[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + config_.adam_eps));
    }
  }
}

TrainRecord Trainer::step_on(const std::vector<TrainItem>& batch) {
  std::vector<std::vector<float>> saved;
  for (const auto& b : state_.network.buffers()) saved.emplace_back(b.value.begin(), b.value.end());

  TrainRecord rec;
  rec.duration_s = static_cast<double>(batch.front().mixture.size()) / kProcessingRate;
  rec.loss = loss_and_gradients(batch);
  if (!std::isfinite(rec.loss.combined)) {
    auto bufs = state_.network.buffers();
    for (std::size_t i = 0; i < bufs.size(); ++i) std::copy(saved[i].begin(), saved[i].end(), bufs[i].value.begin());
    rec.rejected = true;
    rec.step = state_.step;
    state_.history.push_back(rec);
    if (++state_.rejected_in_row >= config_.max_rejected_steps)
      fail(ErrorKind::kTrainingStep, "aborting after " + std::to_string(state_.rejected_in_row) +
                                         " consecutive non-finite losses");
    return rec;
  }
  state_.rejected_in_row = 0;
  apply_adam();
  ++state_.step;
  rec.step = state_.step;
  state_.history.push_back(rec);
  return rec;
}

TrainRecord Trainer::step() { return step_on(next_batch()); }

double Trainer::validate(const std::vector<MixtureExample>& examples) const {
  require(!examples.empty(), "validation set is empty");
  double total = 0.0;
  for (const auto& ex : examples) {
    const auto [y1, y2] = extract_pair(state_.network, ex.mixture, ex.reference_1, ex.reference_2, config_.stft);
    total += si_sdr(ex.target_1, y1) - si_sdr(ex.target_1, ex.mixture);
    total += si_sdr(ex.target_2, y2) - si_sdr(ex.target_2, ex.mixture);
  }
  return total / (2.0 * static_cast<double>(examples.size()));
}

void Trainer::append_log(const TrainRecord& r, double wall_s) const {
  if (config_.checkpoint_dir.empty()) return;
  std::filesystem::create_directories(config_.checkpoint_dir);
  std::ofstream os(config_.checkpoint_dir / kLogFile, std::ios::app);
  json j = record_to_json(r);
  j["wall_s"] = wall_s;
  os << j.dump() << '\n';
}

void Trainer::run(const std::function<void(const TrainRecord&)>& on_record) {
  const auto t0 = std::chrono::steady_clock::now();
  const bool persist = !config_.checkpoint_dir.empty();
  if (persist) std::filesystem::create_directories(config_.checkpoint_dir);
  while (state_.step < config_.max_steps) {
    TrainRecord rec = step();
    const bool boundary = !rec.rejected && config_.validate_every > 0 && rec.step % config_.validate_every == 0;
    if (boundary && !valid_.empty()) {
      rec.valid_si_sdri = validate();
      state_.history.back().valid_si_sdri = rec.valid_si_sdri;
      if (!state_.best_valid_si_sdri || *rec.valid_si_sdri > *state_.best_valid_si_sdri) {
        state_.best_valid_si_sdri = rec.valid_si_sdri;
        if (persist) state_.network.save(config_.checkpoint_dir / kBestFile);
      }
    }
    append_log(rec, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (on_record) on_record(rec);
    if (boundary && persist) {
      save_state(config_.checkpoint_dir / kStateFile);
      state_.network.save(config_.checkpoint_dir / kLatestFile);
    }
  }
  if (persist) {
    save_state(config_.checkpoint_dir / kStateFile);
    state_.network.save(config_.checkpoint_dir / kLatestFile);
    if (!state_.best_valid_si_sdri) state_.network.save(config_.checkpoint_dir / kBestFile);
  }
}

void Trainer::save_state(const std::filesystem::path& path) const {
  auto& net = const_cast<Network<float>&>(state_.network);
  std::vector<std::pair<std::string, std::span<const float>>> entries;
  const auto params = net.parameters();
  for (const auto& p : params) entries.emplace_back("param." + p.name, p.value);
  for (const auto& b : net.buffers()) entries.emplace_back("buffer." + b.name, b.value);
  for (std::size_t i = 0; i < params.size(); ++i) {
    entries.emplace_back("adam_m." + params[i].name, std::span<const float>(state_.adam_m[i]));
    entries.emplace_back("adam_v." + params[i].name, std::span<const float>(state_.adam_v[i]));
  }
  json hist = json::array();
  for (const auto& r : state_.history) hist.push_back(record_to_json(r));
  json j = {{"step", state_.step},
            {"rng", rng_to_string(state_.rng)},
            {"order", state_.order},
            {"cursor", state_.cursor},
            {"rejected_in_row", state_.rejected_in_row},
            {"best_valid_si_sdri", state_.best_valid_si_sdri ? json(*state_.best_valid_si_sdri) : json(nullptr)},
            {"history", hist},
            {"model", json::parse(config_to_json(model_config_))},
            {"train", json::parse(train_config_to_json(config_))}};
  write_tensor_file<float>(path, "TRN", j.dump(), entries);
}

void Trainer::load_state(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kCheckpoint, "training checkpoint not found: " + path.string());
  const auto file = read_tensor_file<float>(path, "TRN");
  try {
    const json j = json::parse(file.json);
    if (!(config_from_json(j.at("model").dump()) == model_config_))
      fail(ErrorKind::kCheckpoint, "training checkpoint was written for a different model config");
    TrainState s;
    s.network = Network<float>(model_config_, 0);
    auto params = s.network.parameters();
    auto fill = [&](const std::string& name, std::span<float> dst) {
      const auto& src = file.get(name);
      if (src.size() != dst.size()) fail(ErrorKind::kCheckpoint, "tensor '" + name + "' has wrong size");
      std::copy(src.begin(), src.end(), dst.begin());
    };
    for (auto& p : params) fill("param." + p.name, p.value);
    for (auto& b : s.network.buffers()) fill("buffer." + b.name, b.value);
    for (auto& p : params) {
      s.adam_m.push_back(file.get("adam_m." + p.name));
      s.adam_v.push_back(file.get("adam_v." + p.name));
      if (s.adam_m.back().size() != p.value.size() || s.adam_v.back().size() != p.value.size())
        fail(ErrorKind::kCheckpoint, "optimizer moments for '" + p.name + "' have wrong size");
    }
    s.step = j.at("step").get<int>();
    s.rng = rng_from_string(j.at("rng").get<std::string>());
    s.order = j.at("order").get<std::vector<std::size_t>>();
    s.cursor = j.at("cursor").get<std::size_t>();
    s.rejected_in_row = j.at("rejected_in_row").get<int>();
    if (!j.at("best_valid_si_sdri").is_null()) s.best_valid_si_sdri = j.at("best_valid_si_sdri").get<double>();
    for (const auto& r : j.at("history")) s.history.push_back(record_from_json(r));
    for (std::size_t i : s.order)
      if (i >= train_.size()) fail(ErrorKind::kCheckpoint, "training checkpoint does not match the training set");
    state_ = std::move(s);
  } catch (const json::exception& e) {
    fail(ErrorKind::kCheckpoint, std::string("corrupt training checkpoint: ") + e.what());
  }
}

}  // namespace spx
