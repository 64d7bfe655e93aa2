#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spx/corpus.hpp"
#include "spx/model.hpp"
#include "spx/objectives.hpp"
#include "spx/stft.hpp"

namespace spx {

struct TrainConfig {
  double learning_rate = 0.001;
  /// Examples per batch; each contributes two network samples (one per speaker).
  int batch_size = 16;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_steps = 1000;
  /// 0 disables periodic validation.
  int validate_every = 100;
  std::filesystem::path checkpoint_dir;
  std::uint64_t seed = 0;
  LossWeights weights;
  DurationRange duration_range{2.0, 8.0};
  bool clip_gradients = false;
  double clip_norm = 5.0;
  /// Consecutive non-finite steps tolerated before aborting.
  int max_rejected_steps = 5;
  StftConfig stft;

  void validate() const;
};

std::string train_config_to_json(const TrainConfig& cfg);

struct TrainRecord {
  int step = 0;
  LossBreakdown loss;
  double duration_s = 0.0;
  bool rejected = false;
  std::optional<double> valid_si_sdri;
};

/// Everything needed to continue a run exactly.
struct TrainState {
  int step = 0;
  Network<float> network;
  std::vector<std::vector<float>> adam_m, adam_v;  // per parameter tensor
  std::mt19937_64 rng;
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  int rejected_in_row = 0;
  std::optional<double> best_valid_si_sdri;
  std::vector<TrainRecord> history;
};

/// Cropped, equal-length signals for one training example.
struct TrainItem {
  AudioBuffer mixture, target_1, target_2, reference_1, reference_2;
};

class Trainer {
 public:
  Trainer(const ModelConfig& model, const TrainConfig& config, std::vector<MixtureExample> train,
          std::vector<MixtureExample> valid = {});

  /// Draws the next batch and applies one Adam update. A non-finite loss
  /// leaves parameters untouched (record.rejected) and throws kTrainingStep
  /// after max_rejected_steps consecutive rejections.
  TrainRecord step();
  /// One update on an explicit batch (all items of equal length).
  TrainRecord step_on(const std::vector<TrainItem>& batch);
  /// Loss and gradients without an update; returns the breakdown.
  LossBreakdown loss_and_gradients(const std::vector<TrainItem>& batch);

  /// Evaluation-mode mean SI-SDRi over both speakers of every example.
  double validate(const std::vector<MixtureExample>& examples) const;
  double validate() const { return validate(valid_); }

  /// Runs until max_steps, validating and checkpointing on schedule. The
  /// callback sees every record (and validation results) as they happen.
  void run(const std::function<void(const TrainRecord&)>& on_record = {});

  void save_state(const std::filesystem::path& path) const;
  void load_state(const std::filesystem::path& path);

  std::vector<TrainItem> next_batch();

  const TrainState& state() const { return state_; }
  TrainState& state() { return state_; }
  Network<float>& network() { return state_.network; }
  const TrainConfig& config() const { return config_; }

  static constexpr const char* kStateFile = "state.spxt";
  static constexpr const char* kBestFile = "best.spxn";
  static constexpr const char* kLatestFile = "model.spxn";
  static constexpr const char* kLogFile = "train_log.jsonl";

 private:
  void apply_adam();
  void append_log(const TrainRecord& r, double wall_s) const;

  ModelConfig model_config_;
  TrainConfig config_;
  std::vector<MixtureExample> train_, valid_;
  TrainState state_;
};

}  // namespace spx
