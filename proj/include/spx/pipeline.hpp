#pragma once

#include <cstddef>
#include <vector>

#include "spx/audio.hpp"
#include "spx/features.hpp"
#include "spx/model.hpp"
#include "spx/objectives.hpp"

namespace spx {

/// How waveforms become network tensors and back.
struct FeatureSpec {
  StftConfig stft;
  FeatureMode mode = FeatureMode::kRI;
  double log_floor_db = kDefaultLogFloorDb;
  /// Frame-axis padding multiple; the network needs 2^depth.
  int frame_multiple = 128;

  int channels() const { return mode == FeatureMode::kRI ? 2 : 1; }
  static FeatureSpec for_model(const ModelConfig& cfg, const StftConfig& stft = {});
};

/// Network-ready features of one signal: channels x bins x padded_frames.
/// Padding frames hold 0 (RI) or the log floor (LS).
struct SignalFeatures {
  int channels = 0;
  int bins = 0;
  int frames = 0;
  int padded_frames = 0;
  std::vector<double> data;
  ComplexSpectrogram spec;
  std::size_t length = 0;

  double at(int c, int k, int l) const {
    return data[(static_cast<std::size_t>(c) * bins + k) * padded_frames + l];
  }
};

SignalFeatures compute_features(const AudioBuffer& audio, const FeatureSpec& spec);

/// Copies features into sample `index` of `dst` (allocated by the caller).
template <typename T>
void load_sample(const SignalFeatures& f, Tensor<T>& dst, int index);

/// Builds a batch tensor from several equally shaped feature sets.
template <typename T>
Tensor<T> stack_features(const std::vector<const SignalFeatures*>& items);

/// Waveform from one output sample (C x K x Lpad). LS outputs are
/// exponentiated and combined with the mixture phase.
template <typename T>
AudioBuffer reconstruct(const T* out, const FeatureSpec& spec, const SignalFeatures& mixture,
                        double sample_rate);

struct SampleLoss {
  double si_sdr = 0.0;
  double mse = 0.0;
};

/// SI-SDR of the reconstructed estimate against `target` and the feature
/// MSE over the unpadded frames. When `grad` is non-null it receives
/// sisdr_scale * d(si_sdr)/d(out) + mse_scale * d(mse)/d(out).
template <typename T>
SampleLoss sample_loss(const T* out, const FeatureSpec& spec, const SignalFeatures& mixture,
                       const SignalFeatures& target_features, const AudioBuffer& target,
                       double sisdr_scale, double mse_scale, T* grad);

/// Extraction for one (mixture, reference) pair at the processing rate. The
/// reference is tiled or truncated to the mixture length.
AudioBuffer extract(const Network<float>& net, const AudioBuffer& mixture, const AudioBuffer& reference,
                    const StftConfig& stft = {});

/// Both speakers of one example in a single batch of two.
std::pair<AudioBuffer, AudioBuffer> extract_pair(const Network<float>& net, const AudioBuffer& mixture,
                                                 const AudioBuffer& reference_1,
                                                 const AudioBuffer& reference_2,
                                                 const StftConfig& stft = {});

}  // namespace spx
