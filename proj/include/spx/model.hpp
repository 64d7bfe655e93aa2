#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spx/kernels.hpp"
#include "spx/tensor.hpp"

namespace spx {

enum class FeatureMode { kRI, kLS };

std::string to_string(FeatureMode m);
FeatureMode parse_feature_mode(const std::string& s);

struct ChannelPair {
  int in = 0;
  int out = 0;
  bool operator==(const ChannelPair&) const = default;
};

/// Siamese-Unet layout. The encoder and decoder plans list (in, out)
/// channels per stride-2 stage; decoder stage 0 reads the concatenated
/// bottlenecks, stage j >= 1 reads [decoder j-1 | mixture skip | reference skip].
struct ModelConfig {
  FeatureMode feature_mode = FeatureMode::kRI;
  int stem_channels = 64;
  std::vector<ChannelPair> encoder_plan;
  std::vector<ChannelPair> decoder_plan;
  int kernel = 4;
  int stride = 2;
  int padding = 1;
  bool share_encoder_weights = false;

  /// Full-width plan with decoder in-channels derived from the skip rule.
  static ModelConfig standard(FeatureMode mode = FeatureMode::kRI);
  /// Builds both plans from output widths. `decoder_outs` lists the first
  /// depth-1 decoder stages; the last stage always emits the feature count.
  /// In-channels follow the skip rule.
  static ModelConfig from_widths(int stem, const std::vector<int>& encoder_outs,
                                 const std::vector<int>& decoder_outs,
                                 FeatureMode mode = FeatureMode::kRI);
  /// Every width divided by `divisor` (at least 1), plans rebuilt consistently.
  ModelConfig scaled(int divisor) const;

  int depth() const { return static_cast<int>(encoder_plan.size()); }
  int feature_channels() const { return feature_mode == FeatureMode::kRI ? 2 : 1; }
  /// Spatial dims must be multiples of this.
  int spatial_multiple() const { return 1 << depth(); }

  /// Throws kConfig on an inconsistent plan.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Closed-form parameter count (k^2*cin*cout + cout per conv, 2*cout per BN).
std::int64_t count_parameters(const ModelConfig& cfg);

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

template <typename T>
struct ConvLayer {
  ConvGeometry geom;
  bool transposed = false;
  std::vector<T> weight, bias, grad_weight, grad_bias;
};

template <typename T>
struct BatchNormLayer {
  int channels = 0;
  std::vector<T> gamma, beta, grad_gamma, grad_beta;
  std::vector<T> running_mean, running_var;
};

template <typename T>
struct Stage {
  ConvLayer<T> conv;
  BatchNormLayer<T> bn;
  bool relu = true;
};

template <typename T>
struct EncoderHead {
  ConvLayer<T> stem;
  std::vector<Stage<T>> stages;
};

template <typename T>
struct ParamView {
  std::string name;
  std::span<T> value;
  std::span<T> grad;  // empty for buffers
};

template <typename T>
struct StageCache {
  Tensor<T> input;  // decoder stages only (encoder inputs are the previous outputs)
  Tensor<T> xhat;
  Tensor<T> output;
  std::vector<T> inv_std;
};

template <typename T>
struct HeadCache {
  Tensor<T> input;
  Tensor<T> stem_out;
  std::vector<StageCache<T>> enc;
};

template <typename T>
struct ForwardCache {
  HeadCache<T> mix, ref;
  std::vector<StageCache<T>> dec;
};

constexpr double kBatchNormMomentum = 0.1;

template <typename T>
class Network {
 public:
  Network() = default;
  /// Builds with PyTorch-style default init: U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  /// for weights and biases, BN gamma=1 beta=0.
  Network(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  /// Inputs are (N, C, H, W) with C the feature channel count and H, W
  /// multiples of 2^depth. Training mode uses batch statistics, updates the
  /// running statistics and fills `cache` for backward.
  Tensor<T> forward(const Tensor<T>& mix, const Tensor<T>& ref, bool training,
                    ForwardCache<T>* cache = nullptr);
  /// Evaluation-mode forward; read-only.
  Tensor<T> infer(const Tensor<T>& mix, const Tensor<T>& ref) const;
  /// Accumulates parameter gradients for dL/d(output).
  void backward(const ForwardCache<T>& cache, const Tensor<T>& grad_out);

  void zero_grad();
  std::vector<ParamView<T>> parameters();
  std::vector<ParamView<T>> buffers();
  std::int64_t parameter_count() const;

  void save(const std::filesystem::path& path) const;
  static Network load(const std::filesystem::path& path);

  bool operator==(const Network& o) const;

  EncoderHead<T>& head(int i) { return heads_[config_.share_encoder_weights ? 0 : i]; }
  const EncoderHead<T>& head(int i) const { return heads_[config_.share_encoder_weights ? 0 : i]; }
  std::vector<Stage<T>>& decoder() { return decoder_; }
  ConvLayer<T>& output_layer() { return out_; }

 private:
  template <typename Self, typename Fn>
  static void visit(Self& self, Fn&& fn);

  Tensor<T> run(const Tensor<T>& mix, const Tensor<T>& ref, bool training, ForwardCache<T>* cache);

  ModelConfig config_;
  std::vector<EncoderHead<T>> heads_;
  std::vector<Stage<T>> decoder_;
  ConvLayer<T> out_;
};

constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary tensor table shared by network and trainer checkpoints:
/// magic "SPX" + kind (8 bytes, zero padded), u32 version, u32 scalar size,
/// u64 json length + json text, u64 entry count, then per entry u32 name
/// length + name, u64 element count and the little-endian values.
template <typename T>
struct TensorFile {
  std::string json;
  std::vector<std::pair<std::string, std::vector<T>>> entries;

  const std::vector<T>& get(const std::string& name) const;
};

template <typename T>
void write_tensor_file(const std::filesystem::path& path, const std::string& kind,
                       const std::string& json,
                       const std::vector<std::pair<std::string, std::span<const T>>>& entries);
/// Throws kCheckpoint on a bad magic, scalar size or truncation and
/// kUnsupportedVersion on a version mismatch.
template <typename T>
TensorFile<T> read_tensor_file(const std::filesystem::path& path, const std::string& kind);

}  // namespace spx
