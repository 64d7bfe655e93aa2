#include "spx/pipeline.hpp"

#include <cmath>

#include "spx/corpus.hpp"
#include "spx/error.hpp"
#include "spx/resample.hpp"

namespace spx {

namespace {

constexpr double kMaxLogMagnitude = 20.0;

std::complex<double> unit_phase(std::complex<double> x) {
  const double r = std::abs(x);
  return r > 0.0 ? x / r : std::complex<double>{};
}

}  // namespace

FeatureSpec FeatureSpec::for_model(const ModelConfig& cfg, const StftConfig& stft) {
  FeatureSpec spec;
  spec.stft = stft;
  spec.mode = cfg.feature_mode;
  spec.frame_multiple = cfg.spatial_multiple();
  return spec;
}

SignalFeatures compute_features(const AudioBuffer& audio, const FeatureSpec& spec) {
  require(!audio.empty(), "cannot compute features of an empty signal");
  SignalFeatures f;
  f.spec = stft(audio, spec.stft);
  f.channels = spec.channels();
  f.bins = f.spec.bins;
  f.frames = f.spec.frames;
  f.padded_frames = (f.frames + spec.frame_multiple - 1) / spec.frame_multiple * spec.frame_multiple;
  f.length = audio.size();
  const double fill = spec.mode == FeatureMode::kRI ? 0.0 : spec.log_floor_db / 20.0 * std::log(10.0);
  f.data.assign(static_cast<std::size_t>(f.channels) * f.bins * f.padded_frames, fill);
  auto idx = [&](int c, int k, int l) { return (static_cast<std::size_t>(c) * f.bins + k) * f.padded_frames + l; };
  if (spec.mode == FeatureMode::kRI) {
    for (int k = 0; k < f.bins; ++k)
      for (int l = 0; l < f.frames; ++l) {
        f.data[idx(0, k, l)] = f.spec.at(k, l).real();
        f.data[idx(1, k, l)] = f.spec.at(k, l).imag();
      }
  } else {
    const RealMatrix ls = log_spectrum(f.spec, spec.log_floor_db);
    for (int k = 0; k < f.bins; ++k)
      for (int l = 0; l < f.frames; ++l) f.data[idx(0, k, l)] = ls(k, l);
  }
  return f;
}

template <typename T>
void load_sample(const SignalFeatures& f, Tensor<T>& dst, int index) {
  require(dst.c == f.channels && dst.h == f.bins && dst.w == f.padded_frames, "feature/tensor shape mismatch");
  T* p = dst.sample(index);
  for (std::size_t i = 0; i < f.data.size(); ++i) p[i] = static_cast<T>(f.data[i]);
}

template <typename T>
Tensor<T> stack_features(const std::vector<const SignalFeatures*>& items) {
  require(!items.empty(), "empty feature batch");
  const auto& f0 = *items.front();
  Tensor<T> t(static_cast<int>(items.size()), f0.channels, f0.bins, f0.padded_frames);
  for (std::size_t i = 0; i < items.size(); ++i) load_sample(*items[i], t, static_cast<int>(i));
  return t;
}

namespace {

template <typename T>
ComplexSpectrogram output_spectrogram(const T* out, const FeatureSpec& spec, const SignalFeatures& mixture) {
  const int k_n = mixture.bins, l_n = mixture.frames, lp = mixture.padded_frames;
  ComplexSpectrogram est(k_n, l_n, spec.stft, mixture.length);
  for (int k = 0; k < k_n; ++k)
    for (int l = 0; l < l_n; ++l) {
      if (spec.mode == FeatureMode::kRI) {
        est.at(k, l) = {static_cast<double>(out[static_cast<std::size_t>(k) * lp + l]),
                        static_cast<double>(out[(static_cast<std::size_t>(k_n) + k) * lp + l])};
      } else {
        const double o = std::min<double>(out[static_cast<std::size_t>(k) * lp + l], kMaxLogMagnitude);
        est.at(k, l) = std::exp(o) * unit_phase(mixture.spec.at(k, l));
      }
    }
  return est;
}

}  // namespace

template <typename T>
AudioBuffer reconstruct(const T* out, const FeatureSpec& spec, const SignalFeatures& mixture, double sample_rate) {
  return istft(output_spectrogram(out, spec, mixture), mixture.length, sample_rate);
}

template <typename T>
SampleLoss sample_loss(const T* out, const FeatureSpec& spec, const SignalFeatures& mixture,
                       const SignalFeatures& target_features, const AudioBuffer& target, double sisdr_scale,
                       double mse_scale, T* grad) {
  require(target.size() == mixture.length, "target and mixture lengths differ");
  require(target_features.data.size() == mixture.data.size(), "target features do not match the mixture");
  const int c_n = mixture.channels, k_n = mixture.bins, l_n = mixture.frames, lp = mixture.padded_frames;
  auto idx = [&](int c, int k, int l) { return (static_cast<std::size_t>(c) * k_n + k) * lp + l; };

  SampleLoss loss;
  const ComplexSpectrogram est = output_spectrogram(out, spec, mixture);
  const AudioBuffer y = istft(est, mixture.length, target.sample_rate);
  std::vector<double> g_time(y.size());
  loss.si_sdr = si_sdr_with_grad(target.view(), y.view(), g_time);

  const double count = static_cast<double>(c_n) * k_n * l_n;
  double acc = 0.0;
  for (int c = 0; c < c_n; ++c)
    for (int k = 0; k < k_n; ++k)
      for (int l = 0; l < l_n; ++l) {
        const double d = static_cast<double>(out[idx(c, k, l)]) - target_features.data[idx(c, k, l)];
        acc += d * d;
      }
  loss.mse = acc / count;

  if (!grad) return loss;
  std::fill_n(grad, mixture.data.size(), T(0));
  const ComplexSpectrogram g_spec = istft_adjoint(g_time, spec.stft, l_n);
  for (int k = 0; k < k_n; ++k)
    for (int l = 0; l < l_n; ++l) {
      const std::complex<double> g = g_spec.at(k, l);
      if (spec.mode == FeatureMode::kRI) {
        grad[idx(0, k, l)] = static_cast<T>(sisdr_scale * g.real());
        grad[idx(1, k, l)] = static_cast<T>(sisdr_scale * g.imag());
      } else {
        const double o = out[idx(0, k, l)];
        if (o < kMaxLogMagnitude) {
          const std::complex<double> u = unit_phase(mixture.spec.at(k, l));
          grad[idx(0, k, l)] = static_cast<T>(sisdr_scale * (g.real() * u.real() + g.imag() * u.imag()) * std::exp(o));
        }
      }
    }
  for (int c = 0; c < c_n; ++c)
    for (int k = 0; k < k_n; ++k)
      for (int l = 0; l < l_n; ++l) {
        const double d = static_cast<double>(out[idx(c, k, l)]) - target_features.data[idx(c, k, l)];
        grad[idx(c, k, l)] += static_cast<T>(mse_scale * 2.0 * d / count);
      }
  return loss;
}

namespace {

AudioBuffer to_processing_rate(const AudioBuffer& a) {
  validate(a);
  return a.sample_rate == kProcessingRate ? a : resample(a, kProcessingRate);
}

AudioBuffer back_to(const AudioBuffer& y, double rate, std::size_t length) {
  AudioBuffer out = rate == kProcessingRate ? y : resample(y, rate);
  out.samples.resize(length, 0.0);
  out.sample_rate = rate;
  return out;
}

}  // namespace

std::pair<AudioBuffer, AudioBuffer> extract_pair(const Network<float>& net, const AudioBuffer& mixture,
                                                 const AudioBuffer& reference_1, const AudioBuffer& reference_2,
                                                 const StftConfig& stft) {
  const FeatureSpec spec = FeatureSpec::for_model(net.config(), stft);
  const AudioBuffer mix = to_processing_rate(mixture);
  const AudioBuffer r1 = fit_reference(to_processing_rate(reference_1), mix.size());
  const AudioBuffer r2 = fit_reference(to_processing_rate(reference_2), mix.size());
  const auto fm = compute_features(mix, spec);
  const auto f1 = compute_features(r1, spec);
  const auto f2 = compute_features(r2, spec);
  const auto xin = stack_features<float>({&fm, &fm});
  const auto rin = stack_features<float>({&f1, &f2});
  const auto out = net.infer(xin, rin);
  AudioBuffer y1 = reconstruct(out.sample(0), spec, fm, kProcessingRate);
  AudioBuffer y2 = reconstruct(out.sample(1), spec, fm, kProcessingRate);
  return {back_to(y1, mixture.sample_rate, mixture.size()), back_to(y2, mixture.sample_rate, mixture.size())};
}

AudioBuffer extract(const Network<float>& net, const AudioBuffer& mixture, const AudioBuffer& reference,
                    const StftConfig& stft) {
  const FeatureSpec spec = FeatureSpec::for_model(net.config(), stft);
  const AudioBuffer mix = to_processing_rate(mixture);
  const AudioBuffer ref = fit_reference(to_processing_rate(reference), mix.size());
  const auto fm = compute_features(mix, spec);
  const auto fr = compute_features(ref, spec);
  const auto out = net.infer(stack_features<float>({&fm}), stack_features<float>({&fr}));
  return back_to(reconstruct(out.sample(0), spec, fm, kProcessingRate), mixture.sample_rate, mixture.size());
}

#define SPX_INSTANTIATE(T)                                                                              \
  template void load_sample<T>(const SignalFeatures&, Tensor<T>&, int);                                 \
  template Tensor<T> stack_features<T>(const std::vector<const SignalFeatures*>&);                      \
  template AudioBuffer reconstruct<T>(const T*, const FeatureSpec&, const SignalFeatures&, double);     \
  template SampleLoss sample_loss<T>(const T*, const FeatureSpec&, const SignalFeatures&,               \
                                     const SignalFeatures&, const AudioBuffer&, double, double, T*);

SPX_INSTANTIATE(float)
SPX_INSTANTIATE(double)
#undef SPX_INSTANTIATE

}  // namespace spx
