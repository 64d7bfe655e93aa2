#pragma once

#include <span>

#include "spx/audio.hpp"
#include "spx/features.hpp"

namespace spx {

constexpr double kSiSdrCapDb = 100.0;
/// Relative guard: energies are offset by kSiSdrEps * ||estimate||^2.
constexpr double kSiSdrEps = 1e-10;

/// 10 log10(||a s||^2 / ||a s - y||^2) with a = <y,s>/<s,s>, no mean
/// removal, clamped to +-kSiSdrCapDb. Throws kInvalidArgument on a zero
/// target or a length mismatch.
double si_sdr(std::span<const double> target, std::span<const double> estimate);
double si_sdr(const AudioBuffer& target, const AudioBuffer& estimate);

/// Same value; writes d si_sdr / d estimate into `grad` (zero when clamped).
double si_sdr_with_grad(std::span<const double> target, std::span<const double> estimate,
                        std::span<double> grad);

double pair_si_sdr(const AudioBuffer& s1, const AudioBuffer& e1, const AudioBuffer& s2,
                   const AudioBuffer& e2);

/// Mean squared difference over all entries.
double ri_mse(const RiTensor& target, const RiTensor& estimate);
double mse(std::span<const double> target, std::span<const double> estimate);
double pair_ri_mse(const RiTensor& t1, const RiTensor& e1, const RiTensor& t2, const RiTensor& e2);

struct LossWeights {
  double beta_sisdr = 0.75;
  double beta_mse = 0.25;
  /// Throws kConfig unless both are in [0, 1] and sum to 1.
  void validate() const;
};

struct LossBreakdown {
  double si_sdr_pair = 0.0;
  double mse_pair = 0.0;
  double combined = 0.0;
};

/// beta_sisdr * (-pair_sisdr) + beta_mse * pair_mse; minimizing it maximizes SI-SDR.
double combined_loss(double pair_sisdr, double pair_mse, const LossWeights& w);

}  // namespace spx
