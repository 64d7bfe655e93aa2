#include "spx/objectives.hpp"

#include <cmath>
#include <numbers>

#include "spx/error.hpp"

namespace spx {

namespace {

void check_pair(std::span<const double> target, std::span<const double> estimate) {
  if (target.size() != estimate.size())
    fail(ErrorKind::kInvalidArgument, "si_sdr: target and estimate lengths differ (" +
                                          std::to_string(target.size()) + " vs " +
                                          std::to_string(estimate.size()) + ")");
}

struct Terms {
  double s_energy, dot, y_energy, a, b, guard;
};

Terms terms(std::span<const double> s, std::span<const double> y) {
  check_pair(s, y);
  double ss = 0.0, sy = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ss += s[i] * s[i];
    sy += s[i] * y[i];
    yy += y[i] * y[i];
  }
  if (!(ss > 0.0)) fail(ErrorKind::kInvalidArgument, "si_sdr: target is all zeros");
  // A = ||alpha s||^2, B = ||alpha s - y||^2 = E - A for the projection.
  const double a = sy * sy / ss;
  double b = 0.0;
  const double alpha = sy / ss;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = alpha * s[i] - y[i];
    b += r * r;
  }
  return {ss, sy, yy, a, b, kSiSdrEps * yy};
}

double value(const Terms& t, bool& clamped) {
  clamped = true;
  if (!(t.y_energy > 0.0)) return -kSiSdrCapDb;
  const double v = 10.0 * std::log10((t.a + t.guard) / (t.b + t.guard));
  if (v >= kSiSdrCapDb) return kSiSdrCapDb;
  if (v <= -kSiSdrCapDb) return -kSiSdrCapDb;
  clamped = false;
  return v;
}

}  // namespace

double si_sdr(std::span<const double> target, std::span<const double> estimate) {
  bool clamped = false;
  return value(terms(target, estimate), clamped);
}

double si_sdr(const AudioBuffer& target, const AudioBuffer& estimate) {
  return si_sdr(target.view(), estimate.view());
}

double si_sdr_with_grad(std::span<const double> s, std::span<const double> y, std::span<double> grad) {
  require(grad.size() == y.size(), "si_sdr gradient buffer size mismatch");
  const Terms t = terms(s, y);
  bool clamped = false;
  const double v = value(t, clamped);
  if (clamped) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return v;
  }
  // d/dy of 10 log10((A + eE) / (B + eE)) with dA = 2p s / S, dB = 2y - dA, dE = 2y.
  const double k = 10.0 / std::numbers::ln10;
  const double num = t.a + t.guard, den = t.b + t.guard;
  const double ps = t.dot / t.s_energy;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double da = 2.0 * ps * s[i];
    const double de = 2.0 * y[i];
    const double db = de - da;
    grad[i] = k * ((da + kSiSdrEps * de) / num - (db + kSiSdrEps * de) / den);
  }
  return v;
}

double pair_si_sdr(const AudioBuffer& s1, const AudioBuffer& e1, const AudioBuffer& s2, const AudioBuffer& e2) {
  return 0.5 * (si_sdr(s1, e1) + si_sdr(s2, e2));
}

double mse(std::span<const double> target, std::span<const double> estimate) {
  if (target.size() != estimate.size()) fail(ErrorKind::kInvalidArgument, "mse: size mismatch");
  if (target.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = estimate[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(target.size());
}

double ri_mse(const RiTensor& target, const RiTensor& estimate) {
  if (target.channels != estimate.channels || target.bins != estimate.bins || target.frames != estimate.frames)
    fail(ErrorKind::kInvalidArgument, "ri_mse: shape mismatch");
  return mse(target.data, estimate.data);
}

double pair_ri_mse(const RiTensor& t1, const RiTensor& e1, const RiTensor& t2, const RiTensor& e2) {
  return 0.5 * (ri_mse(t1, e1) + ri_mse(t2, e2));
}

void LossWeights::validate() const {
  if (!(beta_sisdr >= 0.0 && beta_sisdr <= 1.0 && beta_mse >= 0.0 && beta_mse <= 1.0) ||
      std::abs(beta_sisdr + beta_mse - 1.0) > 1e-9)
    fail(ErrorKind::kConfig, "loss weights must lie in [0,1] and sum to 1");
}

double combined_loss(double pair_sisdr, double pair_mse, const LossWeights& w) {
  return w.beta_sisdr * (-pair_sisdr) + w.beta_mse * pair_mse;
}

}  // namespace spx
