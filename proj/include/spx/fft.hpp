#pragma once

#include <complex>
#include <memory>
#include <span>

namespace spx {

/// Complex FFT of a fixed size backed by FFTW. Plans are cached per size and
/// built with FFTW_ESTIMATE, so results are reproducible run to run; execute
/// is safe to call from several threads. The forward transform is
/// un-normalized; inverse() applies the 1/N factor.
class Fft {
 public:
  explicit Fft(int size);

  int size() const { return size_; }
  void forward(std::span<std::complex<double>> data) const;
  void inverse(std::span<std::complex<double>> data) const;

  struct Plans;

 private:
  int size_;
  std::shared_ptr<const Plans> plans_;
};

}  // namespace spx
