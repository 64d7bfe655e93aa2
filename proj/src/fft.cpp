#include "spx/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "spx/error.hpp"

namespace spx {

struct Fft::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  ~Plans() {
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

namespace {

// FFTW's planner is not thread-safe; execution with new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::shared_ptr<const Fft::Plans> plans_for(int size) {
  std::lock_guard lock(planner_mutex());
  static std::map<int, std::shared_ptr<const Fft::Plans>> cache;
  auto& slot = cache[size];
  if (!slot) {
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(size));
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    auto plans = std::make_shared<Fft::Plans>();
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    plans->forward = fftw_plan_dft_1d(size, p, p, FFTW_FORWARD, flags);
    plans->backward = fftw_plan_dft_1d(size, p, p, FFTW_BACKWARD, flags);
    if (!plans->forward || !plans->backward) fail(ErrorKind::kInvalidArgument, "FFTW could not plan this size");
    slot = std::move(plans);
  }
  return slot;
}

void execute(fftw_plan plan, std::span<std::complex<double>> data, int size) {
  require(static_cast<int>(data.size()) == size, "FFT buffer size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
}

}  // namespace

Fft::Fft(int size) : size_(size) {
  require(size > 0, "FFT size must be positive");
  plans_ = plans_for(size);
}

void Fft::forward(std::span<std::complex<double>> data) const { execute(plans_->forward, data, size_); }

void Fft::inverse(std::span<std::complex<double>> data) const {
  execute(plans_->backward, data, size_);
  const double scale = 1.0 / size_;
  for (auto& v : data) v *= scale;
}

}  // namespace spx
