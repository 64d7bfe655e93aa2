#pragma once

#include <exception>

namespace spx {

/// Exceptions must not escape an OpenMP region. Wrap the loop body with
/// run() and call rethrow() after the region; the first captured error wins.
class ExceptionSlot {
 public:
  template <typename Fn>
  void run(Fn&& fn) noexcept {
    try {
      fn();
    } catch (...) {
#pragma omp critical(spx_exception_slot)
      if (!error_) error_ = std::current_exception();
    }
  }

  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};

}  // namespace spx
