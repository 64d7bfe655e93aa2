// Serial reference vs OpenMP/GEMM kernels on representative layer shapes.
//   spx_bench [repetitions]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>

#include "spx/kernels.hpp"

using namespace spx;

namespace {

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / reps;
}

Tensor<float> random_tensor(std::mt19937_64& rng, int n, int c, int h, int w) {
  std::normal_distribution<float> nd;
  Tensor<float> t(n, c, h, w);
  for (auto& v : t.data) v = nd(rng);
  return t;
}

std::vector<float> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<float> nd(0.0f, 0.05f);
  std::vector<float> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

void row(const char* op, const char* shape, double ref, double par) {
  std::printf("%-18s %-26s %10.2f %10.2f %8.1fx\n", op, shape, ref, par, ref / par);
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 3;
  std::mt19937_64 rng(1);
  std::printf("OpenMP threads: %d, repetitions: %d\n", omp_get_max_threads(), reps);
  std::printf("%-18s %-26s %10s %10s %9s\n", "kernel", "shape", "ref ms", "par ms", "speedup");

  struct Shape {
    const char* label;
    int n, cin, cout, size;
  };
  const Shape shapes[] = {
      {"N4 4->8 @128x128", 4, 4, 8, 128},
      {"N4 64->128 @64x64", 4, 64, 128, 64},
      {"N4 256->512 @16x16", 4, 256, 512, 16},
  };
  for (const auto& s : shapes) {
    const ConvGeometry g{s.cin, s.cout, 4, 2, 1};
    const auto x = random_tensor(rng, s.n, s.cin, s.size, s.size);
    const auto w = random_vec(rng, static_cast<std::size_t>(s.cout) * s.cin * 16);
    const auto b = random_vec(rng, s.cout);
    const int o = g.conv_out(s.size);
    Tensor<float> y(s.n, s.cout, o, o);
    const auto dy = random_tensor(rng, s.n, s.cout, o, o);
    Tensor<float> dx(s.n, s.cin, s.size, s.size);
    std::vector<float> dw(w.size()), db(b.size());

    row("conv fwd", s.label, time_ms(reps, [&] { reference::conv2d_forward<float>(x, w, b, g, y); }),
        time_ms(reps, [&] { kernels::conv2d_forward<float>(x, w, b, g, y); }));
    row("conv bwd", s.label,
        time_ms(reps, [&] { reference::conv2d_backward<float>(x, w, g, dy, &dx, dw, db); }),
        time_ms(reps, [&] { kernels::conv2d_backward<float>(x, w, g, dy, &dx, dw, db); }));

    // Transposed layer mapping the conv output back up: [in=cout][out=cin].
    const ConvGeometry gt{s.cout, s.cin, 4, 2, 1};
    Tensor<float> up(s.n, s.cin, s.size, s.size);
    const auto dup = random_tensor(rng, s.n, s.cin, s.size, s.size);
    Tensor<float> dyt(s.n, s.cout, o, o);
    const auto bt = random_vec(rng, s.cin);
    std::vector<float> dbt(bt.size());
    row("convT fwd", s.label, time_ms(reps, [&] { reference::conv_transpose2d_forward<float>(dy, w, bt, gt, up); }),
        time_ms(reps, [&] { kernels::conv_transpose2d_forward<float>(dy, w, bt, gt, up); }));
    row("convT bwd", s.label,
        time_ms(reps, [&] { reference::conv_transpose2d_backward<float>(dy, w, gt, dup, &dyt, dw, dbt); }),
        time_ms(reps, [&] { kernels::conv_transpose2d_backward<float>(dy, w, gt, dup, &dyt, dw, dbt); }));

    const std::vector<float> gamma(s.cout, 1.0f), beta(s.cout, 0.0f);
    Tensor<float> xhat(y.n, y.c, y.h, y.w), bn(y.n, y.c, y.h, y.w), dbn(y.n, y.c, y.h, y.w);
    std::vector<float> dgamma(s.cout), dbeta(s.cout);
    BatchNormSaved<float> saved;
    row("batchnorm fwd", s.label,
        time_ms(reps, [&] { saved = reference::batchnorm_forward_train<float>(y, gamma, beta, xhat, bn); }),
        time_ms(reps, [&] { saved = kernels::batchnorm_forward_train<float>(y, gamma, beta, xhat, bn); }));
    row("batchnorm bwd", s.label,
        time_ms(reps,
                [&] { reference::batchnorm_backward<float>(dy, xhat, gamma, saved.inv_std, dbn, dgamma, dbeta); }),
        time_ms(reps,
                [&] { kernels::batchnorm_backward<float>(dy, xhat, gamma, saved.inv_std, dbn, dgamma, dbeta); }));
  }
}
