#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <omp.h>

#include "spx/kernels.hpp"

namespace spx::kernels {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const Mat<T>>;

// col[(c*k + ky)*k + kx][oy*wo + ox] = x[c][oy*s - p + ky][ox*s - p + kx]
template <typename T>
void im2col(const T* x, int channels, int h, int w, const ConvGeometry& g, int ho, int wo, T* col) {
  const int k = g.kernel;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill_n(dst, wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix < 0 || ix >= w) ? T(0) : src[ix];
          }
        }
      }
}

// Adjoint of im2col: x += scatter(col).
template <typename T>
void col2im(const T* col, int channels, int h, int w, const ConvGeometry& g, int ho, int wo, T* x) {
  const int k = g.kernel;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          T* dst = x + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
}

// Per-sample channel sums, combined pairwise over the batch.
template <typename T>
double pair_sum(int n, const auto& per_sample) {
  double total = 0.0;
  int i = 0;
  for (; i + 1 < n; i += 2) total += per_sample(i) + per_sample(i + 1);
  if (i < n) total += per_sample(i);
  return total;
}

template <typename T>
double plane_sum(const T* p, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) s += p[i];
  return s;
}

template <typename T>
void accumulate_bias(const Tensor<T>& dy, std::span<T> dbias) {
  if (dbias.empty()) return;
#pragma omp parallel for schedule(static)
  for (int o = 0; o < dy.c; ++o) {
    const double s = pair_sum<T>(dy.n, [&](int i) { return plane_sum(dy.channel(i, o), dy.plane()); });
    dbias[o] += static_cast<T>(s);
  }
}

// dst(rows r) += a(r) * b^T + c(r) * d^T, with the two products formed
// separately so the pair order does not matter. Rows are split over threads.
template <typename T>
void accumulate_pair_product(MapMat<T> dst, const CMapMat<T>& a, const CMapMat<T>& b,
                             const CMapMat<T>* c, const CMapMat<T>* d) {
  const int rows = static_cast<int>(dst.rows());
  const int blocks = std::max(1, std::min(rows, omp_get_max_threads()));
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < blocks; ++blk) {
    const int r0 = rows * blk / blocks;
    const int r1 = rows * (blk + 1) / blocks;
    if (r1 <= r0) continue;
    Mat<T> pa = a.middleRows(r0, r1 - r0) * b.transpose();
    if (c) {
      Mat<T> pb = c->middleRows(r0, r1 - r0) * d->transpose();
      dst.middleRows(r0, r1 - r0) += pa + pb;
    } else {
      dst.middleRows(r0, r1 - r0) += pa;
    }
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                    const ConvGeometry& g, Tensor<T>& y) {
  require(x.c == g.in_channels, "conv2d: input channel mismatch");
  const int ho = g.conv_out(x.h), wo = g.conv_out(x.w);
  const int kk = g.in_channels * g.kernel * g.kernel;
  y = Tensor<T>(x.n, g.out_channels, ho, wo);
  CMapMat<T> wm(weight.data(), g.out_channels, kk);
#pragma omp parallel
  {
    std::vector<T> col(static_cast<std::size_t>(kk) * ho * wo);
#pragma omp for schedule(static)
    for (int i = 0; i < x.n; ++i) {
      im2col(x.sample(i), x.c, x.h, x.w, g, ho, wo, col.data());
      MapMat<T> ym(y.sample(i), g.out_channels, ho * wo);
      ym.noalias() = wm * CMapMat<T>(col.data(), kk, ho * wo);
      if (!bias.empty())
        for (int o = 0; o < g.out_channels; ++o) ym.row(o).array() += bias[o];
    }
  }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, std::span<const T> weight, const ConvGeometry& g,
                     const Tensor<T>& dy, Tensor<T>* dx, std::span<T> dweight, std::span<T> dbias) {
  const int ho = dy.h, wo = dy.w;
  const int kk = g.in_channels * g.kernel * g.kernel;
  const std::size_t col_size = static_cast<std::size_t>(kk) * ho * wo;
  CMapMat<T> wm(weight.data(), g.out_channels, kk);

  if (dx) {
    *dx = Tensor<T>(x.n, x.c, x.h, x.w);
#pragma omp parallel
    {
      Mat<T> dcol(kk, ho * wo);
#pragma omp for schedule(static)
      for (int i = 0; i < x.n; ++i) {
        dcol.noalias() = wm.transpose() * CMapMat<T>(dy.sample(i), g.out_channels, ho * wo);
        col2im(dcol.data(), x.c, x.h, x.w, g, ho, wo, dx->sample(i));
      }
    }
  }

  MapMat<T> dwm(dweight.data(), g.out_channels, kk);
  std::vector<T> col_a(col_size), col_b(col_size);
  for (int i = 0; i < x.n; i += 2) {
    im2col(x.sample(i), x.c, x.h, x.w, g, ho, wo, col_a.data());
    CMapMat<T> dya(dy.sample(i), g.out_channels, ho * wo);
    CMapMat<T> ca(col_a.data(), kk, ho * wo);
    if (i + 1 < x.n) {
      im2col(x.sample(i + 1), x.c, x.h, x.w, g, ho, wo, col_b.data());
      CMapMat<T> dyb(dy.sample(i + 1), g.out_channels, ho * wo);
      CMapMat<T> cb(col_b.data(), kk, ho * wo);
      accumulate_pair_product<T>(dwm, dya, ca, &dyb, &cb);
    } else {
      accumulate_pair_product<T>(dwm, dya, ca, nullptr, nullptr);
    }
  }
  accumulate_bias(dy, dbias);
}

template <typename T>
void conv_transpose2d_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                              const ConvGeometry& g, Tensor<T>& y) {
  require(x.c == g.in_channels, "conv_transpose2d: input channel mismatch");
  const int ho = g.transposed_out(x.h), wo = g.transposed_out(x.w);
  const int kk = g.out_channels * g.kernel * g.kernel;
  y = Tensor<T>(x.n, g.out_channels, ho, wo);
  CMapMat<T> wm(weight.data(), g.in_channels, kk);
#pragma omp parallel
  {
    Mat<T> col(kk, x.h * x.w);
#pragma omp for schedule(static)
    for (int i = 0; i < x.n; ++i) {
      col.noalias() = wm.transpose() * CMapMat<T>(x.sample(i), g.in_channels, x.h * x.w);
      T* ys = y.sample(i);
      if (!bias.empty())
        for (int o = 0; o < g.out_channels; ++o) std::fill_n(ys + o * y.plane(), y.plane(), bias[o]);
      col2im(col.data(), g.out_channels, ho, wo, g, x.h, x.w, ys);
    }
  }
}

template <typename T>
void conv_transpose2d_backward(const Tensor<T>& x, std::span<const T> weight, const ConvGeometry& g,
                               const Tensor<T>& dy, Tensor<T>* dx, std::span<T> dweight,
                               std::span<T> dbias) {
  const int hw = x.h * x.w;
  const int kk = g.out_channels * g.kernel * g.kernel;
  const std::size_t col_size = static_cast<std::size_t>(kk) * hw;
  CMapMat<T> wm(weight.data(), g.in_channels, kk);

  if (dx) {
    *dx = Tensor<T>(x.n, x.c, x.h, x.w);
#pragma omp parallel
    {
      std::vector<T> col(col_size);
#pragma omp for schedule(static)
      for (int i = 0; i < x.n; ++i) {
        im2col(dy.sample(i), g.out_channels, dy.h, dy.w, g, x.h, x.w, col.data());
        MapMat<T>(dx->sample(i), g.in_channels, hw).noalias() = wm * CMapMat<T>(col.data(), kk, hw);
      }
    }
  }

  MapMat<T> dwm(dweight.data(), g.in_channels, kk);
  std::vector<T> col_a(col_size), col_b(col_size);
  for (int i = 0; i < x.n; i += 2) {
    im2col(dy.sample(i), g.out_channels, dy.h, dy.w, g, x.h, x.w, col_a.data());
    CMapMat<T> xa(x.sample(i), g.in_channels, hw);
    CMapMat<T> ca(col_a.data(), kk, hw);
    if (i + 1 < x.n) {
      im2col(dy.sample(i + 1), g.out_channels, dy.h, dy.w, g, x.h, x.w, col_b.data());
      CMapMat<T> xb(x.sample(i + 1), g.in_channels, hw);
      CMapMat<T> cb(col_b.data(), kk, hw);
      accumulate_pair_product<T>(dwm, xa, ca, &xb, &cb);
    } else {
      accumulate_pair_product<T>(dwm, xa, ca, nullptr, nullptr);
    }
  }
  accumulate_bias(dy, dbias);
}

template <typename T>
BatchNormSaved<T> batchnorm_forward_train(const Tensor<T>& x, std::span<const T> gamma,
                                          std::span<const T> beta, Tensor<T>& xhat, Tensor<T>& y) {
  xhat = Tensor<T>(x.n, x.c, x.h, x.w);
  y = Tensor<T>(x.n, x.c, x.h, x.w);
  BatchNormSaved<T> saved{std::vector<T>(x.c), std::vector<T>(x.c), std::vector<T>(x.c)};
  const double count = static_cast<double>(x.n) * x.plane();
  const std::size_t len = x.plane();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < x.c; ++c) {
    const double mean = pair_sum<T>(x.n, [&](int i) { return plane_sum(x.channel(i, c), len); }) / count;
    const double var = pair_sum<T>(x.n, [&](int i) {
                         const T* p = x.channel(i, c);
                         double s = 0.0;
                         for (std::size_t j = 0; j < len; ++j) {
                           const double d = p[j] - mean;
                           s += d * d;
                         }
                         return s;
                       }) /
                       count;
    const double inv_std = 1.0 / std::sqrt(var + kBatchNormEps);
    saved.mean[c] = static_cast<T>(mean);
    saved.var[c] = static_cast<T>(var);
    saved.inv_std[c] = static_cast<T>(inv_std);
    for (int i = 0; i < x.n; ++i) {
      const T* p = x.channel(i, c);
      T* xh = xhat.channel(i, c);
      T* yo = y.channel(i, c);
      for (std::size_t j = 0; j < len; ++j) {
        xh[j] = static_cast<T>((p[j] - mean) * inv_std);
        yo[j] = gamma[c] * xh[j] + beta[c];
      }
    }
  }
  return saved;
}

template <typename T>
void batchnorm_forward_eval(const Tensor<T>& x, std::span<const T> gamma, std::span<const T> beta,
                            std::span<const T> running_mean, std::span<const T> running_var,
                            Tensor<T>& y) {
  y = Tensor<T>(x.n, x.c, x.h, x.w);
  const std::size_t len = x.plane();
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c) {
      const double inv_std = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + kBatchNormEps);
      const T scale = static_cast<T>(gamma[c] * inv_std);
      const T shift = static_cast<T>(beta[c] - gamma[c] * running_mean[c] * inv_std);
      const T* p = x.channel(i, c);
      T* yo = y.channel(i, c);
      for (std::size_t j = 0; j < len; ++j) yo[j] = scale * p[j] + shift;
    }
}

template <typename T>
void batchnorm_backward(const Tensor<T>& dy, const Tensor<T>& xhat, std::span<const T> gamma,
                        std::span<const T> inv_std, Tensor<T>& dx, std::span<T> dgamma,
                        std::span<T> dbeta) {
  dx = Tensor<T>(dy.n, dy.c, dy.h, dy.w);
  const double count = static_cast<double>(dy.n) * dy.plane();
  const std::size_t len = dy.plane();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < dy.c; ++c) {
    const double sdy = pair_sum<T>(dy.n, [&](int i) { return plane_sum(dy.channel(i, c), len); });
    const double sdyx = pair_sum<T>(dy.n, [&](int i) {
      const T* g = dy.channel(i, c);
      const T* xh = xhat.channel(i, c);
      double s = 0.0;
      for (std::size_t j = 0; j < len; ++j) s += static_cast<double>(g[j]) * xh[j];
      return s;
    });
    dgamma[c] += static_cast<T>(sdyx);
    dbeta[c] += static_cast<T>(sdy);
    const double scale = gamma[c] * static_cast<double>(inv_std[c]) / count;
    for (int i = 0; i < dy.n; ++i) {
      const T* g = dy.channel(i, c);
      const T* xh = xhat.channel(i, c);
      T* d = dx.channel(i, c);
      for (std::size_t j = 0; j < len; ++j) d[j] = static_cast<T>(scale * (count * g[j] - sdy - xh[j] * sdyx));
    }
  }
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  T* p = x.data.data();
  const std::size_t n = x.size();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) p[i] = p[i] > T(0) ? p[i] : T(0);
}

template <typename T>
void relu_backward_inplace(const Tensor<T>& y, Tensor<T>& dy) {
  const T* p = y.data.data();
  T* d = dy.data.data();
  const std::size_t n = y.size();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i)
    if (!(p[i] > T(0))) d[i] = T(0);
}

#define SPX_INSTANTIATE(T)                                                                          \
  template void conv2d_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>,         \
                                  const ConvGeometry&, Tensor<T>&);                                 \
  template void conv2d_backward<T>(const Tensor<T>&, std::span<const T>, const ConvGeometry&,       \
                                   const Tensor<T>&, Tensor<T>*, std::span<T>, std::span<T>);       \
  template void conv_transpose2d_forward<T>(const Tensor<T>&, std::span<const T>,                   \
                                            std::span<const T>, const ConvGeometry&, Tensor<T>&);   \
  template void conv_transpose2d_backward<T>(const Tensor<T>&, std::span<const T>,                  \
                                             const ConvGeometry&, const Tensor<T>&, Tensor<T>*,     \
                                             std::span<T>, std::span<T>);                           \
  template BatchNormSaved<T> batchnorm_forward_train<T>(const Tensor<T>&, std::span<const T>,       \
                                                        std::span<const T>, Tensor<T>&, Tensor<T>&); \
  template void batchnorm_forward_eval<T>(const Tensor<T>&, std::span<const T>, std::span<const T>, \
                                          std::span<const T>, std::span<const T>, Tensor<T>&);      \
  template void batchnorm_backward<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>,       \
                                      std::span<const T>, Tensor<T>&, std::span<T>, std::span<T>);  \
  template void relu_inplace<T>(Tensor<T>&);                                                        \
  template void relu_backward_inplace<T>(const Tensor<T>&, Tensor<T>&);

SPX_INSTANTIATE(float)
SPX_INSTANTIATE(double)
#undef SPX_INSTANTIATE

}  // namespace spx::kernels
