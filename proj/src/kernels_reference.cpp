#include <cmath>

#include "spx/kernels.hpp"

namespace spx::reference {

template <typename T>
void conv2d_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                    const ConvGeometry& g, Tensor<T>& y) {
  const int k = g.kernel;
  y = Tensor<T>(x.n, g.out_channels, g.conv_out(x.h), g.conv_out(x.w));
  for (int n = 0; n < x.n; ++n)
    for (int o = 0; o < g.out_channels; ++o)
      for (int oy = 0; oy < y.h; ++oy)
        for (int ox = 0; ox < y.w; ++ox) {
          T acc = bias.empty() ? T(0) : bias[o];
          for (int c = 0; c < g.in_channels; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * g.stride - g.padding + ky;
                const int ix = ox * g.stride - g.padding + kx;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                acc += weight[((o * g.in_channels + c) * k + ky) * k + kx] * x.at(n, c, iy, ix);
              }
          y.at(n, o, oy, ox) = acc;
        }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, std::span<const T> weight, const ConvGeometry& g,
                     const Tensor<T>& dy, Tensor<T>* dx, std::span<T> dweight, std::span<T> dbias) {
  const int k = g.kernel;
  if (dx) *dx = Tensor<T>(x.n, x.c, x.h, x.w);
  for (int n = 0; n < x.n; ++n)
    for (int o = 0; o < g.out_channels; ++o)
      for (int oy = 0; oy < dy.h; ++oy)
        for (int ox = 0; ox < dy.w; ++ox) {
          const T d = dy.at(n, o, oy, ox);
          if (!dbias.empty()) dbias[o] += d;
          for (int c = 0; c < g.in_channels; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * g.stride - g.padding + ky;
                const int ix = ox * g.stride - g.padding + kx;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                const std::size_t wi = ((o * g.in_channels + c) * k + ky) * k + kx;
                dweight[wi] += d * x.at(n, c, iy, ix);
                if (dx) dx->at(n, c, iy, ix) += d * weight[wi];
              }
        }
}

template <typename T>
void conv_transpose2d_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                              const ConvGeometry& g, Tensor<T>& y) {
  const int k = g.kernel;
  y = Tensor<T>(x.n, g.out_channels, g.transposed_out(x.h), g.transposed_out(x.w));
  for (int n = 0; n < x.n; ++n) {
    for (int o = 0; o < g.out_channels; ++o) {
      const T b = bias.empty() ? T(0) : bias[o];
      for (int i = 0; i < y.h * y.w; ++i) y.channel(n, o)[i] = b;
    }
    for (int c = 0; c < g.in_channels; ++c)
      for (int iy = 0; iy < x.h; ++iy)
        for (int ix = 0; ix < x.w; ++ix) {
          const T v = x.at(n, c, iy, ix);
          for (int o = 0; o < g.out_channels; ++o)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int oy = iy * g.stride - g.padding + ky;
                const int ox = ix * g.stride - g.padding + kx;
                if (oy < 0 || oy >= y.h || ox < 0 || ox >= y.w) continue;
                y.at(n, o, oy, ox) += weight[((c * g.out_channels + o) * k + ky) * k + kx] * v;
              }
        }
  }
}

template <typename T>
void conv_transpose2d_backward(const Tensor<T>& x, std::span<const T> weight, const ConvGeometry& g,
                               const Tensor<T>& dy, Tensor<T>* dx, std::span<T> dweight,
                               std::span<T> dbias) {
  const int k = g.kernel;
  if (dx) *dx = Tensor<T>(x.n, x.c, x.h, x.w);
  for (int n = 0; n < x.n; ++n) {
    if (!dbias.empty()) {
      for (int o = 0; o < g.out_channels; ++o)
        for (int i = 0; i < dy.h * dy.w; ++i) dbias[o] += dy.channel(n, o)[i];
    }
    for (int c = 0; c < g.in_channels; ++c)
      for (int iy = 0; iy < x.h; ++iy)
        for (int ix = 0; ix < x.w; ++ix)
          for (int o = 0; o < g.out_channels; ++o)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int oy = iy * g.stride - g.padding + ky;
                const int ox = ix * g.stride - g.padding + kx;
                if (oy < 0 || oy >= dy.h || ox < 0 || ox >= dy.w) continue;
                const std::size_t wi = ((c * g.out_channels + o) * k + ky) * k + kx;
                const T d = dy.at(n, o, oy, ox);
                dweight[wi] += x.at(n, c, iy, ix) * d;
                if (dx) dx->at(n, c, iy, ix) += weight[wi] * d;
              }
  }
}

template <typename T>
BatchNormSaved<T> batchnorm_forward_train(const Tensor<T>& x, std::span<const T> gamma,
                                          std::span<const T> beta, Tensor<T>& xhat, Tensor<T>& y) {
  xhat = Tensor<T>(x.n, x.c, x.h, x.w);
  y = Tensor<T>(x.n, x.c, x.h, x.w);
  BatchNormSaved<T> saved{std::vector<T>(x.c), std::vector<T>(x.c), std::vector<T>(x.c)};
  const double count = static_cast<double>(x.n) * x.plane();
  for (int c = 0; c < x.c; ++c) {
    double sum = 0.0;
    for (int n = 0; n < x.n; ++n)
      for (std::size_t i = 0; i < x.plane(); ++i) sum += x.channel(n, c)[i];
    const double mean = sum / count;
    double var = 0.0;
    for (int n = 0; n < x.n; ++n)
      for (std::size_t i = 0; i < x.plane(); ++i) {
        const double d = x.channel(n, c)[i] - mean;
        var += d * d;
      }
    var /= count;
    const double inv_std = 1.0 / std::sqrt(var + kBatchNormEps);
    saved.mean[c] = static_cast<T>(mean);
    saved.var[c] = static_cast<T>(var);
    saved.inv_std[c] = static_cast<T>(inv_std);
    for (int n = 0; n < x.n; ++n)
      for (std::size_t i = 0; i < x.plane(); ++i) {
        const T xh = static_cast<T>((x.channel(n, c)[i] - mean) * inv_std);
        xhat.channel(n, c)[i] = xh;
        y.channel(n, c)[i] = gamma[c] * xh + beta[c];
      }
  }
  return saved;
}

template <typename T>
void batchnorm_backward(const Tensor<T>& dy, const Tensor<T>& xhat, std::span<const T> gamma,
                        std::span<const T> inv_std, Tensor<T>& dx, std::span<T> dgamma,
                        std::span<T> dbeta) {
  dx = Tensor<T>(dy.n, dy.c, dy.h, dy.w);
  const double count = static_cast<double>(dy.n) * dy.plane();
  for (int c = 0; c < dy.c; ++c) {
    double sdy = 0.0, sdyx = 0.0;
    for (int n = 0; n < dy.n; ++n)
      for (std::size_t i = 0; i < dy.plane(); ++i) {
        sdy += dy.channel(n, c)[i];
        sdyx += dy.channel(n, c)[i] * xhat.channel(n, c)[i];
      }
    dgamma[c] += static_cast<T>(sdyx);
    dbeta[c] += static_cast<T>(sdy);
    const double scale = gamma[c] * inv_std[c] / count;
    for (int n = 0; n < dy.n; ++n)
      for (std::size_t i = 0; i < dy.plane(); ++i) {
        dx.channel(n, c)[i] = static_cast<T>(
            scale * (count * dy.channel(n, c)[i] - sdy - xhat.channel(n, c)[i] * sdyx));
      }
  }
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
  template void batchnorm_backward<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>,       \
                                      std::span<const T>, Tensor<T>&, std::span<T>, std::span<T>);

SPX_INSTANTIATE(float)
SPX_INSTANTIATE(double)
#undef SPX_INSTANTIATE

}  // namespace spx::reference
