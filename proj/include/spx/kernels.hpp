#pragma once

#include <span>

#include "spx/tensor.hpp"

namespace spx {

/// Square-kernel convolution geometry. Convolution weights are laid out
/// [out][in][k][k]; transposed-convolution weights [in][out][k][k].
struct ConvGeometry {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 4;
  int stride = 2;
  int padding = 1;

  int conv_out(int size) const { return (size + 2 * padding - kernel) / stride + 1; }
  int transposed_out(int size) const { return (size - 1) * stride - 2 * padding + kernel; }
  bool operator==(const ConvGeometry&) const = default;
};

constexpr double kBatchNormEps = 1e-5;

/// Batch-norm statistics saved by the training forward pass.
template <typename T>
struct BatchNormSaved {
  std::vector<T> mean;
  std::vector<T> var;  // biased
  std::vector<T> inv_std;
};

// OpenMP-parallel kernels. Gradients accumulate (+=) into dW / db; dx is
// overwritten. Reductions over the batch axis are pairwise-symmetric: samples
// (2p, 2p+1) are combined first, so swapping the members of any pair leaves
// every result bit-identical.
namespace kernels {

template <typename T>
void conv2d_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                    const ConvGeometry& g, Tensor<T>& y);
template <typename T>
void conv2d_backward(const Tensor<T>& x, std::span<const T> weight, const ConvGeometry& g,
                     const Tensor<T>& dy, Tensor<T>* dx, std::span<T> dweight, std::span<T> dbias);

template <typename T>
void conv_transpose2d_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                              const ConvGeometry& g, Tensor<T>& y);
template <typename T>
void conv_transpose2d_backward(const Tensor<T>& x, std::span<const T> weight, const ConvGeometry& g,
                               const Tensor<T>& dy, Tensor<T>* dx, std::span<T> dweight,
                               std::span<T> dbias);

/// Training-mode batch norm: normalizes with batch statistics (biased
/// variance), writes xhat and y, and returns mean / inv_std per channel.
template <typename T>
BatchNormSaved<T> batchnorm_forward_train(const Tensor<T>& x, std::span<const T> gamma,
                                          std::span<const T> beta, Tensor<T>& xhat, Tensor<T>& y);
template <typename T>
void batchnorm_forward_eval(const Tensor<T>& x, std::span<const T> gamma, std::span<const T> beta,
                            std::span<const T> running_mean, std::span<const T> running_var,
                            Tensor<T>& y);
template <typename T>
void batchnorm_backward(const Tensor<T>& dy, const Tensor<T>& xhat, std::span<const T> gamma,
                        std::span<const T> inv_std, Tensor<T>& dx, std::span<T> dgamma,
                        std::span<T> dbeta);

template <typename T>
void relu_inplace(Tensor<T>& x);
/// dy *= (y > 0)
template <typename T>
void relu_backward_inplace(const Tensor<T>& y, Tensor<T>& dy);

}  // namespace kernels

// Direct-loop serial implementations of the same contracts, kept as the
// test oracle and the benchmark baseline.
namespace reference {

template <typename T>
void conv2d_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                    const ConvGeometry& g, Tensor<T>& y);
template <typename T>
void conv2d_backward(const Tensor<T>& x, std::span<const T> weight, const ConvGeometry& g,
                     const Tensor<T>& dy, Tensor<T>* dx, std::span<T> dweight, std::span<T> dbias);
template <typename T>
void conv_transpose2d_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                              const ConvGeometry& g, Tensor<T>& y);
template <typename T>
void conv_transpose2d_backward(const Tensor<T>& x, std::span<const T> weight, const ConvGeometry& g,
                               const Tensor<T>& dy, Tensor<T>* dx, std::span<T> dweight,
                               std::span<T> dbias);
template <typename T>
BatchNormSaved<T> batchnorm_forward_train(const Tensor<T>& x, std::span<const T> gamma,
                                          std::span<const T> beta, Tensor<T>& xhat, Tensor<T>& y);
template <typename T>
void batchnorm_backward(const Tensor<T>& dy, const Tensor<T>& xhat, std::span<const T> gamma,
                        std::span<const T> inv_std, Tensor<T>& dx, std::span<T> dgamma,
                        std::span<T> dbeta);

}  // namespace reference

}  // namespace spx
