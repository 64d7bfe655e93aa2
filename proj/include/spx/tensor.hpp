#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "spx/error.hpp"

namespace spx {

/// Dense NCHW tensor. For spectrogram features H is the frequency axis and
/// W the frame axis.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }

  T* sample(int i) { return data.data() + i * sample_size(); }
  const T* sample(int i) const { return data.data() + i * sample_size(); }
  T* channel(int i, int ch) { return sample(i) + ch * plane(); }
  const T* channel(int i, int ch) const { return sample(i) + ch * plane(); }

  T& at(int i, int ch, int y, int x) { return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x]; }
  T at(int i, int ch, int y, int x) const {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  bool operator==(const Tensor&) const = default;
};

/// Concatenates along the channel axis; all parts share n, h, w.
template <typename T>
Tensor<T> concat_channels(std::initializer_list<const Tensor<T>*> parts) {
  const Tensor<T>& first = **parts.begin();
  int channels = 0;
  for (const auto* p : parts) {
    require(p->n == first.n && p->h == first.h && p->w == first.w, "concat shape mismatch");
    channels += p->c;
  }
  Tensor<T> out(first.n, channels, first.h, first.w);
  for (int i = 0; i < first.n; ++i) {
    T* dst = out.sample(i);
    for (const auto* p : parts) {
      std::copy_n(p->sample(i), p->sample_size(), dst);
      dst += p->sample_size();
    }
  }
  return out;
}

/// Copies channels [offset, offset + dst.c) of src into dst (accumulating).
template <typename T>
void add_channel_slice(const Tensor<T>& src, int offset, Tensor<T>& dst) {
  for (int i = 0; i < src.n; ++i) {
    const T* s = src.channel(i, offset);
    T* d = dst.sample(i);
    for (std::size_t k = 0; k < dst.sample_size(); ++k) d[k] += s[k];
  }
}

}  // namespace spx
