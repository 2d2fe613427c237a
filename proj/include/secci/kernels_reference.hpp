#pragma once

// Straight-line serial versions of the compute kernels, written
// index-by-index with double accumulators and no tiling, padding
// copies, or OpenMP. They exist as the trusted baseline: the test
// suite checks the optimized kernels against these on randomized
// shapes, and the benchmark target measures the gap.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>

namespace secci::kernels::reference {

template <typename T>
void conv2d_forward(const T* x, int batch, int h, int w, int c_in, const T* wt,
                    const T* bias, int kh, int kw, int c_out, int stride,
                    int pad, T* y) {
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;
  for (int n = 0; n < batch; ++n)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        for (int p = 0; p < c_out; ++p) {
          double acc = bias ? static_cast<double>(bias[p]) : 0.0;
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int iy = oy * stride + ky - pad;
              const int ix = ox * stride + kx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              for (int c = 0; c < c_in; ++c)
                acc += static_cast<double>(
                           x[((static_cast<std::size_t>(n) * h + iy) * w + ix) *
                                 c_in +
                             c]) *
                       static_cast<double>(
                           wt[((static_cast<std::size_t>(ky) * kw + kx) * c_in +
                               c) *
                                  c_out +
                              p]);
            }
          y[((static_cast<std::size_t>(n) * oh + oy) * ow + ox) * c_out + p] =
              static_cast<T>(acc);
        }
}

template <typename T>
void conv2d_backward_input(const T* gy, int batch, int oh, int ow, int c_out,
                           const T* wt, int kh, int kw, int c_in, int stride,
                           int pad, T* gx, int h, int w) {
  for (int n = 0; n < batch; ++n)
    for (int iy = 0; iy < h; ++iy)
      for (int ix = 0; ix < w; ++ix)
        for (int c = 0; c < c_in; ++c) {
          double acc = 0.0;
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int ny = iy + pad - ky;
              const int nx = ix + pad - kx;
              if (ny % stride != 0 || nx % stride != 0) continue;
              const int oy = ny / stride, ox = nx / stride;
              if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
              for (int p = 0; p < c_out; ++p)
                acc +=
                    static_cast<double>(
                        gy[((static_cast<std::size_t>(n) * oh + oy) * ow + ox) *
                               c_out +
                           p]) *
                    static_cast<double>(
                        wt[((static_cast<std::size_t>(ky) * kw + kx) * c_in +
                            c) *
                               c_out +
                           p]);
            }
          gx[((static_cast<std::size_t>(n) * h + iy) * w + ix) * c_in + c] =
              static_cast<T>(acc);
        }
}

template <typename T>
void conv2d_backward_weights(const T* x, int batch, int h, int w, int c_in,
                             const T* gy, int oh, int ow, int c_out, int kh,
                             int kw, int stride, int pad, T* gw, T* gb) {
  for (int ky = 0; ky < kh; ++ky)
    for (int kx = 0; kx < kw; ++kx)
      for (int c = 0; c < c_in; ++c)
        for (int p = 0; p < c_out; ++p) {
          double acc = 0.0;
          for (int n = 0; n < batch; ++n)
            for (int oy = 0; oy < oh; ++oy)
              for (int ox = 0; ox < ow; ++ox) {
                const int iy = oy * stride + ky - pad;
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc +=
                    static_cast<double>(
                        x[((static_cast<std::size_t>(n) * h + iy) * w + ix) *
                              c_in +
                          c]) *
                    static_cast<double>(
                        gy[((static_cast<std::size_t>(n) * oh + oy) * ow + ox) *
                               c_out +
                           p]);
              }
          gw[((static_cast<std::size_t>(ky) * kw + kx) * c_in + c) * c_out +
             p] = static_cast<T>(acc);
        }
  if (gb)
    for (int p = 0; p < c_out; ++p) {
      double acc = 0.0;
      for (int n = 0; n < batch; ++n)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox)
            acc += static_cast<double>(
                gy[((static_cast<std::size_t>(n) * oh + oy) * ow + ox) * c_out +
                   p]);
      gb[p] = static_cast<T>(acc);
    }
}

template <typename T>
void maxpool_forward(const T* x, int batch, int h, int w, int c, int ph,
                     int pw, T* y, std::int32_t* argmax) {
  const int oh = h / ph, ow = w / pw;
  for (int n = 0; n < batch; ++n)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        for (int ch = 0; ch < c; ++ch) {
          T best = x[((static_cast<std::size_t>(n) * h + oy * ph) * w +
                      ox * pw) *
                         c +
                     ch];
          std::int32_t off = 0;
          for (int ky = 0; ky < ph; ++ky)
            for (int kx = 0; kx < pw; ++kx) {
              const T v = x[((static_cast<std::size_t>(n) * h + oy * ph + ky) *
                                 w +
                             ox * pw + kx) *
                                c +
                            ch];
              if (v > best) {
                best = v;
                off = ky * pw + kx;
              }
            }
          const std::size_t at =
              ((static_cast<std::size_t>(n) * oh + oy) * ow + ox) * c + ch;
          y[at] = best;
          argmax[at] = off;
        }
}

template <typename T>
void dense_forward(const T* x, int batch, std::int64_t f_in, int f_out,
                   const T* wt, const T* bias, T* y) {
  for (int n = 0; n < batch; ++n)
    for (int o = 0; o < f_out; ++o) {
      double acc = bias ? static_cast<double>(bias[o]) : 0.0;
      for (std::int64_t f = 0; f < f_in; ++f)
        acc += static_cast<double>(x[static_cast<std::size_t>(n) * f_in + f]) *
               static_cast<double>(wt[static_cast<std::size_t>(f) * f_out + o]);
      y[static_cast<std::size_t>(n) * f_out + o] = static_cast<T>(acc);
    }
}

template <typename T>
void dense_backward_input(const T* gy, int batch, std::int64_t f_in, int f_out,
                          const T* wt, T* gx) {
  for (int n = 0; n < batch; ++n)
    for (std::int64_t f = 0; f < f_in; ++f) {
      double acc = 0.0;
      for (int o = 0; o < f_out; ++o)
        acc += static_cast<double>(gy[static_cast<std::size_t>(n) * f_out + o]) *
               static_cast<double>(wt[static_cast<std::size_t>(f) * f_out + o]);
      gx[static_cast<std::size_t>(n) * f_in + f] = static_cast<T>(acc);
    }
}

template <typename T>
void dense_backward_weights(const T* x, const T* gy, int batch,
                            std::int64_t f_in, int f_out, T* gw, T* gb) {
  for (std::int64_t f = 0; f < f_in; ++f)
    for (int o = 0; o < f_out; ++o) {
      double acc = 0.0;
      for (int n = 0; n < batch; ++n)
        acc += static_cast<double>(x[static_cast<std::size_t>(n) * f_in + f]) *
               static_cast<double>(gy[static_cast<std::size_t>(n) * f_out + o]);
      gw[static_cast<std::size_t>(f) * f_out + o] = static_cast<T>(acc);
    }
  if (gb)
    for (int o = 0; o < f_out; ++o) {
      double acc = 0.0;
      for (int n = 0; n < batch; ++n)
        acc += static_cast<double>(gy[static_cast<std::size_t>(n) * f_out + o]);
      gb[o] = static_cast<T>(acc);
    }
}

template <typename T>
void bn_forward_train(const T* x, std::int64_t m, int c, const T* gamma,
                      const T* beta, T eps, T* y, T* mean, T* var) {
  for (int ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < m; ++i)
      sum += static_cast<double>(x[i * c + ch]);
    const double mu = sum / static_cast<double>(m);
    double sq = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      const double d = static_cast<double>(x[i * c + ch]) - mu;
      sq += d * d;
    }
    mean[ch] = static_cast<T>(mu);
    var[ch] = static_cast<T>(sq / static_cast<double>(m));
    const double inv = 1.0 / std::sqrt(sq / static_cast<double>(m) +
                                       static_cast<double>(eps));
    for (std::int64_t i = 0; i < m; ++i)
      y[i * c + ch] = static_cast<T>(
          static_cast<double>(gamma[ch]) *
              (static_cast<double>(x[i * c + ch]) - mu) * inv +
          static_cast<double>(beta[ch]));
  }
}

template <typename T>
void se_forward(const T* x, int batch, int h, int w, int c, const T* w1,
                const T* w2, int r_dim, T* y, T* z, T* h1, T* s) {
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (int n = 0; n < batch; ++n) {
    for (int ch = 0; ch < c; ++ch) {
      double sum = 0.0;
      for (std::int64_t i = 0; i < hw; ++i)
        sum += static_cast<double>(
            x[(static_cast<std::size_t>(n) * hw + i) * c + ch]);
      z[static_cast<std::size_t>(n) * c + ch] =
          static_cast<T>(sum / static_cast<double>(hw));
    }
    for (int j = 0; j < r_dim; ++j) {
      double acc = 0.0;
      for (int ch = 0; ch < c; ++ch)
        acc += static_cast<double>(w1[static_cast<std::size_t>(j) * c + ch]) *
               static_cast<double>(z[static_cast<std::size_t>(n) * c + ch]);
      h1[static_cast<std::size_t>(n) * r_dim + j] =
          static_cast<T>(acc > 0.0 ? acc : 0.0);
    }
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int j = 0; j < r_dim; ++j)
        acc +=
            static_cast<double>(w2[static_cast<std::size_t>(ch) * r_dim + j]) *
            static_cast<double>(h1[static_cast<std::size_t>(n) * r_dim + j]);
      s[static_cast<std::size_t>(n) * c + ch] =
          static_cast<T>(1.0 / (1.0 + std::exp(-acc)));
    }
    for (std::int64_t i = 0; i < hw; ++i)
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t at = (static_cast<std::size_t>(n) * hw + i) * c + ch;
        y[at] = x[at] * s[static_cast<std::size_t>(n) * c + ch];
      }
  }
}

template <typename T>
void softmax_forward(const T* x, int batch, int c, T* y) {
  for (int n = 0; n < batch; ++n) {
    const T* xr = x + static_cast<std::size_t>(n) * c;
    T* yr = y + static_cast<std::size_t>(n) * c;
    double mx = static_cast<double>(xr[0]);
    for (int i = 1; i < c; ++i)
      mx = std::max(mx, static_cast<double>(xr[i]));
    double sum = 0.0;
    for (int i = 0; i < c; ++i) sum += std::exp(static_cast<double>(xr[i]) - mx);
    for (int i = 0; i < c; ++i)
      yr[i] =
          static_cast<T>(std::exp(static_cast<double>(xr[i]) - mx) / sum);
  }
}

}  // namespace secci::kernels::reference
