#pragma once

// Dense compute kernels for the network. Activations are NHWC, conv
// weights [ky][kx][in_ch][out_ch], dense weights [in][out]: the output
// channel is always the fastest-moving index so inner loops vectorize
// with unit stride.
//
// Every kernel is deterministic for any OpenMP thread count: parallel
// loops only split independent outputs, and each output element is
// accumulated in a fixed serial order. Shared weight-gradient buffers
// are either sliced per thread (conv, dense) or reduced serially over
// the batch (SE).
//
// Templated on the scalar type: float in production, double for the
// finite-difference gradient checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace secci::kernels {

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

template <typename T>
void pad_nhwc(const T* x, int n, int h, int w, int c, int pad,
              std::vector<T>& out) {
  const int hp = h + 2 * pad, wp = w + 2 * pad;
  out.assign(static_cast<std::size_t>(n) * hp * wp * c, T(0));
  for (int i = 0; i < n; ++i) {
    for (int y = 0; y < h; ++y) {
      const T* src = x + ((static_cast<std::size_t>(i) * h + y) * w) * c;
      T* dst = out.data() +
               (((static_cast<std::size_t>(i) * hp + y + pad) * wp) + pad) * c;
      std::copy(src, src + static_cast<std::size_t>(w) * c, dst);
    }
  }
}

namespace detail {

// Four output pixels by 32 output channels, accumulated in registers
// across the whole (ky, kx, c) reduction. The fixed extents let the
// compiler unroll and keep the accumulators out of memory; this is the
// hot path of every convolution.
template <typename T>
inline void conv_tile4x32(const T* xbase, int wp, int c_in, int stride,
                          int ox0, int kh, int kw, const T* wblk, int c_out,
                          const T* bias_blk, T* y0, T* y1, T* y2, T* y3) {
  constexpr int PB = 32;
  T a0[PB] = {}, a1[PB] = {}, a2[PB] = {}, a3[PB] = {};
  for (int ky = 0; ky < kh; ++ky) {
    const T* xrow = xbase + static_cast<std::size_t>(ky) * wp * c_in;
    for (int kx = 0; kx < kw; ++kx) {
      const T* x0 =
          xrow + (static_cast<std::size_t>(ox0) * stride + kx) * c_in;
      const T* x1 = x0 + static_cast<std::size_t>(stride) * c_in;
      const T* x2 = x1 + static_cast<std::size_t>(stride) * c_in;
      const T* x3 = x2 + static_cast<std::size_t>(stride) * c_in;
      const T* wv =
          wblk + (static_cast<std::size_t>(ky) * kw + kx) * c_in * c_out;
      for (int c = 0; c < c_in; ++c, wv += c_out) {
        const T v0 = x0[c], v1 = x1[c], v2 = x2[c], v3 = x3[c];
        for (int j = 0; j < PB; ++j) {
          a0[j] += v0 * wv[j];
          a1[j] += v1 * wv[j];
          a2[j] += v2 * wv[j];
          a3[j] += v3 * wv[j];
        }
      }
    }
  }
  if (bias_blk) {
    for (int j = 0; j < PB; ++j) {
      y0[j] = a0[j] + bias_blk[j];
      y1[j] = a1[j] + bias_blk[j];
      y2[j] = a2[j] + bias_blk[j];
      y3[j] = a3[j] + bias_blk[j];
    }
  } else {
    for (int j = 0; j < PB; ++j) {
      y0[j] = a0[j];
      y1[j] = a1[j];
      y2[j] = a2[j];
      y3[j] = a3[j];
    }
  }
}

}  // namespace detail

// y[n, oy, ox, p] = b[p] + sum_{ky,kx,c} x[n, oy*s+ky-pad, ox*s+kx-pad, c]
//                                        * w[ky, kx, c, p]
template <typename T>
void conv2d_forward(const T* x, int batch, int h, int w, int c_in, const T* wt,
                    const T* bias, int kh, int kw, int c_out, int stride,
                    int pad, T* y) {
  const int oh = conv_out_dim(h, kh, stride, pad);
  const int ow = conv_out_dim(w, kw, stride, pad);
  std::vector<T> padded;
  const T* xp = x;
  int hp = h, wp = w;
  if (pad > 0) {
    pad_nhwc(x, batch, h, w, c_in, pad, padded);
    xp = padded.data();
    hp += 2 * pad;
    wp += 2 * pad;
  }
  constexpr int kTile = 4;
  constexpr int kPB = 32;
  const int p_full = (c_out / kPB) * kPB;
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < batch; ++n) {
    for (int oy = 0; oy < oh; ++oy) {
      const T* xbase =
          xp +
          ((static_cast<std::size_t>(n) * hp + oy * stride) * wp) * c_in;
      std::vector<T> acc(static_cast<std::size_t>(kTile) * c_out);
      for (int ox0 = 0; ox0 < ow; ox0 += kTile) {
        const int tile = std::min(kTile, ow - ox0);
        T* yrow = y + ((static_cast<std::size_t>(n) * oh + oy) * ow + ox0) *
                          c_out;
        if (tile == kTile) {
          for (int p0 = 0; p0 < p_full; p0 += kPB)
            detail::conv_tile4x32(xbase, wp, c_in, stride, ox0, kh, kw,
                                  wt + p0, c_out, bias ? bias + p0 : nullptr,
                                  yrow + p0, yrow + c_out + p0,
                                  yrow + 2 * c_out + p0, yrow + 3 * c_out + p0);
          if (p_full == c_out) continue;
        }
        // Remainder pixels and channel tail: plain accumulator array.
        const int p_from = tile == kTile ? p_full : 0;
        std::fill(acc.begin(),
                  acc.begin() + static_cast<std::size_t>(tile) * c_out, T(0));
        for (int ky = 0; ky < kh; ++ky) {
          const T* xrow = xbase + static_cast<std::size_t>(ky) * wp * c_in;
          for (int kx = 0; kx < kw; ++kx) {
            for (int c = 0; c < c_in; ++c) {
              const T* wv =
                  wt + ((static_cast<std::size_t>(ky) * kw + kx) * c_in + c) *
                           c_out;
              for (int t = 0; t < tile; ++t) {
                const T xv =
                    xrow[(static_cast<std::size_t>(ox0 + t) * stride + kx) *
                             c_in +
                         c];
                T* at = acc.data() + static_cast<std::size_t>(t) * c_out;
                for (int p = p_from; p < c_out; ++p) at[p] += xv * wv[p];
              }
            }
          }
        }
        for (int t = 0; t < tile; ++t) {
          T* yr = yrow + static_cast<std::size_t>(t) * c_out;
          const T* at = acc.data() + static_cast<std::size_t>(t) * c_out;
          if (bias) {
            for (int p = p_from; p < c_out; ++p) yr[p] = at[p] + bias[p];
          } else {
            for (int p = p_from; p < c_out; ++p) yr[p] = at[p];
          }
        }
      }
    }
  }
}

// gx = conv(gy, w rotated 180 and transposed in its channels). The
// stride-1 case reuses the tiled forward; other strides scatter.
template <typename T>
void conv2d_backward_input(const T* gy, int batch, int oh, int ow, int c_out,
                           const T* wt, int kh, int kw, int c_in, int stride,
                           int pad, T* gx, int h, int w) {
  if (stride == 1) {
    std::vector<T> wrot(static_cast<std::size_t>(kh) * kw * c_out * c_in);
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx)
        for (int c = 0; c < c_in; ++c)
          for (int p = 0; p < c_out; ++p)
            wrot[((static_cast<std::size_t>(ky) * kw + kx) * c_out + p) * c_in +
                 c] =
                wt[((static_cast<std::size_t>(kh - 1 - ky) * kw +
                     (kw - 1 - kx)) *
                        c_in +
                    c) *
                       c_out +
                   p];
    conv2d_forward(gy, batch, oh, ow, c_out, wrot.data(),
                   static_cast<const T*>(nullptr), kh, kw, c_in, 1,
                   kh - 1 - pad, gx);
    return;
  }
  std::fill(gx, gx + static_cast<std::size_t>(batch) * h * w * c_in, T(0));
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const T* g =
            gy + ((static_cast<std::size_t>(n) * oh + oy) * ow + ox) * c_out;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= w) continue;
            T* gxr =
                gx + ((static_cast<std::size_t>(n) * h + iy) * w + ix) * c_in;
            for (int c = 0; c < c_in; ++c) {
              const T* wv =
                  wt + ((static_cast<std::size_t>(ky) * kw + kx) * c_in + c) *
                           c_out;
              T acc = 0;
              for (int p = 0; p < c_out; ++p) acc += g[p] * wv[p];
              gxr[c] += acc;
            }
          }
        }
      }
    }
  }
}

// gw[ky, kx, c, p] = sum_{n,oy,ox} x[n, oy*s+ky-pad, ox*s+kx-pad, c]
//                                  * gy[n, oy, ox, p]
// Parallel over (ky, kx): each thread owns a disjoint slice of gw and
// walks the batch serially, so results are thread-count independent.
template <typename T>
void conv2d_backward_weights(const T* x, int batch, int h, int w, int c_in,
                             const T* gy, int oh, int ow, int c_out, int kh,
                             int kw, int stride, int pad, T* gw, T* gb) {
  std::vector<T> padded;
  const T* xp = x;
  int hp = h, wp = w;
  if (pad > 0) {
    pad_nhwc(x, batch, h, w, c_in, pad, padded);
    xp = padded.data();
    hp += 2 * pad;
    wp += 2 * pad;
  }
  std::fill(gw, gw + static_cast<std::size_t>(kh) * kw * c_in * c_out, T(0));
  constexpr int kCB = 8;
  constexpr int kPB = 32;
  const int c_full = (c_in / kCB) * kCB;
  const int p_full = (c_out / kPB) * kPB;
#pragma omp parallel for collapse(2) schedule(static)
  for (int ky = 0; ky < kh; ++ky) {
    for (int kx = 0; kx < kw; ++kx) {
      T* gw_slice =
          gw + (static_cast<std::size_t>(ky) * kw + kx) * c_in * c_out;
      // Register-blocked passes: each (c, p) block accumulates over every
      // pixel in registers and touches its gw entries exactly once at the
      // end, in a fixed order independent of the thread count.
      for (int c0 = 0; c0 < c_full; c0 += kCB) {
        for (int p0 = 0; p0 < p_full; p0 += kPB) {
          T acc[kCB][kPB] = {};
          for (int n = 0; n < batch; ++n) {
            for (int oy = 0; oy < oh; ++oy) {
              const T* xrow =
                  xp + ((static_cast<std::size_t>(n) * hp + oy * stride + ky) *
                            wp +
                        kx) *
                           c_in +
                  c0;
              const T* grow =
                  gy + ((static_cast<std::size_t>(n) * oh + oy) * ow) * c_out +
                  p0;
              for (int ox = 0; ox < ow; ++ox) {
                const T* xv =
                    xrow + static_cast<std::size_t>(ox) * stride * c_in;
                const T* g = grow + static_cast<std::size_t>(ox) * c_out;
                for (int i = 0; i < kCB; ++i) {
                  const T xs = xv[i];
                  for (int j = 0; j < kPB; ++j) acc[i][j] += xs * g[j];
                }
              }
            }
          }
          for (int i = 0; i < kCB; ++i) {
            T* dst = gw_slice + (static_cast<std::size_t>(c0) + i) * c_out + p0;
            for (int j = 0; j < kPB; ++j) dst[j] += acc[i][j];
          }
        }
      }
      // Tails (input channels past the last full block, or output channels
      // past the last full block): plain accumulation into the slice.
      if (c_full < c_in || p_full < c_out) {
        for (int n = 0; n < batch; ++n) {
          for (int oy = 0; oy < oh; ++oy) {
            const T* xrow =
                xp +
                ((static_cast<std::size_t>(n) * hp + oy * stride + ky) * wp) *
                    c_in;
            const T* grow =
                gy + ((static_cast<std::size_t>(n) * oh + oy) * ow) * c_out;
            for (int ox = 0; ox < ow; ++ox) {
              const T* g = grow + static_cast<std::size_t>(ox) * c_out;
              const T* xv =
                  xrow + (static_cast<std::size_t>(ox) * stride + kx) * c_in;
              for (int c = c_full; c < c_in; ++c) {
                T* dst = gw_slice + static_cast<std::size_t>(c) * c_out;
                const T xs = xv[c];
                for (int p = 0; p < c_out; ++p) dst[p] += xs * g[p];
              }
              for (int c = 0; c < c_full; ++c) {
                T* dst = gw_slice + static_cast<std::size_t>(c) * c_out;
                const T xs = xv[c];
                for (int p = p_full; p < c_out; ++p) dst[p] += xs * g[p];
              }
            }
          }
        }
      }
    }
  }
  if (gb) {
    std::fill(gb, gb + c_out, T(0));
    for (std::size_t i = 0; i < static_cast<std::size_t>(batch) * oh * ow; ++i)
      for (int p = 0; p < c_out; ++p) gb[p] += gy[i * c_out + p];
  }
}

template <typename T>
void relu_forward(const T* x, std::size_t count, T* y) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i)
    y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* x, const T* gy, std::size_t count, T* gx) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i)
    gx[i] = x[i] > T(0) ? gy[i] : T(0);
}

// Non-overlapping pooling (stride = window). Trailing rows/columns that
// do not fill a window are dropped. argmax records ky*pw + kx, the
// first maximum in scan order on ties.
template <typename T>
void maxpool_forward(const T* x, int batch, int h, int w, int c, int ph,
                     int pw, T* y, std::int32_t* argmax) {
  const int oh = h / ph, ow = w / pw;
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    std::vector<T> best(c);
    std::vector<std::int32_t> best_off(c);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int ky = 0; ky < ph; ++ky) {
          const T* xr = x + ((static_cast<std::size_t>(n) * h + oy * ph + ky) *
                                 w +
                             ox * pw) *
                                c;
          for (int kx = 0; kx < pw; ++kx) {
            const T* xv = xr + static_cast<std::size_t>(kx) * c;
            const std::int32_t off = ky * pw + kx;
            if (off == 0) {
              for (int ch = 0; ch < c; ++ch) {
                best[ch] = xv[ch];
                best_off[ch] = 0;
              }
            } else {
              for (int ch = 0; ch < c; ++ch) {
                if (xv[ch] > best[ch]) {
                  best[ch] = xv[ch];
                  best_off[ch] = off;
                }
              }
            }
          }
        }
        const std::size_t out =
            ((static_cast<std::size_t>(n) * oh + oy) * ow + ox) * c;
        for (int ch = 0; ch < c; ++ch) {
          y[out + ch] = best[ch];
          argmax[out + ch] = best_off[ch];
        }
      }
    }
  }
}

template <typename T>
void maxpool_backward(const T* gy, const std::int32_t* argmax, int batch,
                      int oh, int ow, int c, int ph, int pw, T* gx, int h,
                      int w) {
  // Precomputed window offsets avoid a hardware division per element.
  std::vector<std::size_t> win_off(static_cast<std::size_t>(ph) * pw);
  for (int ky = 0; ky < ph; ++ky)
    for (int kx = 0; kx < pw; ++kx)
      win_off[static_cast<std::size_t>(ky) * pw + kx] =
          (static_cast<std::size_t>(ky) * w + kx) * c;
  const std::size_t in_plane = static_cast<std::size_t>(h) * w * c;
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    T* gxn = gx + static_cast<std::size_t>(n) * in_plane;
    std::fill(gxn, gxn + in_plane, T(0));
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const std::size_t out =
            ((static_cast<std::size_t>(n) * oh + oy) * ow + ox) * c;
        T* corner = gxn + (static_cast<std::size_t>(oy) * ph * w +
                           static_cast<std::size_t>(ox) * pw) *
                              c;
        for (int ch = 0; ch < c; ++ch)
          corner[win_off[argmax[out + ch]] + ch] += gy[out + ch];
      }
    }
  }
}

// Batch normalization over rows: the input is seen as m rows of c
// channels (m = batch * spatial for conv activations). Training mode
// computes biased batch statistics and returns them for the backward
// pass; running-statistics bookkeeping lives in the layer.
namespace detail {

// Statistics over the rows of an m-by-c tensor are accumulated in a
// fixed number of row chunks and combined in chunk order, so the result
// never depends on how many threads ran. Each chunk walks its rows
// contiguously. Accumulation is in double regardless of T: the row
// counts reach the millions in training.
inline constexpr int kStatChunks = 64;

inline std::int64_t stat_chunk_rows(std::int64_t m) {
  return (m + kStatChunks - 1) / kStatChunks;
}

}  // namespace detail

template <typename T>
void bn_forward_train(const T* x, std::int64_t m, int c, const T* gamma,
                      const T* beta, T eps, T* y, T* mean, T* var) {
  const std::int64_t chunk = detail::stat_chunk_rows(m);
  std::vector<double> psum(static_cast<std::size_t>(detail::kStatChunks) * c,
                           0.0);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < detail::kStatChunks; ++k) {
    const std::int64_t lo = k * chunk;
    const std::int64_t hi = std::min<std::int64_t>(m, lo + chunk);
    double* ps = psum.data() + static_cast<std::size_t>(k) * c;
    for (std::int64_t i = lo; i < hi; ++i) {
      const T* xr = x + i * c;
      for (int ch = 0; ch < c; ++ch) ps[ch] += xr[ch];
    }
  }
  std::vector<double> mu(c, 0.0);
  for (int k = 0; k < detail::kStatChunks; ++k)
    for (int ch = 0; ch < c; ++ch)
      mu[ch] += psum[static_cast<std::size_t>(k) * c + ch];
  for (int ch = 0; ch < c; ++ch) mu[ch] /= static_cast<double>(m);

  std::fill(psum.begin(), psum.end(), 0.0);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < detail::kStatChunks; ++k) {
    const std::int64_t lo = k * chunk;
    const std::int64_t hi = std::min<std::int64_t>(m, lo + chunk);
    double* ps = psum.data() + static_cast<std::size_t>(k) * c;
    for (std::int64_t i = lo; i < hi; ++i) {
      const T* xr = x + i * c;
      for (int ch = 0; ch < c; ++ch) {
        const double d = static_cast<double>(xr[ch]) - mu[ch];
        ps[ch] += d * d;
      }
    }
  }
  for (int ch = 0; ch < c; ++ch) {
    double sq = 0;
    for (int k = 0; k < detail::kStatChunks; ++k)
      sq += psum[static_cast<std::size_t>(k) * c + ch];
    mean[ch] = static_cast<T>(mu[ch]);
    var[ch] = static_cast<T>(sq / static_cast<double>(m));
  }

  // Per-channel scale and shift hoisted out of the elementwise pass.
  std::vector<T> scale(c), shift(c);
  for (int ch = 0; ch < c; ++ch) {
    scale[ch] = gamma[ch] / std::sqrt(var[ch] + eps);
    shift[ch] = beta[ch] - scale[ch] * mean[ch];
  }
  const T* sc = scale.data();
  const T* sh = shift.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    const T* xr = x + i * c;
    T* yr = y + i * c;
    for (int ch = 0; ch < c; ++ch) yr[ch] = sc[ch] * xr[ch] + sh[ch];
  }
}

template <typename T>
void bn_forward_infer(const T* x, std::int64_t m, int c, const T* gamma,
                      const T* beta, const T* running_mean,
                      const T* running_var, T eps, T* y) {
  std::vector<T> scale(c), shift(c);
  for (int ch = 0; ch < c; ++ch) {
    scale[ch] = gamma[ch] / std::sqrt(running_var[ch] + eps);
    shift[ch] = beta[ch] - scale[ch] * running_mean[ch];
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    const T* xr = x + i * c;
    T* yr = y + i * c;
    for (int ch = 0; ch < c; ++ch) yr[ch] = scale[ch] * xr[ch] + shift[ch];
  }
}

template <typename T>
void bn_backward(const T* x, const T* gy, std::int64_t m, int c,
                 const T* gamma, const T* mean, const T* var, T eps, T* gx,
                 T* dgamma, T* dbeta) {
  const std::int64_t chunk = detail::stat_chunk_rows(m);
  std::vector<double> p1(static_cast<std::size_t>(detail::kStatChunks) * c,
                         0.0);
  std::vector<double> p2(static_cast<std::size_t>(detail::kStatChunks) * c,
                         0.0);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < detail::kStatChunks; ++k) {
    const std::int64_t lo = k * chunk;
    const std::int64_t hi = std::min<std::int64_t>(m, lo + chunk);
    double* s1 = p1.data() + static_cast<std::size_t>(k) * c;
    double* s2 = p2.data() + static_cast<std::size_t>(k) * c;
    for (std::int64_t i = lo; i < hi; ++i) {
      const T* xr = x + i * c;
      const T* gr = gy + i * c;
      for (int ch = 0; ch < c; ++ch) {
        const double g = gr[ch];
        s1[ch] += g;
        s2[ch] += g * (static_cast<double>(xr[ch]) - mean[ch]);
      }
    }
  }
  // gx = gamma*inv * (gy - s1/m - xhat * s2'/m) with xhat = (x-mean)*inv
  // and s2' = s2*inv, folded into three per-channel constants.
  std::vector<T> a(c), k1(c), k2(c);
  for (int ch = 0; ch < c; ++ch) {
    double s1 = 0, s2 = 0;
    for (int k = 0; k < detail::kStatChunks; ++k) {
      s1 += p1[static_cast<std::size_t>(k) * c + ch];
      s2 += p2[static_cast<std::size_t>(k) * c + ch];
    }
    const double inv = 1.0 / std::sqrt(static_cast<double>(var[ch]) + eps);
    dbeta[ch] = static_cast<T>(s1);
    dgamma[ch] = static_cast<T>(s2 * inv);
    const double ai = gamma[ch] * inv;
    a[ch] = static_cast<T>(ai);
    k1[ch] = static_cast<T>(ai * s1 / static_cast<double>(m));
    k2[ch] = static_cast<T>(ai * inv * (s2 * inv) / static_cast<double>(m));
  }
  const T* ap = a.data();
  const T* k1p = k1.data();
  const T* k2p = k2.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    const T* xr = x + i * c;
    const T* gr = gy + i * c;
    T* gxr = gx + i * c;
    for (int ch = 0; ch < c; ++ch)
      gxr[ch] = ap[ch] * gr[ch] - k1p[ch] - k2p[ch] * (xr[ch] - mean[ch]);
  }
}

// Squeeze-and-excitation: z = spatial mean per channel, gates
// s = sigmoid(w2 * relu(w1 * z)), y = x * s. w1 is [r_dim][c] and w2 is
// [c][r_dim], both bias-free. z, h1, s caches are required by backward.
template <typename T>
void se_forward(const T* x, int batch, int h, int w, int c, const T* w1,
                const T* w2, int r_dim, T* y, T* z, T* h1, T* s) {
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    T* zn = z + static_cast<std::size_t>(n) * c;
    for (int ch = 0; ch < c; ++ch) zn[ch] = 0;
    const T* xn = x + static_cast<std::size_t>(n) * hw * c;
    for (std::int64_t i = 0; i < hw; ++i)
      for (int ch = 0; ch < c; ++ch) zn[ch] += xn[i * c + ch];
    for (int ch = 0; ch < c; ++ch) zn[ch] /= static_cast<T>(hw);

    T* hn = h1 + static_cast<std::size_t>(n) * r_dim;
    for (int j = 0; j < r_dim; ++j) {
      T acc = 0;
      const T* w1r = w1 + static_cast<std::size_t>(j) * c;
      for (int ch = 0; ch < c; ++ch) acc += w1r[ch] * zn[ch];
      hn[j] = acc > T(0) ? acc : T(0);
    }
    T* sn = s + static_cast<std::size_t>(n) * c;
    for (int ch = 0; ch < c; ++ch) {
      T acc = 0;
      const T* w2r = w2 + static_cast<std::size_t>(ch) * r_dim;
      for (int j = 0; j < r_dim; ++j) acc += w2r[j] * hn[j];
      sn[ch] = T(1) / (T(1) + std::exp(-acc));
    }
    T* yn = y + static_cast<std::size_t>(n) * hw * c;
    for (std::int64_t i = 0; i < hw; ++i)
      for (int ch = 0; ch < c; ++ch) yn[i * c + ch] = xn[i * c + ch] * sn[ch];
  }
}

template <typename T>
void se_backward(const T* x, const T* gy, int batch, int h, int w, int c,
                 const T* w1, const T* w2, int r_dim, const T* z, const T* h1,
                 const T* s, T* gx, T* gw1, T* gw2) {
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  // Per-sample intermediates, filled in parallel; the shared weight
  // gradients are then reduced serially in batch order.
  std::vector<T> gsig(static_cast<std::size_t>(batch) * c);
  std::vector<T> ga(static_cast<std::size_t>(batch) * r_dim);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    const T* xn = x + static_cast<std::size_t>(n) * hw * c;
    const T* gn = gy + static_cast<std::size_t>(n) * hw * c;
    const T* sn = s + static_cast<std::size_t>(n) * c;
    const T* hn = h1 + static_cast<std::size_t>(n) * r_dim;
    T* gxn = gx + static_cast<std::size_t>(n) * hw * c;
    T* gsn = gsig.data() + static_cast<std::size_t>(n) * c;
    T* gan = ga.data() + static_cast<std::size_t>(n) * r_dim;

    // d loss / d s_c, and the direct x*s path of gx.
    for (int ch = 0; ch < c; ++ch) gsn[ch] = 0;
    for (std::int64_t i = 0; i < hw; ++i)
      for (int ch = 0; ch < c; ++ch) {
        gsn[ch] += gn[i * c + ch] * xn[i * c + ch];
        gxn[i * c + ch] = gn[i * c + ch] * sn[ch];
      }
    for (int ch = 0; ch < c; ++ch)
      gsn[ch] *= sn[ch] * (T(1) - sn[ch]);  // through the sigmoid

    for (int j = 0; j < r_dim; ++j) {
      T acc = 0;
      for (int ch = 0; ch < c; ++ch)
        acc += gsn[ch] * w2[static_cast<std::size_t>(ch) * r_dim + j];
      gan[j] = hn[j] > T(0) ? acc : T(0);  // through the ReLU
    }
    // Through z (the spatial mean): every pixel of channel ch gets an
    // equal share, added in one contiguous pass.
    std::vector<T> per_pixel(c);
    for (int ch = 0; ch < c; ++ch) {
      T acc = 0;
      for (int j = 0; j < r_dim; ++j)
        acc += gan[j] * w1[static_cast<std::size_t>(j) * c + ch];
      per_pixel[ch] = acc / static_cast<T>(hw);
    }
    const T* pp = per_pixel.data();
    for (std::int64_t i = 0; i < hw; ++i) {
      T* gxr = gxn + i * c;
      for (int ch = 0; ch < c; ++ch) gxr[ch] += pp[ch];
    }
  }

  std::fill(gw1, gw1 + static_cast<std::size_t>(r_dim) * c, T(0));
  std::fill(gw2, gw2 + static_cast<std::size_t>(c) * r_dim, T(0));
  for (int n = 0; n < batch; ++n) {
    const T* zn = z + static_cast<std::size_t>(n) * c;
    const T* hn = h1 + static_cast<std::size_t>(n) * r_dim;
    const T* gsn = gsig.data() + static_cast<std::size_t>(n) * c;
    const T* gan = ga.data() + static_cast<std::size_t>(n) * r_dim;
    for (int ch = 0; ch < c; ++ch)
      for (int j = 0; j < r_dim; ++j)
        gw2[static_cast<std::size_t>(ch) * r_dim + j] += gsn[ch] * hn[j];
    for (int j = 0; j < r_dim; ++j)
      for (int ch = 0; ch < c; ++ch)
        gw1[static_cast<std::size_t>(j) * c + ch] += gan[j] * zn[ch];
  }
}

// y[n, o] = b[o] + sum_f x[n, f] * w[f, o]
template <typename T>
void dense_forward(const T* x, int batch, std::int64_t f_in, int f_out,
                   const T* wt, const T* bias, T* y) {
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    T* yr = y + static_cast<std::size_t>(n) * f_out;
    if (bias) {
      for (int o = 0; o < f_out; ++o) yr[o] = bias[o];
    } else {
      for (int o = 0; o < f_out; ++o) yr[o] = T(0);
    }
    const T* xr = x + static_cast<std::size_t>(n) * f_in;
    for (std::int64_t f = 0; f < f_in; ++f) {
      const T xv = xr[f];
      const T* wr = wt + static_cast<std::size_t>(f) * f_out;
      for (int o = 0; o < f_out; ++o) yr[o] += xv * wr[o];
    }
  }
}

template <typename T>
void dense_backward_input(const T* gy, int batch, std::int64_t f_in, int f_out,
                          const T* wt, T* gx) {
  // The weight matrix is walked in row blocks; each block is transposed
  // into a cache-sized panel once and reused across the whole batch,
  // keeping the inner loop unit-stride without a full-matrix copy.
  const std::int64_t kBlock = std::min<std::int64_t>(f_in, 1024);
  std::vector<T> panel(static_cast<std::size_t>(f_out) * kBlock);
  for (std::int64_t f0 = 0; f0 < f_in; f0 += kBlock) {
    const std::int64_t fb = std::min(kBlock, f_in - f0);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < f_out; ++o) {
      T* pr = panel.data() + static_cast<std::size_t>(o) * fb;
      for (std::int64_t j = 0; j < fb; ++j)
        pr[j] = wt[(f0 + j) * f_out + o];
    }
#pragma omp parallel for schedule(static)
    for (int n = 0; n < batch; ++n) {
      T* gxr = gx + static_cast<std::size_t>(n) * f_in + f0;
      for (std::int64_t j = 0; j < fb; ++j) gxr[j] = T(0);
      const T* gr = gy + static_cast<std::size_t>(n) * f_out;
      for (int o = 0; o < f_out; ++o) {
        const T gv = gr[o];
        const T* pr = panel.data() + static_cast<std::size_t>(o) * fb;
        for (std::int64_t j = 0; j < fb; ++j) gxr[j] += gv * pr[j];
      }
    }
  }
}

template <typename T>
void dense_backward_weights(const T* x, const T* gy, int batch,
                            std::int64_t f_in, int f_out, T* gw, T* gb) {
  // x transposed once so each weight row's accumulation reads its batch
  // column contiguously instead of striding f_in apart per sample.
  std::vector<T> xt(static_cast<std::size_t>(f_in) * batch);
  constexpr std::int64_t kTr = 64;
#pragma omp parallel for schedule(static)
  for (std::int64_t f0 = 0; f0 < f_in; f0 += kTr) {
    const std::int64_t f1 = std::min(f_in, f0 + kTr);
    for (int n = 0; n < batch; ++n) {
      const T* xr = x + static_cast<std::size_t>(n) * f_in;
      for (std::int64_t f = f0; f < f1; ++f)
        xt[static_cast<std::size_t>(f) * batch + n] = xr[f];
    }
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t f = 0; f < f_in; ++f) {
    T* gwr = gw + static_cast<std::size_t>(f) * f_out;
    for (int o = 0; o < f_out; ++o) gwr[o] = T(0);
    const T* xc = xt.data() + static_cast<std::size_t>(f) * batch;
    for (int n = 0; n < batch; ++n) {
      const T xv = xc[n];
      const T* gr = gy + static_cast<std::size_t>(n) * f_out;
      for (int o = 0; o < f_out; ++o) gwr[o] += xv * gr[o];
    }
  }
  if (gb) {
    for (int o = 0; o < f_out; ++o) gb[o] = T(0);
    for (int n = 0; n < batch; ++n)
      for (int o = 0; o < f_out; ++o)
        gb[o] += gy[static_cast<std::size_t>(n) * f_out + o];
  }
}

template <typename T>
void softmax_forward(const T* x, int batch, int c, T* y) {
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    const T* xr = x + static_cast<std::size_t>(n) * c;
    T* yr = y + static_cast<std::size_t>(n) * c;
    T mx = xr[0];
    for (int i = 1; i < c; ++i) mx = std::max(mx, xr[i]);
    T sum = 0;
    for (int i = 0; i < c; ++i) {
      yr[i] = std::exp(xr[i] - mx);
      sum += yr[i];
    }
    const T inv = T(1) / sum;
    for (int i = 0; i < c; ++i) yr[i] *= inv;
  }
}

// gx_i = p_i * (gy_i - sum_j gy_j p_j), the softmax Jacobian product.
template <typename T>
void softmax_backward(const T* probs, const T* gy, int batch, int c, T* gx) {
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    const T* pr = probs + static_cast<std::size_t>(n) * c;
    const T* gr = gy + static_cast<std::size_t>(n) * c;
    T* gxr = gx + static_cast<std::size_t>(n) * c;
    T dot = 0;
    for (int i = 0; i < c; ++i) dot += gr[i] * pr[i];
    for (int i = 0; i < c; ++i) gxr[i] = pr[i] * (gr[i] - dot);
  }
}

inline constexpr double kProbFloor = 1e-12;

// Mean natural-log cross-entropy over the batch.
template <typename T>
double cross_entropy(const T* probs, const int* labels, int batch, int c) {
  double loss = 0.0;
  for (int n = 0; n < batch; ++n) {
    const double p = std::max(
        static_cast<double>(probs[static_cast<std::size_t>(n) * c + labels[n]]),
        kProbFloor);
    loss -= std::log(p);
  }
  return loss / batch;
}

// d(mean loss)/d(probs): nonzero only at the true class.
template <typename T>
void cross_entropy_backward(const T* probs, const int* labels, int batch,
                            int c, T* gp) {
  std::fill(gp, gp + static_cast<std::size_t>(batch) * c, T(0));
  for (int n = 0; n < batch; ++n) {
    const std::size_t at = static_cast<std::size_t>(n) * c + labels[n];
    const double p = std::max(static_cast<double>(probs[at]), kProbFloor);
    gp[at] = static_cast<T>(-1.0 / (p * batch));
  }
}

template <typename T>
void multiply_mask(const T* x, const T* mask, std::size_t count, T* y) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i)
    y[i] = x[i] * mask[i];
}

// One decoupled-weight-decay Adam step on a parameter tensor.
// bias_c1/bias_c2 are the step-count corrections 1 - beta^t.
template <typename T>
void adamw_step(T* wt, const T* g, T* m, T* v, std::size_t count, T lr,
                T beta1, T beta2, T eps, T weight_decay, T bias_c1, T bias_c2) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T mhat = m[i] / bias_c1;
    const T vhat = v[i] / bias_c2;
    wt[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * wt[i]);
  }
}

}  // namespace secci::kernels
