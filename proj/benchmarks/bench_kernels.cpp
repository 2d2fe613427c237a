// Times the vectorized OpenMP kernels against the serial reference
// implementations on the production layer shapes. Build target:
// bench_kernels; run with an optional batch-size argument (default 8).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "secci/kernels.hpp"
#include "secci/kernels_reference.hpp"
#include "secci/rng.hpp"

namespace k = secci::kernels;
namespace ref = secci::kernels::reference;

namespace {

std::vector<float> random_buf(std::size_t count, secci::Rng& rng) {
  std::vector<float> v(count);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

template <typename F>
double best_ms(F&& fn, int reps) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void row(const std::string& name, const std::string& shape, double ref_ms,
         double opt_ms) {
  std::printf("%-24s %-26s %10.2f %10.2f %9.1fx\n", name.c_str(),
              shape.c_str(), ref_ms, opt_ms, ref_ms / opt_ms);
}

struct ConvShape {
  int h, w, c_in, c_out;
};

}  // namespace

int main(int argc, char** argv) {
  const int batch = argc > 1 ? std::atoi(argv[1]) : 8;
  if (batch < 1) {
    std::fprintf(stderr, "usage: %s [batch>=1]\n", argv[0]);
    return 2;
  }
  secci::Rng rng(42);
  std::printf("batch %d, single-precision, best of N runs\n\n", batch);
  std::printf("%-24s %-26s %10s %10s %10s\n", "kernel", "shape", "ref ms",
              "opt ms", "speedup");

  // The four convolution shapes of the default network.
  const ConvShape convs[] = {
      {90, 90, 3, 32}, {45, 45, 32, 64}, {22, 22, 64, 128}, {11, 11, 128, 128}};
  for (const auto& s : convs) {
    const int oh = s.h, ow = s.w;  // 3x3, stride 1, pad 1
    auto x = random_buf(static_cast<std::size_t>(batch) * s.h * s.w * s.c_in, rng);
    auto wt = random_buf(9ull * s.c_in * s.c_out, rng);
    auto bias = random_buf(s.c_out, rng);
    std::vector<float> y(static_cast<std::size_t>(batch) * oh * ow * s.c_out);
    const std::string shape = std::to_string(s.h) + "x" + std::to_string(s.w) +
                              " " + std::to_string(s.c_in) + "->" +
                              std::to_string(s.c_out);

    const double r = best_ms(
        [&] {
          ref::conv2d_forward(x.data(), batch, s.h, s.w, s.c_in, wt.data(),
                              bias.data(), 3, 3, s.c_out, 1, 1, y.data());
        },
        2);
    const double o = best_ms(
        [&] {
          k::conv2d_forward(x.data(), batch, s.h, s.w, s.c_in, wt.data(),
                            bias.data(), 3, 3, s.c_out, 1, 1, y.data());
        },
        5);
    row("conv2d_forward", shape, r, o);

    auto gy = random_buf(y.size(), rng);
    std::vector<float> gx(x.size());
    const double rbi = best_ms(
        [&] {
          ref::conv2d_backward_input(gy.data(), batch, oh, ow, s.c_out,
                                     wt.data(), 3, 3, s.c_in, 1, 1, gx.data(),
                                     s.h, s.w);
        },
        2);
    const double obi = best_ms(
        [&] {
          k::conv2d_backward_input(gy.data(), batch, oh, ow, s.c_out,
                                   wt.data(), 3, 3, s.c_in, 1, 1, gx.data(),
                                   s.h, s.w);
        },
        5);
    row("conv2d_backward_input", shape, rbi, obi);

    std::vector<float> gw(wt.size()), gb(s.c_out);
    const double rbw = best_ms(
        [&] {
          ref::conv2d_backward_weights(x.data(), batch, s.h, s.w, s.c_in,
                                       gy.data(), oh, ow, s.c_out, 3, 3, 1, 1,
                                       gw.data(), gb.data());
        },
        2);
    const double obw = best_ms(
        [&] {
          k::conv2d_backward_weights(x.data(), batch, s.h, s.w, s.c_in,
                                     gy.data(), oh, ow, s.c_out, 3, 3, 1, 1,
                                     gw.data(), gb.data());
        },
        5);
    row("conv2d_backward_weights", shape, rbw, obw);
  }

  {  // Batch norm + squeeze-excite + maxpool at the widest activation.
    const int h = 90, w = 90, c = 32;
    const std::int64_t m = static_cast<std::int64_t>(batch) * h * w;
    auto x = random_buf(static_cast<std::size_t>(m) * c, rng);
    auto gamma = random_buf(c, rng);
    auto beta = random_buf(c, rng);
    std::vector<float> y(x.size()), mean(c), var(c);
    const std::string shape = "90x90x32";

    const double r = best_ms(
        [&] {
          ref::bn_forward_train(x.data(), m, c, gamma.data(), beta.data(),
                                1e-5f, y.data(), mean.data(), var.data());
        },
        3);
    const double o = best_ms(
        [&] {
          k::bn_forward_train(x.data(), m, c, gamma.data(), beta.data(), 1e-5f,
                              y.data(), mean.data(), var.data());
        },
        7);
    row("bn_forward_train", shape, r, o);

    const int r_dim = 2;  // reduction 16
    auto w1 = random_buf(static_cast<std::size_t>(c) * r_dim, rng);
    auto w2 = random_buf(static_cast<std::size_t>(r_dim) * c, rng);
    std::vector<float> z(static_cast<std::size_t>(batch) * c),
        h1(static_cast<std::size_t>(batch) * r_dim),
        sg(static_cast<std::size_t>(batch) * c);
    const double rs = best_ms(
        [&] {
          ref::se_forward(x.data(), batch, h, w, c, w1.data(), w2.data(),
                          r_dim, y.data(), z.data(), h1.data(), sg.data());
        },
        3);
    const double os = best_ms(
        [&] {
          k::se_forward(x.data(), batch, h, w, c, w1.data(), w2.data(), r_dim,
                        y.data(), z.data(), h1.data(), sg.data());
        },
        7);
    row("se_forward", shape, rs, os);

    std::vector<float> pooled(static_cast<std::size_t>(batch) * 45 * 45 * c);
    std::vector<std::int32_t> argmax(pooled.size());
    const double rm = best_ms(
        [&] {
          ref::maxpool_forward(x.data(), batch, h, w, c, 2, 2, pooled.data(),
                               argmax.data());
        },
        3);
    const double om = best_ms(
        [&] {
          k::maxpool_forward(x.data(), batch, h, w, c, 2, 2, pooled.data(),
                             argmax.data());
        },
        7);
    row("maxpool_forward", shape, rm, om);
  }

  {  // The flatten -> 256 dense layer dominates the fully connected cost.
    const std::int64_t f_in = 11 * 11 * 128;
    const int f_out = 256;
    auto x = random_buf(static_cast<std::size_t>(batch) * f_in, rng);
    auto wt = random_buf(static_cast<std::size_t>(f_in) * f_out, rng);
    auto bias = random_buf(f_out, rng);
    std::vector<float> y(static_cast<std::size_t>(batch) * f_out);
    const std::string shape = "15488->256";

    const double r = best_ms(
        [&] {
          ref::dense_forward(x.data(), batch, f_in, f_out, wt.data(),
                             bias.data(), y.data());
        },
        3);
    const double o = best_ms(
        [&] {
          k::dense_forward(x.data(), batch, f_in, f_out, wt.data(),
                           bias.data(), y.data());
        },
        7);
    row("dense_forward", shape, r, o);

    auto gy = random_buf(y.size(), rng);
    std::vector<float> gx(x.size());
    const double rbi = best_ms(
        [&] {
          ref::dense_backward_input(gy.data(), batch, f_in, f_out, wt.data(),
                                    gx.data());
        },
        3);
    const double obi = best_ms(
        [&] {
          k::dense_backward_input(gy.data(), batch, f_in, f_out, wt.data(),
                                  gx.data());
        },
        7);
    row("dense_backward_input", shape, rbi, obi);

    std::vector<float> gw(wt.size()), gb(f_out);
    const double rbw = best_ms(
        [&] {
          ref::dense_backward_weights(x.data(), gy.data(), batch, f_in, f_out,
                                      gw.data(), gb.data());
        },
        3);
    const double obw = best_ms(
        [&] {
          k::dense_backward_weights(x.data(), gy.data(), batch, f_in, f_out,
                                    gw.data(), gb.data());
        },
        7);
    row("dense_backward_weights", shape, rbw, obw);
  }

  {  // Softmax over the 16-class grid.
    const int c = 16;
    auto x = random_buf(static_cast<std::size_t>(batch) * c, rng);
    std::vector<float> y(x.size());
    const double r = best_ms(
        [&] { ref::softmax_forward(x.data(), batch, c, y.data()); }, 5);
    const double o = best_ms(
        [&] { k::softmax_forward(x.data(), batch, c, y.data()); }, 9);
    row("softmax_forward", std::to_string(c) + " classes", r, o);
  }

  return 0;
}
