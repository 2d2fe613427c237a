#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "secci/kernels.hpp"
#include "secci/kernels_reference.hpp"
#include "secci/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace secci;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, Rng& rng, double lo = -1.0,
                          double hi = 1.0) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return v;
}

template <typename T>
double max_mixed_error(const std::vector<T>& a, const std::vector<T>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double err = std::abs(static_cast<double>(a[i]) -
                                static_cast<double>(b[i])) /
                       (1.0 + std::abs(static_cast<double>(b[i])));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace

TEST_CASE("conv forward matches hand-worked small cases") {
  SUBCASE("1x1 unit kernel is the identity") {
    std::vector<float> x = {1.f, -2.f, 3.f, 0.5f, -0.25f, 4.f};
    const std::vector<float> w = {1.f};
    std::vector<float> y(6, -99.f);
    kernels::conv2d_forward(x.data(), 1, 2, 3, 1, w.data(),
                            static_cast<const float*>(nullptr), 1, 1, 1, 1, 0,
                            y.data());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
  }
  SUBCASE("3x3 ones kernel on a constant image counts the support") {
    std::vector<float> x(9, 1.f);
    std::vector<float> w(9, 1.f);
    std::vector<float> y(9, 0.f);
    kernels::conv2d_forward(x.data(), 1, 3, 3, 1, w.data(),
                            static_cast<const float*>(nullptr), 3, 3, 1, 1, 1,
                            y.data());
    const std::vector<float> expect = {4.f, 6.f, 4.f, 6.f, 9.f,
                                       6.f, 4.f, 6.f, 4.f};
    for (int i = 0; i < 9; ++i) CHECK(y[i] == doctest::Approx(expect[i]));
  }
  SUBCASE("bias is added to every output") {
    std::vector<float> x(4 * 3, 0.f);
    std::vector<float> w(3 * 2, 0.f);
    const std::vector<float> b = {1.5f, -2.5f};
    std::vector<float> y(4 * 2, 0.f);
    kernels::conv2d_forward(x.data(), 1, 2, 2, 3, w.data(), b.data(), 1, 1, 2,
                            1, 0, y.data());
    for (int i = 0; i < 4; ++i) {
      CHECK(y[i * 2 + 0] == 1.5f);
      CHECK(y[i * 2 + 1] == -2.5f);
    }
  }
}

TEST_CASE("optimized conv kernels agree with the reference on random shapes") {
  Rng rng(991);
  struct Shape {
    int n, h, w, c, kh, kw, p, stride, pad;
  };
  const std::vector<Shape> shapes = {
      {2, 9, 9, 3, 3, 3, 8, 1, 1},  {1, 7, 5, 4, 3, 3, 6, 1, 0},
      {3, 8, 8, 2, 2, 2, 5, 2, 0},  {2, 11, 6, 5, 3, 3, 7, 2, 1},
      {1, 4, 4, 1, 1, 1, 3, 1, 0},  {2, 6, 6, 3, 5, 5, 4, 1, 2},
      {1, 10, 10, 6, 3, 3, 16, 1, 1}};
  for (const auto& s : shapes) {
    CAPTURE(s.h);
    CAPTURE(s.stride);
    CAPTURE(s.pad);
    const int oh = kernels::conv_out_dim(s.h, s.kh, s.stride, s.pad);
    const int ow = kernels::conv_out_dim(s.w, s.kw, s.stride, s.pad);
    auto x = random_vec<float>(static_cast<std::size_t>(s.n) * s.h * s.w * s.c,
                               rng);
    auto w = random_vec<float>(
        static_cast<std::size_t>(s.kh) * s.kw * s.c * s.p, rng);
    auto b = random_vec<float>(s.p, rng);
    auto gy = random_vec<float>(static_cast<std::size_t>(s.n) * oh * ow * s.p,
                                rng);

    std::vector<float> y_fast(gy.size()), y_ref(gy.size());
    kernels::conv2d_forward(x.data(), s.n, s.h, s.w, s.c, w.data(), b.data(),
                            s.kh, s.kw, s.p, s.stride, s.pad, y_fast.data());
    kernels::reference::conv2d_forward(x.data(), s.n, s.h, s.w, s.c, w.data(),
                                       b.data(), s.kh, s.kw, s.p, s.stride,
                                       s.pad, y_ref.data());
    CHECK(max_mixed_error(y_fast, y_ref) < 1e-4);

    std::vector<float> gx_fast(x.size()), gx_ref(x.size());
    kernels::conv2d_backward_input(gy.data(), s.n, oh, ow, s.p, w.data(), s.kh,
                                   s.kw, s.c, s.stride, s.pad, gx_fast.data(),
                                   s.h, s.w);
    kernels::reference::conv2d_backward_input(gy.data(), s.n, oh, ow, s.p,
                                              w.data(), s.kh, s.kw, s.c,
                                              s.stride, s.pad, gx_ref.data(),
                                              s.h, s.w);
    CHECK(max_mixed_error(gx_fast, gx_ref) < 1e-4);

    std::vector<float> gw_fast(w.size()), gw_ref(w.size());
    std::vector<float> gb_fast(s.p), gb_ref(s.p);
    kernels::conv2d_backward_weights(x.data(), s.n, s.h, s.w, s.c, gy.data(),
                                     oh, ow, s.p, s.kh, s.kw, s.stride, s.pad,
                                     gw_fast.data(), gb_fast.data());
    kernels::reference::conv2d_backward_weights(
        x.data(), s.n, s.h, s.w, s.c, gy.data(), oh, ow, s.p, s.kh, s.kw,
        s.stride, s.pad, gw_ref.data(), gb_ref.data());
    CHECK(max_mixed_error(gw_fast, gw_ref) < 5e-4);
    CHECK(max_mixed_error(gb_fast, gb_ref) < 5e-4);
  }
}

TEST_CASE("double instantiation matches the reference almost exactly") {
  Rng rng(17);
  const int n = 2, h = 6, w = 7, c = 3, kh = 3, kw = 3, p = 5;
  const int oh = kernels::conv_out_dim(h, kh, 1, 1);
  const int ow = kernels::conv_out_dim(w, kw, 1, 1);
  auto x = random_vec<double>(static_cast<std::size_t>(n) * h * w * c, rng);
  auto wt = random_vec<double>(static_cast<std::size_t>(kh) * kw * c * p, rng);
  std::vector<double> y_fast(static_cast<std::size_t>(n) * oh * ow * p);
  std::vector<double> y_ref(y_fast.size());
  kernels::conv2d_forward(x.data(), n, h, w, c, wt.data(),
                          static_cast<const double*>(nullptr), kh, kw, p, 1, 1,
                          y_fast.data());
  kernels::reference::conv2d_forward(x.data(), n, h, w, c, wt.data(),
                                     static_cast<const double*>(nullptr), kh,
                                     kw, p, 1, 1, y_ref.data());
  CHECK(max_mixed_error(y_fast, y_ref) < 1e-13);
}

TEST_CASE("maxpool forward/backward route values and gradients correctly") {
  // 4x4 single channel with known maxima.
  // Window (0,0): max 8 at (1,1); window (0,1): max 7 at (0,0) of window...
  std::vector<float> x = {1.f, 2.f, 7.f, 3.f,  //
                          5.f, 8.f, 4.f, 6.f,  //
                          0.f, 1.f, 2.f, 2.f,  //
                          9.f, 1.f, 2.f, 2.f};
  std::vector<float> y(4);
  std::vector<std::int32_t> amax(4);
  kernels::maxpool_forward(x.data(), 1, 4, 4, 1, 2, 2, y.data(), amax.data());
  CHECK(y == std::vector<float>{8.f, 7.f, 9.f, 2.f});
  CHECK(amax[0] == 3);  // (ky=1, kx=1)
  CHECK(amax[1] == 0);  // (ky=0, kx=0)
  CHECK(amax[2] == 2);  // (ky=1, kx=0)
  CHECK(amax[3] == 0);  // first of the tied 2s, scan order

  std::vector<float> gy = {1.f, 2.f, 3.f, 4.f};
  std::vector<float> gx(16, -1.f);
  kernels::maxpool_backward(gy.data(), amax.data(), 1, 2, 2, 1, 2, 2,
                            gx.data(), 4, 4);
  std::vector<float> expect(16, 0.f);
  expect[1 * 4 + 1] = 1.f;
  expect[0 * 4 + 2] = 2.f;
  expect[3 * 4 + 0] = 3.f;
  expect[2 * 4 + 2] = 4.f;
  CHECK(gx == expect);
}

TEST_CASE("maxpool drops trailing rows and columns that do not fill a window") {
  // 5x5 -> 2x2 with 2x2 windows; the last row/column never contribute.
  Rng rng(5);
  auto x = random_vec<float>(25, rng);
  x[24] = 100.f;  // corner outside any window
  std::vector<float> y(4);
  std::vector<std::int32_t> amax(4);
  kernels::maxpool_forward(x.data(), 1, 5, 5, 1, 2, 2, y.data(), amax.data());
  for (float v : y) CHECK(v < 100.f);

  std::vector<float> yr(4);
  std::vector<std::int32_t> ar(4);
  kernels::reference::maxpool_forward(x.data(), 1, 5, 5, 1, 2, 2, yr.data(),
                                      ar.data());
  CHECK(y == yr);
  CHECK(amax == ar);
}

TEST_CASE("optimized pool, dense, bn, se, softmax agree with the reference") {
  Rng rng(2024);
  SUBCASE("maxpool random") {
    const int n = 3, h = 9, w = 7, c = 5;
    auto x = random_vec<float>(static_cast<std::size_t>(n) * h * w * c, rng);
    std::vector<float> y1(static_cast<std::size_t>(n) * 4 * 3 * c),
        y2(y1.size());
    std::vector<std::int32_t> a1(y1.size()), a2(y1.size());
    kernels::maxpool_forward(x.data(), n, h, w, c, 2, 2, y1.data(), a1.data());
    kernels::reference::maxpool_forward(x.data(), n, h, w, c, 2, 2, y2.data(),
                                        a2.data());
    CHECK(y1 == y2);
    CHECK(a1 == a2);
  }
  SUBCASE("dense random") {
    const int n = 4, f = 37, o = 11;
    auto x = random_vec<float>(static_cast<std::size_t>(n) * f, rng);
    auto w = random_vec<float>(static_cast<std::size_t>(f) * o, rng);
    auto b = random_vec<float>(o, rng);
    auto gy = random_vec<float>(static_cast<std::size_t>(n) * o, rng);
    std::vector<float> y1(gy.size()), y2(gy.size());
    kernels::dense_forward(x.data(), n, f, o, w.data(), b.data(), y1.data());
    kernels::reference::dense_forward(x.data(), n, f, o, w.data(), b.data(),
                                      y2.data());
    CHECK(max_mixed_error(y1, y2) < 1e-4);

    std::vector<float> gx1(x.size()), gx2(x.size());
    kernels::dense_backward_input(gy.data(), n, f, o, w.data(), gx1.data());
    kernels::reference::dense_backward_input(gy.data(), n, f, o, w.data(),
                                             gx2.data());
    CHECK(max_mixed_error(gx1, gx2) < 1e-4);

    std::vector<float> gw1(w.size()), gw2(w.size()), gb1(o), gb2(o);
    kernels::dense_backward_weights(x.data(), gy.data(), n, f, o, gw1.data(),
                                    gb1.data());
    kernels::reference::dense_backward_weights(x.data(), gy.data(), n, f, o,
                                               gw2.data(), gb2.data());
    CHECK(max_mixed_error(gw1, gw2) < 1e-4);
    CHECK(max_mixed_error(gb1, gb2) < 1e-4);
  }
  SUBCASE("batchnorm random") {
    const std::int64_t m = 64;
    const int c = 9;
    auto x = random_vec<float>(static_cast<std::size_t>(m) * c, rng);
    auto gamma = random_vec<float>(c, rng, 0.5, 1.5);
    auto beta = random_vec<float>(c, rng);
    std::vector<float> y1(x.size()), y2(x.size()), mu1(c), mu2(c), v1(c),
        v2(c);
    kernels::bn_forward_train(x.data(), m, c, gamma.data(), beta.data(),
                              1e-5f, y1.data(), mu1.data(), v1.data());
    kernels::reference::bn_forward_train(x.data(), m, c, gamma.data(),
                                         beta.data(), 1e-5f, y2.data(),
                                         mu2.data(), v2.data());
    CHECK(max_mixed_error(y1, y2) < 5e-4);
    CHECK(max_mixed_error(v1, v2) < 5e-4);
  }
  SUBCASE("squeeze-excite random") {
    const int n = 2, h = 5, w = 4, c = 8, r_dim = 2;
    auto x = random_vec<float>(static_cast<std::size_t>(n) * h * w * c, rng);
    auto w1 = random_vec<float>(static_cast<std::size_t>(r_dim) * c, rng);
    auto w2 = random_vec<float>(static_cast<std::size_t>(c) * r_dim, rng);
    std::vector<float> y1(x.size()), y2(x.size());
    std::vector<float> z1(n * c), z2(n * c), h1a(n * r_dim), h1b(n * r_dim),
        s1(n * c), s2(n * c);
    kernels::se_forward(x.data(), n, h, w, c, w1.data(), w2.data(), r_dim,
                        y1.data(), z1.data(), h1a.data(), s1.data());
    kernels::reference::se_forward(x.data(), n, h, w, c, w1.data(), w2.data(),
                                   r_dim, y2.data(), z2.data(), h1b.data(),
                                   s2.data());
    CHECK(max_mixed_error(y1, y2) < 1e-4);
    CHECK(max_mixed_error(s1, s2) < 1e-4);
  }
  SUBCASE("softmax random") {
    const int n = 5, c = 13;
    auto x = random_vec<float>(static_cast<std::size_t>(n) * c, rng, -4.0, 4.0);
    std::vector<float> y1(x.size()), y2(x.size());
    kernels::softmax_forward(x.data(), n, c, y1.data());
    kernels::reference::softmax_forward(x.data(), n, c, y2.data());
    CHECK(max_mixed_error(y1, y2) < 1e-5);
  }
}

TEST_CASE("softmax rows are distributions and shift-invariant") {
  Rng rng(7);
  const int n = 6, c = 9;
  auto x = random_vec<float>(static_cast<std::size_t>(n) * c, rng, -5.0, 5.0);
  std::vector<float> y(x.size());
  kernels::softmax_forward(x.data(), n, c, y.data());
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      CHECK(y[i * c + j] > 0.f);
      sum += y[i * c + j];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
  auto shifted = x;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) shifted[i * c + j] += 123.f;
  std::vector<float> ys(x.size());
  kernels::softmax_forward(shifted.data(), n, c, ys.data());
  for (std::size_t i = 0; i < y.size(); ++i)
    CHECK(ys[i] == doctest::Approx(y[i]).epsilon(1e-5));
}

TEST_CASE("cross entropy floors the probability at 1e-12") {
  std::vector<float> probs = {0.f, 1.f};
  const int label = 0;
  const double loss = kernels::cross_entropy(probs.data(), &label, 1, 2);
  CHECK(loss == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));

  std::vector<float> gp(2);
  kernels::cross_entropy_backward(probs.data(), &label, 1, 2, gp.data());
  CHECK(gp[0] == doctest::Approx(-1.0 / 1e-12).epsilon(1e-6));
  CHECK(gp[1] == 0.f);
}

TEST_CASE("cross entropy of a confident correct prediction is near zero") {
  std::vector<float> probs = {0.25f, 0.25f, 0.5f, 0.f, 0.7f, 0.2f, 0.1f, 0.f};
  const int labels[2] = {2, 0};
  const double loss = kernels::cross_entropy(probs.data(), labels, 2, 4);
  const double expect = 0.5 * (-std::log(0.5) - std::log(0.7));
  CHECK(loss == doctest::Approx(expect).epsilon(1e-7));
}

TEST_CASE("adamw step reduces to sign-sgd and pure decay in limit cases") {
  SUBCASE("beta1 = beta2 = 0, no decay: step is lr * sign(g)") {
    std::vector<double> w = {1.0, -2.0}, g = {0.5, -0.25}, m(2, 0.0),
                        v(2, 0.0);
    kernels::adamw_step(w.data(), g.data(), m.data(), v.data(), 2, 0.1, 0.0,
                        0.0, 0.0, 0.0, 1.0, 1.0);
    CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(-1.9).epsilon(1e-12));
  }
  SUBCASE("zero gradient: only the decoupled decay moves the weight") {
    std::vector<double> w = {2.0}, g = {0.0}, m(1, 0.0), v(1, 0.0);
    kernels::adamw_step(w.data(), g.data(), m.data(), v.data(), 1, 0.1, 0.9,
                        0.999, 1e-8, 0.01, 0.1, 0.001);
    CHECK(w[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-12));
  }
  SUBCASE("moment buffers follow the EMA recurrences") {
    std::vector<double> w = {0.0}, g = {2.0}, m = {1.0}, v = {4.0};
    kernels::adamw_step(w.data(), g.data(), m.data(), v.data(), 1, 0.0, 0.9,
                        0.999, 1e-8, 0.0, 1.0, 1.0);
    CHECK(m[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0).epsilon(1e-12));
    CHECK(v[0] == doctest::Approx(0.999 * 4.0 + 0.001 * 4.0).epsilon(1e-12));
  }
}

#ifdef _OPENMP
TEST_CASE("kernel results are bit-identical across thread counts") {
  Rng rng(31337);
  const int n = 2, h = 12, w = 10, c = 4, kh = 3, kw = 3, p = 8;
  const int oh = kernels::conv_out_dim(h, kh, 1, 1);
  const int ow = kernels::conv_out_dim(w, kw, 1, 1);
  auto x = random_vec<float>(static_cast<std::size_t>(n) * h * w * c, rng);
  auto wt = random_vec<float>(static_cast<std::size_t>(kh) * kw * c * p, rng);
  auto b = random_vec<float>(p, rng);
  auto gy = random_vec<float>(static_cast<std::size_t>(n) * oh * ow * p, rng);

  const int saved = omp_get_max_threads();
  auto run_all = [&](int threads) {
    omp_set_num_threads(threads);
    std::vector<float> y(gy.size()), gx(x.size()), gw(wt.size()), gb(p);
    kernels::conv2d_forward(x.data(), n, h, w, c, wt.data(), b.data(), kh, kw,
                            p, 1, 1, y.data());
    kernels::conv2d_backward_input(gy.data(), n, oh, ow, p, wt.data(), kh, kw,
                                   c, 1, 1, gx.data(), h, w);
    kernels::conv2d_backward_weights(x.data(), n, h, w, c, gy.data(), oh, ow,
                                     p, kh, kw, 1, 1, gw.data(), gb.data());
    y.insert(y.end(), gx.begin(), gx.end());
    y.insert(y.end(), gw.begin(), gw.end());
    y.insert(y.end(), gb.begin(), gb.end());
    return y;
  };
  const auto serial = run_all(1);
  const auto threaded = run_all(4);
  omp_set_num_threads(saved);
  REQUIRE(serial.size() == threaded.size());
  CHECK(std::memcmp(serial.data(), threaded.data(),
                    serial.size() * sizeof(float)) == 0);
}
#endif
