#include <doctest.h>

#include <cmath>

#include "secci/csi_model.hpp"
#include "secci/rng.hpp"
#include "secci/types.hpp"

using namespace secci;

namespace {

CsiPacket make_packet() {
  CsiPacket p;
  p.csi.resize(kNumAntennas * kNumSubcarriers);
  return p;
}

}  // namespace

TEST_CASE("amplitude and phase of a known sample") {
  const PolarSample s = amplitude_phase({3.0, 4.0});
  CHECK(s.amplitude == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(s.phase == doctest::Approx(0.9272952180016122).epsilon(1e-15));
}

TEST_CASE("amplitude_phase handles axis and zero cases") {
  CHECK(amplitude_phase({0.0, 0.0}).amplitude == 0.0);
  CHECK(amplitude_phase({0.0, 0.0}).phase == 0.0);
  CHECK(amplitude_phase({1.0, 0.0}).phase == 0.0);
  CHECK(amplitude_phase({0.0, 1.0}).phase == doctest::Approx(M_PI / 2));
  // The negative real axis maps to +pi, keeping phases in (-pi, pi].
  CHECK(amplitude_phase({-1.0, 0.0}).phase == doctest::Approx(M_PI));
  CHECK(amplitude_phase({-1.0, -1e-300}).phase > 0.0);
}

TEST_CASE("amplitude_phase round-trips through polar form") {
  Rng rng(21);
  for (int i = 0; i < 2000; ++i) {
    const ComplexSample c{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
    const PolarSample s = amplitude_phase(c);
    CHECK(s.phase > -M_PI);
    CHECK(s.phase <= M_PI);
    const double re = s.amplitude * std::cos(s.phase);
    const double im = s.amplitude * std::sin(s.phase);
    const double scale = std::max(1.0, s.amplitude);
    REQUIRE(std::abs(re - c.re) < 1e-9 * scale);
    REQUIRE(std::abs(im - c.im) < 1e-9 * scale);
  }
}

TEST_CASE("phase difference wraps into (-pi, pi]") {
  CHECK(wrap_phase_difference(0.1, 6.2) ==
        doctest::Approx(0.18318530717958648).epsilon(1e-14));
  CHECK(wrap_phase_difference(2.0, 2.0) == 0.0);
  CHECK(wrap_phase_difference(M_PI, 0.0) == doctest::Approx(M_PI));
  // Exactly -pi lands on the +pi end of the half-open interval.
  CHECK(wrap_phase_difference(0.0, M_PI) == doctest::Approx(M_PI));
}

TEST_CASE("wrap_phase_difference is antisymmetric modulo 2pi") {
  Rng rng(22);
  for (int i = 0; i < 2000; ++i) {
    const double a = rng.uniform(-20.0, 20.0);
    const double b = rng.uniform(-20.0, 20.0);
    const double d1 = wrap_phase_difference(a, b);
    const double d2 = wrap_phase_difference(b, a);
    REQUIRE(d1 > -M_PI);
    REQUIRE(d1 <= M_PI);
    const double sum = std::remainder(d1 + d2, 2.0 * M_PI);
    REQUIRE(std::abs(sum) < 1e-12);
  }
}

TEST_CASE("aoa of a quarter-turn phase difference at the default geometry") {
  const AntennaGeometry geom;
  CHECK(estimate_aoa(M_PI / 2, geom) ==
        doctest::Approx(1.0458371524906411).epsilon(1e-13));
}

TEST_CASE("aoa endpoint behavior") {
  const AntennaGeometry geom;
  CHECK(estimate_aoa(0.0, geom) == doctest::Approx(M_PI / 2));
  // |arg| > 1 must clamp instead of producing NaN.
  CHECK(estimate_aoa(M_PI, geom) == doctest::Approx(0.0));
  CHECK(estimate_aoa(-M_PI, geom) == doctest::Approx(M_PI));
}

TEST_CASE("aoa at exact half-wavelength spacing maps pi*cos(theta) back") {
  AntennaGeometry geom;
  geom.spacing_m = geom.wavelength_m() / 2.0;
  // Delta phi = pi*cos(pi/3) = pi/2 must invert to exactly pi/3.
  CHECK(estimate_aoa(M_PI * std::cos(M_PI / 3), geom) ==
        doctest::Approx(M_PI / 3).epsilon(1e-14));
}

TEST_CASE("aoa is monotone decreasing in the phase difference") {
  const AntennaGeometry geom;
  Rng rng(23);
  for (int i = 0; i < 1000; ++i) {
    double a = rng.uniform(-1.5, 1.5);
    double b = rng.uniform(-1.5, 1.5);
    if (a > b) std::swap(a, b);
    if (a == b) continue;
    const double ta = estimate_aoa(a, geom);
    const double tb = estimate_aoa(b, geom);
    REQUIRE(ta >= tb);
    REQUIRE(ta >= 0.0);
    REQUIRE(ta <= M_PI);
  }
}

TEST_CASE("average_amplitude is the arithmetic mean") {
  CHECK(average_amplitude(3.0, 5.0) == 4.0);
  CHECK(average_amplitude(0.0, 0.0) == 0.0);
}

TEST_CASE("extract_features lays out pairs and subcarriers as documented") {
  CsiPacket p = make_packet();
  const double delta = 0.3;
  for (int ant = 0; ant < kNumAntennas; ++ant) {
    for (int sc = 0; sc < kNumSubcarriers; ++sc) {
      const double amp = 1.0 + ant;
      const double phase = ant * delta + 0.01 * sc;
      p.at(ant, sc) = {amp * std::cos(phase), amp * std::sin(phase)};
    }
  }
  const AntennaGeometry geom;
  const FeatureVector f = extract_features(p, geom);

  for (std::size_t pair = 0; pair < kAntennaPairs.size(); ++pair) {
    const auto [lo, hi] = kAntennaPairs[pair];
    for (int sc = 0; sc < kNumSubcarriers; ++sc) {
      const int i = static_cast<int>(pair) * kNumSubcarriers + sc;
      CHECK(f.amp_avg[i] ==
            doctest::Approx(0.5 * ((1.0 + lo) + (1.0 + hi))).epsilon(1e-12));
      CHECK(f.phase_diff[i] ==
            doctest::Approx((hi - lo) * delta).epsilon(1e-12));
      CHECK(f.aoa[i] ==
            doctest::Approx(estimate_aoa((hi - lo) * delta, geom)).epsilon(1e-12));
    }
  }
}

TEST_CASE("extract_features is pure: same input gives identical output") {
  CsiPacket p = make_packet();
  Rng rng(24);
  for (auto& s : p.csi) s = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  const AntennaGeometry geom;
  const FeatureVector a = extract_features(p, geom);
  const FeatureVector b = extract_features(p, geom);
  CHECK(a.amp_avg == b.amp_avg);
  CHECK(a.aoa == b.aoa);
  CHECK(a.phase_diff == b.phase_diff);
  for (double v : a.aoa) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= M_PI);
  }
  for (double v : a.phase_diff) {
    REQUIRE(v > -M_PI);
    REQUIRE(v <= M_PI);
  }
}

TEST_CASE("extract_features rejects malformed packets") {
  CsiPacket p;
  p.csi.resize(10);
  CHECK_THROWS_AS(extract_features(p, AntennaGeometry{}), StructuralError);
}
