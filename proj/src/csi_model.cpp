#include "secci/csi_model.hpp"

#include <algorithm>
#include <cmath>

namespace secci {

PolarSample amplitude_phase(const ComplexSample& s) {
  if (s.re == 0.0 && s.im == 0.0) return {0.0, 0.0};
  double phase = std::atan2(s.im, s.re);
  if (phase <= -M_PI) phase = M_PI;  // atan2(-0.0, x<0) returns -pi
  return {std::hypot(s.re, s.im), phase};
}

double wrap_phase_difference(double phi_a, double phi_b) {
  // IEEE remainder lands in [-pi, pi]; bump the closed lower end.
  double d = std::remainder(phi_a - phi_b, 2.0 * M_PI);
  if (d <= -M_PI) d = M_PI;
  return d;
}

double estimate_aoa(double delta_phi, const AntennaGeometry& geom) {
  const double arg =
      delta_phi * geom.wavelength_m() / (2.0 * M_PI * geom.spacing_m);
  return std::acos(std::clamp(arg, -1.0, 1.0));
}

double average_amplitude(double amp_a, double amp_b) {
  return 0.5 * (amp_a + amp_b);
}

FeatureVector extract_features(const CsiPacket& pkt,
                               const AntennaGeometry& geom) {
  if (pkt.csi.size() != kNumAntennas * kNumSubcarriers) {
    throw StructuralError("extract_features: packet csi must be 3x30");
  }
  FeatureVector out;
  for (std::size_t p = 0; p < kAntennaPairs.size(); ++p) {
    const auto [lo, hi] = kAntennaPairs[p];
    for (int sc = 0; sc < kNumSubcarriers; ++sc) {
      const PolarSample a = amplitude_phase(pkt.at(lo, sc));
      const PolarSample b = amplitude_phase(pkt.at(hi, sc));
      const int i = static_cast<int>(p) * kNumSubcarriers + sc;
      out.amp_avg[i] = average_amplitude(a.amplitude, b.amplitude);
      out.phase_diff[i] = wrap_phase_difference(b.phase, a.phase);
      out.aoa[i] = estimate_aoa(out.phase_diff[i], geom);
    }
  }
  return out;
}

}  // namespace secci
